import pytest
from hypothesis import given, strategies as st

from isc.kg import KBError
from isc.synth import SynthConfig, generate


def test_triple_count_is_exact():
    kb = generate(SynthConfig(entities=100, relations=4, density=3.0, seed=0))
    assert kb.n_triples == 300


def test_same_seed_same_kb():
    cfg = SynthConfig(entities=50, relations=3, density=2.5, seed=7)
    assert generate(cfg) == generate(cfg)
    assert generate(cfg) != generate(SynthConfig(50, 3, 2.5, seed=8))


def test_infeasible_density():
    with pytest.raises(KBError, match="infeasible"):
        generate(SynthConfig(entities=3, relations=1, density=3.0))


@pytest.mark.parametrize("kwargs", [dict(entities=0), dict(relations=0), dict(density=0.0)])
def test_bad_config(kwargs):
    with pytest.raises(KBError):
        SynthConfig(**kwargs)


@given(st.integers(2, 40), st.integers(1, 5), st.floats(0.1, 4.0), st.integers(0, 10**6),
       st.booleans())
def test_generated_kbs_satisfy_invariants(n_e, n_r, density, seed, loops):
    cfg = SynthConfig(n_e, n_r, density, seed, loops)
    per_pair = n_e * n_e if loops else n_e * (n_e - 1)
    if round(density * n_e) > per_pair * n_r:
        return
    kb = generate(cfg)
    assert abs(kb.n_triples - density * n_e) <= 1
    rows = [tuple(t) for t in kb.triples.tolist()]
    assert len(set(rows)) == len(rows)
    assert all(0 < r <= n_r for _, r, _ in rows)
    if not loops:
        assert all(h != t for h, _, t in rows)
