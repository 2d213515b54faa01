import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isc.channel import (BITS_PER_DIM, FRAC_BITS, ChannelConfig, ChannelError, Packet, Recoverer,
                         bpsk_ber, dequantize, make_message, per_sweep, quantize, quantize_vector,
                         recover, transmit, wilson_interval, write_sweep, _incoming)
from isc.embedding import EmbeddingTable
from isc.policy import build_policy

from conftest import kb_from, random_table


def test_packet_width_for_100_dims(small_kb):
    tab = random_table(small_kb, 100)
    tab.entity_vecs /= np.linalg.norm(tab.entity_vecs, axis=1, keepdims=True)
    assert quantize(tab, 0).width == 3800 == 100 * BITS_PER_DIM


def test_zero_vector_is_all_zero_bits():
    assert not quantize_vector(np.zeros(5)).any()


def test_twos_complement_layout():
    bits = quantize_vector([-1.0])
    assert bits[0] == 1 and bits[:4].tolist() == [1, 1, 1, 1] and not bits[4:].any()
    bits = quantize_vector([0.5])
    assert bits[:5].tolist() == [0, 0, 0, 0, 1] and not bits[5:].any()


@given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=16))
def test_round_trip_error_is_half_ulp(values):
    v = np.array(values)
    assert np.max(np.abs(dequantize(quantize_vector(v)) - v)) <= 2.0 ** -(FRAC_BITS + 1)


@given(st.integers(1, 120), st.integers(0, 2**32 - 1))
def test_round_trip_on_unit_vectors(dim, seed):
    v = np.random.default_rng(seed).normal(size=dim)
    v /= np.linalg.norm(v)
    assert np.max(np.abs(dequantize(quantize_vector(v)) - v)) <= 2.0 ** -35


def test_out_of_range_components():
    with pytest.raises(ChannelError):
        quantize_vector([4.0])
    with pytest.raises(ChannelError):
        quantize_vector([np.nan])
    with pytest.raises(ChannelError):
        dequantize(np.zeros(BITS_PER_DIM + 1))


def test_ber_closed_form():
    assert bpsk_ber(0.0) == pytest.approx(0.0786496, abs=1e-6)
    assert bpsk_ber(math.inf) == 0.0


def test_infinite_snr_is_noiseless():
    bits = np.random.default_rng(0).integers(0, 2, 1000).astype(np.uint8)
    assert np.array_equal(transmit(bits, math.inf, 1), bits)


@pytest.mark.parametrize("snr", [0.0, 4.0])
def test_flip_rate_within_three_sigma(snr):
    n = 200_000
    bits = np.zeros(n, dtype=np.uint8)
    flips = int(transmit(bits, snr, seed=3).sum())
    p = bpsk_ber(snr)
    assert abs(flips - n * p) < 3 * math.sqrt(n * p * (1 - p))


def test_error_patterns_nest_across_snr():
    bits = np.zeros(50_000, dtype=np.uint8)
    low, high = transmit(bits, 2.0, seed=[1, 2]), transmit(bits, 6.0, seed=[1, 2])
    assert np.all(high <= low)


def _dense_setup():
    kb = kb_from("""
        a\tR1\tb
        a\tR2\tc
        b\tR1\tc
        c\tR1\td
        d\tR2\ta
        b\tR2\td
    """)
    rng = np.random.default_rng(0)
    v = rng.normal(size=(kb.n_entities, 6))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    tab = EmbeddingTable(v, rng.normal(size=(kb.n_relations, 6)), kb.entity_names,
                         kb.relation_names)
    return kb, tab, build_policy(kb.n_relations, 6, seed=0)


def test_clean_packet_recovered_in_every_mode():
    kb, tab, m = _dense_setup()
    for e in range(kb.n_entities):
        for mode in ("none", "nearest", "reasoning"):
            assert recover(quantize(tab, e).bits, kb, tab, m, mode, context=[0]) == e


def test_small_corruption_nearest_recovers():
    kb, tab, m = _dense_setup()
    gaps = [np.linalg.norm(a - b) for i, a in enumerate(tab.entity_vecs)
            for b in tab.entity_vecs[i + 1:]]
    half = min(gaps) / 2
    dec = Recoverer(kb, tab, m)
    for e in range(kb.n_entities):
        bits = quantize(tab, e).bits.copy()
        # flipping the lowest fraction bit of every word moves each component by 2^-34
        bits[BITS_PER_DIM - 1::BITS_PER_DIM] ^= 1
        assert np.linalg.norm(dequantize(bits) - tab.entity_vecs[e]) < half
        assert dec.recover(bits, "nearest") == e
        assert dec.recover(bits, "none") is None


def test_reasoning_prefers_reachable_candidate():
    # the codeword of x lies closest to the received vector, but only y is
    # reachable from the message context
    kb = kb_from("s\tR1\tm\nm\tR1\ty\nq\tR1\tx")
    names = kb.entity_names
    vecs = np.zeros((kb.n_entities, 2))
    vecs[names.index("s")] = [0.0, 3.0]
    vecs[names.index("m")] = [0.0, -3.0]
    vecs[names.index("q")] = [-3.0, 0.0]
    vecs[names.index("x")] = [1.0, 0.0]
    vecs[names.index("y")] = [1.2, 0.0]
    tab = EmbeddingTable(vecs, np.zeros((kb.n_relations, 2)), kb.entity_names, kb.relation_names)
    m = build_policy(kb.n_relations, 2, seed=None)
    dec = Recoverer(kb, tab, m, shortlist=2)
    rx = quantize_vector([1.05, 0.0])
    ctx = [kb.entity_id("s")]
    assert dec.recover(rx, "nearest") == kb.entity_id("x")
    assert dec.recover(rx, "reasoning", ctx) == kb.entity_id("y")
    # with no usable context the decoder falls back to nearest
    assert dec.recover(rx, "reasoning", []) == kb.entity_id("x")


def test_reasoning_never_worse_than_nearest_per_trial():
    kb, tab, m = _dense_setup()
    dec = Recoverer(kb, tab, m)
    inc = _incoming(kb)
    for i in range(300):
        rng = np.random.default_rng([0, i])
        target = int(rng.integers(kb.n_entities))
        ctx = make_message(kb, inc, target, 2, rng)
        rx = transmit(dec.codewords[target], 6.0, seed=[0, i, 1])
        if dec.recover(rx, "nearest", ctx) == target:
            assert dec.recover(rx, "reasoning", ctx) == target


def test_message_context_walks_into_target():
    kb = kb_from("a\tR1\tb\nb\tR1\tc")
    ctx = make_message(kb, _incoming(kb), kb.entity_id("c"), 2, np.random.default_rng(0))
    assert ctx == [kb.entity_id("b"), kb.entity_id("a")]


def test_sweep_rows_and_csv(tmp_path):
    kb, tab, m = _dense_setup()
    cfg = ChannelConfig(snr_db=(0, 2, 4, 6, 8, 10), packets=20)
    rows = per_sweep(cfg, kb, tab, m)
    assert len(rows) == 18
    write_sweep(rows, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "snr_db,mode,trials,errors,per" and len(lines) == 19


def test_infinite_snr_sweep_is_error_free():
    kb, tab, m = _dense_setup()
    rows = per_sweep(ChannelConfig(snr_db=(math.inf,), packets=30), kb, tab, m)
    assert all(r.per == 0.0 for r in rows)


def test_threads_do_not_change_results():
    kb, tab, m = _dense_setup()
    a = per_sweep(ChannelConfig(snr_db=(0, 4, 8), packets=40), kb, tab, m)
    b = per_sweep(ChannelConfig(snr_db=(0, 4, 8), packets=40, threads=3), kb, tab, m)
    assert a == b


def test_bad_modes_and_widths():
    kb, tab, m = _dense_setup()
    with pytest.raises(ChannelError):
        ChannelConfig(modes=("psychic",))
    with pytest.raises(ChannelError):
        Recoverer(kb, tab, m).recover(np.zeros(5), "nearest")


def test_wilson_interval_reference_values():
    # the interval's ends solve (x - p)^2 = z^2 p (1 - p) / n for p
    n, x, z = 100, 0.1, 1.959963984540054
    a, b, c = 1 + z * z / n, -(2 * x + z * z / n), x * x
    disc = math.sqrt(b * b - 4 * a * c)
    lo, hi = wilson_interval(10, 100)
    assert (lo, hi) == pytest.approx(((-b - disc) / (2 * a), (-b + disc) / (2 * a)), rel=1e-12)
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(0, 50)
    assert lo == 0.0 and hi > 0
