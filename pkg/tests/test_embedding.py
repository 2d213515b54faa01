import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from isc.embedding import (EmbeddingTable, TransEConfig, load_embeddings, margin_loss,
                           margin_loss_grads, nearest_entities, path_embedding, path_embeddings,
                           save_embeddings, train_transe, transe_score)
from isc.kg import NO_OP, ReasoningPath, Triple
from isc.synth import SynthConfig, generate

from conftest import kb_from, random_table
from fd import REL_TOL, numeric_grad, rel_error


def test_chain_positive_scores_beat_corrupted():
    kb = kb_from("a\tR1\tb\nb\tR1\tc")
    tab = train_transe(kb, TransEConfig(dim=10, epochs=200, seed=0))
    pos = [transe_score(tab, t) for t in kb.triples]
    neg = [transe_score(tab, (h, r, t)) for h, r, t in
           [(0, 1, 0), (0, 1, 2), (1, 1, 0), (1, 1, 1), (2, 1, 0), (2, 1, 1)]]
    assert np.mean(pos) < np.mean(neg)


def test_table_shape_unit_entities_and_zero_no_op(small_kb):
    tab = train_transe(small_kb, TransEConfig(dim=12, epochs=5, seed=0))
    assert tab.entity_vecs.shape == (small_kb.n_entities, 12)
    assert tab.relation_vecs.shape == (small_kb.n_relations, 12)
    assert np.allclose(np.linalg.norm(tab.entity_vecs, axis=1), 1.0, atol=1e-6)
    assert not tab.relation_vecs[NO_OP].any()


def test_entities_are_unit_after_every_epoch():
    kb = generate(SynthConfig(entities=30, relations=3, density=3.0, seed=2))
    norms = []
    train_transe(kb, TransEConfig(dim=8, epochs=10, seed=0),
                 on_epoch=lambda _e, _l, tab: norms.append(np.linalg.norm(tab.entity_vecs, axis=1)))
    assert len(norms) == 10
    assert all(np.allclose(n, 1.0, atol=1e-6) for n in norms)


def test_loss_trends_down():
    kb = generate(SynthConfig(entities=60, relations=4, density=3.0, seed=1))
    losses = []
    train_transe(kb, TransEConfig(dim=16, epochs=80, seed=0),
                 on_epoch=lambda _e, loss, _t: losses.append(loss))
    q = len(losses) // 4
    assert np.mean(losses[-q:]) < np.mean(losses[:q])


def test_training_is_seeded(small_kb):
    cfg = TransEConfig(dim=6, epochs=3, seed=4)
    a, b = train_transe(small_kb, cfg), train_transe(small_kb, cfg)
    assert np.array_equal(a.entity_vecs, b.entity_vecs)


def test_score_examples():
    tab = EmbeddingTable(np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([[0.0, 0.0], [0.0, 1.0]]))
    assert transe_score(tab, Triple(0, 1, 1)) == 0.0
    assert transe_score(tab, (0, NO_OP, 0)) == 0.0


@given(st.integers(0, 2**32 - 1))
def test_score_matches_independent_norm(seed):
    kb = generate(SynthConfig(entities=8, relations=3, density=2.0, seed=0))
    tab = random_table(kb, 5, seed)
    for h, r, t in kb.triples:
        diff = tab.entity_vecs[h] + tab.relation_vecs[r] - tab.entity_vecs[t]
        assert transe_score(tab, (h, r, t)) == pytest.approx(sum(x * x for x in diff) ** 0.5,
                                                             rel=1e-12)


def test_path_embedding_is_relation_sum(small_kb):
    tab = random_table(small_kb, 6, 1)
    assert not path_embedding(tab, ReasoningPath(0, ((NO_OP, 0), (NO_OP, 0)))).any()
    p = ReasoningPath(0, ((1, 3), (2, 5)))
    assert np.array_equal(path_embedding(tab, p), tab.relation_vecs[1] + tab.relation_vecs[2])
    swapped = ReasoningPath(4, ((2, 1), (1, 9)))
    assert np.array_equal(path_embedding(tab, swapped), path_embedding(tab, p))


def test_batch_path_embeddings_match_loop(small_kb):
    from isc.kg import sample_expert_paths
    tab = random_table(small_kb, 6, 2)
    paths = sample_expert_paths(small_kb, 25, 2, seed=0).paths
    expect = []
    for p in paths:
        acc = np.zeros(6)
        for r in p.relations:
            acc = acc + tab.relation_vecs[r]
        expect.append(acc)
    assert np.allclose(path_embeddings(tab, paths), expect, rtol=0, atol=1e-15)


def test_nearest_entities(small_kb):
    tab = random_table(small_kb, 4, 3)
    assert nearest_entities(tab, tab.entity_vecs[7], 1) == [(7, 0.0)]
    full = nearest_entities(tab, np.zeros(4), tab.n_entities)
    d = np.linalg.norm(tab.entity_vecs, axis=1)
    assert [e for e, _ in full] == sorted(range(tab.n_entities), key=lambda i: (d[i], i))
    gaps = [np.linalg.norm(a - b) for i, a in enumerate(tab.entity_vecs)
            for b in tab.entity_vecs[i + 1:]]
    eps = np.full(4, 0.49 * min(gaps) / 2)
    assert nearest_entities(tab, tab.entity_vecs[3] + eps, 1)[0][0] == 3


def test_nearest_ties_break_by_id():
    tab = EmbeddingTable(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]), np.zeros((1, 2)))
    assert [e for e, _ in nearest_entities(tab, np.zeros(2), 2)] == [0, 1]


def test_embedding_csv_round_trip(tmp_path, small_tab):
    save_embeddings(small_tab, tmp_path / "e.csv")
    back = load_embeddings(tmp_path / "e.csv")
    assert np.array_equal(back.entity_vecs, small_tab.entity_vecs)
    assert np.array_equal(back.relation_vecs, small_tab.relation_vecs)
    assert back.entity_names == small_tab.entity_names
    rows = (tmp_path / "e.csv").read_text().splitlines()
    assert len(rows) == 1 + small_tab.n_entities + len(small_tab.relation_names)


def test_for_kb_reindexes_by_name(small_kb, small_tab):
    from isc.kg import subgraph
    sub = subgraph(small_kb, [5, 2, 11])
    view = small_tab.for_kb(sub)
    for i, name in enumerate(sub.entity_names):
        assert np.array_equal(view.entity_vecs[i],
                              small_tab.entity_vecs[small_kb.entity_id(name)])


@given(st.integers(0, 2**32 - 1))
def test_margin_loss_gradient(seed):
    rng = np.random.default_rng(seed)
    ent, rel = rng.normal(size=(6, 4)), rng.normal(size=(3, 4))
    pos = np.column_stack([rng.integers(6, size=5), rng.integers(1, 3, size=5), rng.integers(6, size=5)])
    neg = pos.copy()
    neg[:, 2] = rng.integers(6, size=5)
    hinge = 1.0 + np.linalg.norm(ent[pos[:, 0]] + rel[pos[:, 1]] - ent[pos[:, 2]], axis=1) \
        - np.linalg.norm(ent[neg[:, 0]] + rel[neg[:, 1]] - ent[neg[:, 2]], axis=1)
    assume(np.all(np.abs(hinge) > 1e-3))
    loss, g_ent, g_rel = margin_loss_grads(ent, rel, pos, neg, 1.0)
    assert loss == pytest.approx(margin_loss(ent, rel, pos, neg, 1.0).sum())
    assert rel_error(g_ent, numeric_grad(lambda e: margin_loss(e, rel, pos, neg, 1.0).sum(), ent)) < REL_TOL
    assert rel_error(g_rel, numeric_grad(lambda r: margin_loss(ent, r, pos, neg, 1.0).sum(), rel)) < REL_TOL
