"""Translation embeddings (TransE) and queries over them."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .kg import NO_OP, KBError, KnowledgeBase, ReasoningPath, Triple


@dataclass(frozen=True)
class TransEConfig:
    dim: int = 100
    margin: float = 1.0
    lr: float = 0.01
    epochs: int = 100
    negatives: int = 1
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.margin <= 0 or self.lr <= 0:
            raise ValueError("TransE needs dim >= 1, margin > 0 and lr > 0")
        if self.negatives < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("negatives and batch_size must be >= 1, epochs >= 0")


@dataclass
class EmbeddingTable:
    entity_vecs: np.ndarray
    relation_vecs: np.ndarray
    entity_names: tuple[str, ...] = ()
    relation_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.entity_vecs = np.asarray(self.entity_vecs, dtype=np.float64)
        self.relation_vecs = np.asarray(self.relation_vecs, dtype=np.float64)
        if self.entity_vecs.shape[1] != self.relation_vecs.shape[1]:
            raise ValueError("entity and relation vectors disagree on dimension")
        if not self.entity_names:
            self.entity_names = tuple(f"e{i}" for i in range(len(self.entity_vecs)))
        if not self.relation_names:
            self.relation_names = tuple(f"r{i}" for i in range(len(self.relation_vecs)))

    @property
    def dim(self) -> int:
        return self.entity_vecs.shape[1]

    @property
    def n_entities(self) -> int:
        return len(self.entity_vecs)

    def entity(self, e: int) -> np.ndarray:
        if not 0 <= e < self.n_entities:
            raise KBError(f"entity id {e} not in embedding table")
        return self.entity_vecs[e]

    def relation(self, r: int) -> np.ndarray:
        if not 0 <= r < len(self.relation_vecs):
            raise KBError(f"relation id {r} not in embedding table")
        return self.relation_vecs[r]

    def for_kb(self, kb: KnowledgeBase) -> "EmbeddingTable":
        """Re-index rows by name to match ``kb`` (e.g. a partition of the KB it was trained on)."""
        index = {n: i for i, n in enumerate(self.entity_names)}
        rindex = {n: i for i, n in enumerate(self.relation_names)}
        try:
            ents = [index[n] for n in kb.entity_names]
            rels = [rindex[n] for n in kb.relation_names]
        except KeyError as exc:
            raise KBError(f"embedding table has no vector for {exc.args[0]!r}") from None
        return EmbeddingTable(self.entity_vecs[ents], self.relation_vecs[rels],
                              kb.entity_names, kb.relation_names)


def _init_table(kb: KnowledgeBase, dim: int, rng: np.random.Generator) -> EmbeddingTable:
    bound = 6.0 / np.sqrt(dim)
    ent = rng.uniform(-bound, bound, size=(kb.n_entities, dim))
    rel = rng.uniform(-bound, bound, size=(kb.n_relations, dim))
    rel[NO_OP] = 0.0
    ent /= np.linalg.norm(ent, axis=1, keepdims=True)
    return EmbeddingTable(ent, rel, kb.entity_names, kb.relation_names)


def margin_loss(ent: np.ndarray, rel: np.ndarray, pos: np.ndarray, neg: np.ndarray,
                margin: float) -> np.ndarray:
    """Per-pair hinge ``max(0, margin + d(pos) - d(neg))`` with L2 distances."""
    dp = ent[pos[:, 0]] + rel[pos[:, 1]] - ent[pos[:, 2]]
    dn = ent[neg[:, 0]] + rel[neg[:, 1]] - ent[neg[:, 2]]
    return np.maximum(0.0, margin + np.linalg.norm(dp, axis=1) - np.linalg.norm(dn, axis=1))


def margin_loss_grads(ent: np.ndarray, rel: np.ndarray, pos: np.ndarray, neg: np.ndarray,
                      margin: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Summed hinge loss and its gradients w.r.t. the entity and relation tables."""
    dp = ent[pos[:, 0]] + rel[pos[:, 1]] - ent[pos[:, 2]]
    dn = ent[neg[:, 0]] + rel[neg[:, 1]] - ent[neg[:, 2]]
    np_ = np.linalg.norm(dp, axis=1)
    nn_ = np.linalg.norm(dn, axis=1)
    loss = margin + np_ - nn_
    active = loss > 0
    up = np.where(active[:, None], dp / np.maximum(np_, 1e-12)[:, None], 0.0)
    un = np.where(active[:, None], dn / np.maximum(nn_, 1e-12)[:, None], 0.0)
    g_ent = np.zeros_like(ent)
    g_rel = np.zeros_like(rel)
    np.add.at(g_ent, pos[:, 0], up)
    np.add.at(g_ent, pos[:, 2], -up)
    np.add.at(g_rel, pos[:, 1], up)
    np.add.at(g_ent, neg[:, 0], -un)
    np.add.at(g_ent, neg[:, 2], un)
    np.add.at(g_rel, neg[:, 1], -un)
    return float(loss[active].sum()), g_ent, g_rel


def corrupt(triples: np.ndarray, n_entities: int, rng: np.random.Generator) -> np.ndarray:
    """Replace head or tail (probability 1/2 each) with a uniform random entity."""
    neg = triples.copy()
    swap_head = rng.random(len(triples)) < 0.5
    repl = rng.integers(n_entities, size=len(triples))
    neg[swap_head, 0] = repl[swap_head]
    neg[~swap_head, 2] = repl[~swap_head]
    return neg


def train_transe(kb: KnowledgeBase, cfg: TransEConfig = TransEConfig(),
                 on_epoch: Callable[[int, float, EmbeddingTable], None] | None = None) -> EmbeddingTable:
    """Minibatch SGD on the margin ranking loss.

    Entity rows touched by an update are renormalized to unit length right
    after it; the NO_OP relation stays at zero.
    """
    if kb.n_triples == 0:
        raise KBError("cannot train embeddings on a knowledge base without triples")
    rng = np.random.default_rng(cfg.seed)
    tab = _init_table(kb, cfg.dim, rng)
    ent, rel = tab.entity_vecs, tab.relation_vecs
    triples = kb.triples
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(triples))
        total, count = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            pos = np.repeat(triples[order[start:start + cfg.batch_size]], cfg.negatives, axis=0)
            neg = corrupt(pos, kb.n_entities, rng)
            loss, g_ent, g_rel = margin_loss_grads(ent, rel, pos, neg, cfg.margin)
            ent -= cfg.lr * g_ent
            rel -= cfg.lr * g_rel
            rel[NO_OP] = 0.0
            touched = np.unique(np.concatenate([pos[:, 0], pos[:, 2], neg[:, 0], neg[:, 2]]))
            ent[touched] /= np.linalg.norm(ent[touched], axis=1, keepdims=True)
            total += loss
            count += len(pos)
        if on_epoch is not None:
            on_epoch(epoch, total / max(count, 1), tab)
    return tab


def transe_score(tab: EmbeddingTable, t: Triple | Sequence[int]) -> float:
    h, r, tl = (t.head, t.relation, t.tail) if isinstance(t, Triple) else t
    return float(np.linalg.norm(tab.entity(h) + tab.relation(r) - tab.entity(tl)))


def path_embedding(tab: EmbeddingTable, path: ReasoningPath) -> np.ndarray:
    """Sum of relation vectors along the path; entities do not enter."""
    out = np.zeros(tab.dim)
    for r in path.relations:
        out += tab.relation(r)
    return out


def path_embeddings(tab: EmbeddingTable, paths: Sequence[ReasoningPath]) -> np.ndarray:
    if not paths:
        return np.zeros((0, tab.dim))
    rel_idx = np.array([p.relations for p in paths], dtype=np.int64).reshape(len(paths), -1)
    if rel_idx.size and (rel_idx.min() < 0 or rel_idx.max() >= len(tab.relation_vecs)):
        raise KBError("path uses a relation id missing from the embedding table")
    return tab.relation_vecs[rel_idx].sum(axis=1)


def nearest_entities(tab: EmbeddingTable, v, k: int = 1,
                     candidates: np.ndarray | None = None) -> list[tuple[int, float]]:
    """``k`` closest entities to ``v`` by Euclidean distance, ties by id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    v = np.asarray(v, dtype=np.float64)
    ids = np.arange(tab.n_entities) if candidates is None else np.asarray(candidates)
    d = np.linalg.norm(tab.entity_vecs[ids] - v, axis=1)
    k = min(k, len(ids))
    if k < len(ids):
        cut = np.partition(d, k - 1)[k - 1]
        keep = d <= cut
        ids, d = ids[keep], d[keep]
    order = np.lexsort((ids, d))[:k]
    return [(int(ids[i]), float(d[i])) for i in order]


# -- CSV interchange: kind,id,dim,v0..v{d-1} --------------------------------

def save_embeddings(tab: EmbeddingTable, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "id", "dim"] + [f"v{i}" for i in range(tab.dim)])
        for name, vec in zip(tab.entity_names, tab.entity_vecs):
            w.writerow(["entity", name, tab.dim] + [repr(float(x)) for x in vec])
        for name, vec in zip(tab.relation_names, tab.relation_vecs):
            w.writerow(["relation", name, tab.dim] + [repr(float(x)) for x in vec])


def load_embeddings(path: str | Path) -> EmbeddingTable:
    ents, rels, en, rn = [], [], [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            kind, name, dim = row[0], row[1], int(row[2])
            vec = [float(x) for x in row[3:3 + dim]]
            if kind == "entity":
                en.append(name)
                ents.append(vec)
            elif kind == "relation":
                rn.append(name)
                rels.append(vec)
            else:
                raise ValueError(f"unknown row kind {kind!r} in {path}")
    return EmbeddingTable(np.array(ents), np.array(rels), tuple(en), tuple(rn))
