"""Destination-side reasoner: a relation policy over states ``(e_t, e_0)``.

The network emits a softmax over every relation id (``NO_OP`` included).
Relations with no edge at the current entity are masked out and the rest
renormalized; the tail for a chosen relation is drawn uniformly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embedding import EmbeddingTable
from .kg import NO_OP, KBError, KnowledgeBase, ReasoningPath
from .neural import DenseNet

DEFAULT_CAP = 10**6


@dataclass
class PolicyModel:
    net: DenseNet
    hop_bound: int = 2

    def copy(self) -> "PolicyModel":
        return PolicyModel(self.net.copy(), self.hop_bound)


@dataclass(frozen=True)
class ReasonerState:
    current: int
    origin: int
    state_vec: np.ndarray


def build_policy(n_relations: int, dim: int, hidden: int = 64, hop_bound: int = 2,
                 seed: int | None = 0) -> PolicyModel:
    """Two ReLU hidden layers and a softmax head; ``seed=None`` gives all-zero weights."""
    rng = None if seed is None else np.random.default_rng(seed)
    net = DenseNet.build([2 * dim, hidden, hidden, n_relations],
                         ["relu", "relu", "softmax"], rng)
    return PolicyModel(net, hop_bound)


def make_state(tab: EmbeddingTable, current: int, origin: int) -> ReasonerState:
    vec = np.concatenate([tab.entity(current), tab.entity(origin)])
    return ReasonerState(current, origin, vec)


def state_matrix(tab: EmbeddingTable, current: np.ndarray, origin: np.ndarray) -> np.ndarray:
    return np.hstack([tab.entity_vecs[current], tab.entity_vecs[origin]])


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax restricted to ``mask``; equal to softmax-then-renormalize."""
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    ez = np.where(mask, np.exp(z), 0.0)
    return ez / ez.sum(axis=-1, keepdims=True)


def _check_width(m: PolicyModel, kb: KnowledgeBase) -> None:
    if m.net.output_width != kb.n_relations:
        raise KBError(f"policy emits {m.net.output_width} relations but the KB has {kb.n_relations}")


def action_distributions(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable,
                         current: np.ndarray, origin: np.ndarray) -> np.ndarray:
    _check_width(m, kb)
    current = np.asarray(current, dtype=np.int64)
    origin = np.asarray(origin, dtype=np.int64)
    logits = m.net.logits(state_matrix(tab, current, origin))
    return masked_softmax(logits, kb.relation_mask[current])


def action_distribution(m: PolicyModel, s: ReasonerState, kb: KnowledgeBase) -> np.ndarray:
    _check_width(m, kb)
    mask = kb.relation_mask[s.current]
    if not mask.any():
        raise KBError(f"no valid relation at entity {s.current}")
    return masked_softmax(m.net.logits(s.state_vec), mask)


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))[:, None] * cum[:, -1:]
    idx = (cum <= u).sum(axis=1)
    # guard against landing on a trailing zero-probability column
    idx = np.minimum(idx, probs.shape[1] - 1)
    bad = probs[np.arange(len(idx)), idx] == 0
    if bad.any():
        for i in np.flatnonzero(bad):
            idx[i] = np.flatnonzero(probs[i])[-1]
    return idx


def rollouts(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable,
             origins: Sequence[int], rng: np.random.Generator) -> list[ReasoningPath]:
    """One rollout per origin, sampled as a batch."""
    origins = np.asarray(origins, dtype=np.int64)
    if origins.size and (origins.min() < 0 or origins.max() >= kb.n_entities):
        raise KBError("rollout origin not in knowledge base")
    steps: list[list[tuple[int, int]]] = [[] for _ in range(len(origins))]
    cur = origins.copy()
    for _ in range(m.hop_bound):
        probs = action_distributions(m, kb, tab, cur, origins)
        rels = _sample_rows(probs, rng)
        nxt = cur.copy()
        for i, (e, r) in enumerate(zip(cur.tolist(), rels.tolist())):
            if r != NO_OP:
                tails = kb.tails(e, r)
                nxt[i] = tails[rng.integers(len(tails))] if len(tails) > 1 else tails[0]
            steps[i].append((r, int(nxt[i])))
        cur = nxt
    return [ReasoningPath(int(o), tuple(s)) for o, s in zip(origins, steps)]


def rollout(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable, e0: int,
            seed: int | np.random.Generator = 0) -> ReasoningPath:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rollouts(m, kb, tab, [e0], rng)[0]


def path_log_prob(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable,
                  path: ReasoningPath) -> float:
    """Log-probability of ``path`` under relation choice and uniform tails."""
    if not kb.is_valid_path(path):
        raise KBError(f"path {path} is not a walk in the knowledge base")
    if not path.steps:
        return 0.0
    ents = path.entities
    probs = action_distributions(m, kb, tab, np.array(ents[:-1]), np.full(path.hops, path.origin))
    total = 0.0
    for t, (r, _) in enumerate(path.steps):
        total += np.log(probs[t, r])
        if r != NO_OP:
            total -= np.log(len(kb.tails(ents[t], r)))
    return float(total)


def enumerate_distribution(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable,
                           e0: int, L: int | None = None,
                           cap: int = DEFAULT_CAP) -> dict[ReasoningPath, float]:
    """Exact distribution over all length-``L`` walks from ``e0``."""
    L = m.hop_bound if L is None else L
    if not 0 <= e0 < kb.n_entities:
        raise KBError(f"unknown entity id {e0}")
    frontier: list[tuple[ReasoningPath, float]] = [(ReasoningPath(e0), 1.0)]
    for _ in range(L):
        cur = np.array([p.terminal for p, _ in frontier], dtype=np.int64)
        probs = action_distributions(m, kb, tab, cur, np.full(len(cur), e0))
        nxt = []
        for (path, pr), row, e in zip(frontier, probs, cur.tolist()):
            for r in np.flatnonzero(row).tolist():
                tails = kb.tails(e, r)
                share = pr * row[r] / len(tails)
                nxt.extend((path.extend(r, t), share) for t in tails)
            if len(nxt) > cap:
                raise KBError(f"more than {cap} walks from entity {e0}; sample rollouts instead")
        frontier = nxt
    out: dict[ReasoningPath, float] = {}
    for p, pr in frontier:
        out[p] = out.get(p, 0.0) + pr
    return out


def mixture_distribution(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable,
                         origins: Iterable[int] | Mapping[int, float],
                         cap: int = DEFAULT_CAP) -> dict[ReasoningPath, float]:
    """Generated-path distribution when origins are drawn with the given weights."""
    weights = origins if isinstance(origins, Mapping) else Counter(origins)
    total = float(sum(weights.values()))
    out: dict[ReasoningPath, float] = {}
    for o in sorted(weights):
        w = weights[o] / total
        for p, pr in enumerate_distribution(m, kb, tab, o, cap=cap).items():
            out[p] = out.get(p, 0.0) + w * pr
    return out


def terminal_mass(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable, e0: int,
                  cap: int = DEFAULT_CAP) -> dict[int, float]:
    """Probability that a rollout from ``e0`` ends at each entity."""
    out: dict[int, float] = {}
    for p, pr in enumerate_distribution(m, kb, tab, e0, cap=cap).items():
        out[p.terminal] = out.get(p.terminal, 0.0) + pr
    return out
