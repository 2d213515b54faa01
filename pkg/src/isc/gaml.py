"""Adversarial imitation of expert reasoning paths.

Each round rolls out paths from expert origins, takes a comparator step on
expert vs generated path embeddings, then takes a REINFORCE step on the
policy with the whole-path return ``Q = log D(p)`` scored by the updated
comparator, plus an entropy bonus.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .comparator import (ComparatorModel, build_comparator, comparator_logit, comparator_loss,
                         comparator_step, log_feature)
from .embedding import EmbeddingTable, path_embeddings
from .kg import KBError, KnowledgeBase, PathSet, ReasoningPath, total_variation
from .policy import (PolicyModel, build_policy, masked_softmax, mixture_distribution, rollouts,
                     state_matrix)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    rounds: int = 50
    episodes: int = 128
    batch_size: int = 32
    comparator_steps: int = 1
    policy_lr: float = 1e-3
    comparator_lr: float = 1e-3
    alpha: float = 0.1
    alpha_decay: bool = True
    hops: int = 2
    hidden: int = 64
    baseline: bool = True
    track_tv: bool = True
    tv_cap: int = 10**6
    checkpoint: str = "best"
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0 or self.episodes < 1 or self.batch_size < 1 or self.hops < 0:
            raise ValueError("rounds >= 0, episodes >= 1, batch_size >= 1 and hops >= 0 required")
        if self.policy_lr < 0 or self.comparator_lr < 0 or self.alpha < 0:
            raise ValueError("learning rates and alpha must be non-negative")
        if self.checkpoint not in ("best", "final"):
            raise ValueError("checkpoint must be 'best' or 'final'")

    def alpha_at(self, round_index: int) -> float:
        if not self.alpha_decay or self.rounds == 0:
            return self.alpha
        return self.alpha * (1.0 - round_index / self.rounds)


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    comp_loss: float
    interp_loss: float
    mean_q: float
    entropy: float
    tv_distance: float | None


@dataclass
class MetricTrace:
    records: list[RoundMetrics] = field(default_factory=list)
    initial_tv: float | None = None
    best_round: int | None = None

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", "comp_loss", "interp_loss", "mean_q", "entropy", "tv_distance"])
            for r in self.records:
                w.writerow([r.round, repr(r.comp_loss), repr(r.interp_loss), repr(r.mean_q),
                            repr(r.entropy), "" if r.tv_distance is None else repr(r.tv_distance)])


# -- policy gradient ------------------------------------------------------

@dataclass
class _Batch:
    states: np.ndarray
    masks: np.ndarray
    actions: np.ndarray
    episode: np.ndarray


def _flatten_episodes(kb: KnowledgeBase, tab: EmbeddingTable, paths: Sequence[ReasoningPath]) -> _Batch:
    cur, org, act, ep = [], [], [], []
    for j, p in enumerate(paths):
        ents = p.entities
        for t, (r, _) in enumerate(p.steps):
            cur.append(ents[t])
            org.append(p.origin)
            act.append(r)
            ep.append(j)
    cur_a = np.array(cur, dtype=np.int64)
    return _Batch(state_matrix(tab, cur_a, np.array(org, dtype=np.int64)),
                  kb.relation_mask[cur_a], np.array(act, dtype=np.int64), np.array(ep, dtype=np.int64))


def _episode_weights(q: np.ndarray, baseline: bool) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    adv = q - q.mean() if baseline else q
    return adv / len(q)


def _entropy_rows(probs: np.ndarray) -> np.ndarray:
    plogp = np.where(probs > 0, probs * np.log(np.where(probs > 0, probs, 1.0)), 0.0)
    return -plogp.sum(axis=1)


def surrogate_objective(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable,
                        paths: Sequence[ReasoningPath], q, alpha: float,
                        baseline: bool = True) -> float:
    """``mean_j adv_j * sum_t log pi(r_t|s_t) + alpha * mean_states H(pi(.|s))``."""
    b = _flatten_episodes(kb, tab, paths)
    if len(b.actions) == 0:
        return 0.0
    probs = masked_softmax(m.net.logits(b.states), b.masks)
    w = _episode_weights(q, baseline)[b.episode]
    logp = np.log(probs[np.arange(len(b.actions)), b.actions])
    return float(np.sum(w * logp) + alpha * _entropy_rows(probs).mean())


def surrogate_grads(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable,
                    paths: Sequence[ReasoningPath], q, alpha: float, baseline: bool = True):
    """Analytic gradient of :func:`surrogate_objective` w.r.t. the policy parameters."""
    b = _flatten_episodes(kb, tab, paths)
    if len(b.actions) == 0:
        return [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in m.net.layers], np.zeros(0)
    _, cache = m.net.forward_cached(b.states)
    probs = masked_softmax(cache.preacts[-1], b.masks)
    w = _episode_weights(q, baseline)[b.episode]
    n = len(b.actions)
    # d log q_a / d z = onehot(a) - q ; d H / d z = -q * (log q + H)
    g = -w[:, None] * probs
    g[np.arange(n), b.actions] += w
    if alpha:
        ent = _entropy_rows(probs)
        logq = np.log(np.where(probs > 0, probs, 1.0))
        g += (alpha / n) * np.where(probs > 0, -probs * (logq + ent[:, None]), 0.0)
    grads, _ = m.net.backward_cached(cache, g, wrt_logits=True)
    return grads, probs


def policy_step(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable, episodes: PathSet,
                alpha: float, lr: float, baseline: bool = True) -> PolicyModel:
    """One gradient-ascent step on the REINFORCE surrogate plus entropy bonus."""
    if len(episodes) == 0:
        raise ValueError("policy_step needs at least one episode")
    if episodes.q_values is None or len(episodes.q_values) != len(episodes):
        raise ValueError("every episode needs a Q value")
    if lr == 0:
        return m.copy()
    grads, _ = surrogate_grads(m, kb, tab, episodes.paths, episodes.q_values, alpha, baseline)
    return PolicyModel(m.net.sgd_step(grads, -lr), m.hop_bound)


def mean_state_entropy(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable,
                       paths: Sequence[ReasoningPath]) -> float:
    b = _flatten_episodes(kb, tab, paths)
    if len(b.actions) == 0:
        return 0.0
    return float(_entropy_rows(masked_softmax(m.net.logits(b.states), b.masks)).mean())


# -- training loop ----------------------------------------------------------

def _map_experts(kbE: KnowledgeBase, kbD: KnowledgeBase, experts: PathSet) -> list[int]:
    if kbE is kbD:
        return experts.origins()
    missing = sorted({kbE.entity_names[o] for o in experts.origins()} - set(kbD.entity_names))
    if missing:
        raise KBError(f"expert origins missing from destination KB: {', '.join(missing)}")
    return [kbD.entity_id(kbE.entity_names[o]) for o in experts.origins()]


def _named(kb: KnowledgeBase, dist: dict[ReasoningPath, float]) -> dict[tuple, float]:
    out: dict[tuple, float] = {}
    for p, pr in dist.items():
        key = (kb.entity_names[p.origin],) + tuple(
            (kb.relation_names[r], kb.entity_names[e]) for r, e in p.steps)
        out[key] = out.get(key, 0.0) + pr
    return out


class _TVTracker:
    def __init__(self, kbE, kbD, tabD, origins, target, cap):
        self.kbD, self.tabD, self.cap = kbD, tabD, cap
        self.origins = origins
        self.same = kbE is kbD
        self.target = target if self.same else _named(kbE, target)
        self.enabled = True

    def __call__(self, m: PolicyModel) -> float | None:
        if not self.enabled:
            return None
        try:
            gen = mixture_distribution(m, self.kbD, self.tabD, self.origins, cap=self.cap)
        except KBError:
            self.enabled = False
            return None
        return total_variation(gen if self.same else _named(self.kbD, gen), self.target)


def train(kbE: KnowledgeBase, kbD: KnowledgeBase, tab: EmbeddingTable, experts: PathSet,
          cfg: TrainConfig = TrainConfig(), *, target: dict | None = None,
          policy: PolicyModel | None = None, comparator: ComparatorModel | None = None,
          ) -> tuple[PolicyModel, ComparatorModel, MetricTrace]:
    """Alternate comparator and policy updates for ``cfg.rounds`` rounds.

    ``target`` is the path distribution TV distance is measured against
    (default: the empirical distribution of ``experts``).
    """
    if len(experts) == 0:
        raise ValueError("training needs at least one expert path")
    origins = _map_experts(kbE, kbD, experts)
    tabE, tabD = tab.for_kb(kbE), tab.for_kb(kbD)
    rng = np.random.default_rng(cfg.seed)
    seeds = rng.integers(2**31, size=2)
    m = policy if policy is not None else build_policy(kbD.n_relations, tab.dim, cfg.hidden,
                                                       cfg.hops, int(seeds[0]))
    c = comparator if comparator is not None else build_comparator(tab.dim, cfg.hidden, int(seeds[1]))
    expert_emb = path_embeddings(tabE, experts.paths)

    trace = MetricTrace()
    tv = _TVTracker(kbE, kbD, tabD, origins,
                    experts.empirical() if target is None else target, cfg.tv_cap)
    tv.enabled = cfg.track_tv
    trace.initial_tv = tv(m)
    best = (np.inf, m, c, None)

    for i in range(cfg.rounds):
        starts = [origins[k] for k in rng.integers(len(origins), size=cfg.episodes)]
        generated = rollouts(m, kbD, tabD, starts, rng)
        gen_emb = path_embeddings(tabD, generated)

        for _ in range(cfg.comparator_steps):
            eb = expert_emb[rng.integers(len(expert_emb), size=cfg.batch_size)]
            gb = gen_emb[rng.integers(len(gen_emb), size=cfg.batch_size)]
            c = comparator_step(c, eb, gb, cfg.comparator_lr)

        q = log_feature(c, gen_emb)
        entropy = mean_state_entropy(m, kbD, tabD, generated)
        episodes = PathSet(generated, "generated", q_values=q)
        m = policy_step(m, kbD, tabD, episodes, cfg.alpha_at(i), cfg.policy_lr, cfg.baseline)

        rec = RoundMetrics(
            round=i + 1,
            comp_loss=comparator_loss(c, expert_emb, gen_emb),
            interp_loss=_log_one_minus(c, gen_emb),
            mean_q=float(q.mean()),
            entropy=entropy,
            tv_distance=tv(m),
        )
        trace.records.append(rec)
        score = rec.tv_distance if rec.tv_distance is not None else rec.interp_loss
        if score < best[0]:
            best = (score, m, c, rec.round)

    if cfg.checkpoint == "best" and best[3] is not None:
        trace.best_round = best[3]
        return best[1], best[2], trace
    trace.best_round = len(trace.records) or None
    return m, c, trace


def _log_one_minus(c: ComparatorModel, emb: np.ndarray) -> float:
    """Mean ``log(1 - D(p))`` over generated embeddings."""
    u = comparator_logit(c, emb)
    return float(np.mean(-np.logaddexp(0.0, u)))


def evaluate_accuracy(m: PolicyModel, kb: KnowledgeBase, tab: EmbeddingTable, test: PathSet,
                      samples_per_origin: int = 1, seed: int = 0) -> float:
    """Fraction of test paths whose terminal entity is hit by some rollout from its origin."""
    if len(test) == 0:
        raise ValueError("test set is empty")
    if samples_per_origin < 1:
        raise ValueError("samples_per_origin must be >= 1")
    rng = np.random.default_rng(seed)
    origins = np.repeat(test.origins(), samples_per_origin)
    paths = rollouts(m, kb, tab, origins, rng)
    terms = np.array([p.terminal for p in paths]).reshape(len(test), samples_per_origin)
    want = np.array([p.terminal for p in test])[:, None]
    return float(np.mean((terms == want).any(axis=1)))
