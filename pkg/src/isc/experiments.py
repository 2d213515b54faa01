"""Desk-scale experiment presets shared by the command line and the test suite.

Three setups are provided:

* a hand-built toy KB small enough to enumerate every 2-hop walk, used for
  distribution matching and the expert-count sweep;
* a 500-entity synthetic KB for the packet error rate sweep;
* five 200-entity sub-graphs cut from a denser synthetic KB, on which the
  policy is compared against the genetic baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .baselines import GAConfig, ga_accuracy
from .channel import ChannelConfig, SweepRow, per_sweep
from .comparator import ComparatorModel
from .embedding import EmbeddingTable, TransEConfig, train_transe
from .gaml import MetricTrace, TrainConfig, evaluate_accuracy, train
from .kg import KnowledgeBase, expert_distribution, parse_triples, partition_skgs, sample_expert_paths
from .policy import PolicyModel
from .synth import SynthConfig, generate

TOY_TRIPLES = (
    ("root", "R1", "a"),
    ("root", "R2", "b"),
    ("root", "R3", "c"),
    ("a", "R1", "l1"),
    ("a", "R2", "l2"),
    ("a", "R3", "l5"),
    ("b", "R3", "l3"),
    ("b", "R4", "l4"),
    ("b", "R2", "l5"),
    ("c", "R4", "l6"),
)

TOY_EMBED = TransEConfig(dim=16, epochs=200)
TOY_TRAIN = TrainConfig(rounds=500, episodes=64, batch_size=64, policy_lr=0.1,
                        comparator_lr=0.1, alpha=0.05)

DESK_EMBED = TransEConfig(dim=100, epochs=100)
DESK_TRAIN = TrainConfig(rounds=50, episodes=128, batch_size=64, policy_lr=0.5,
                         comparator_lr=0.1, alpha=0.05)

CHANNEL_KB = SynthConfig(entities=500, relations=8, density=4.0)
SKG_PARENT = SynthConfig(entities=1000, relations=8, density=10.0)
N_SKGS = 5
MIDPOINT_SNR_DB = 5.0
EVAL_SAMPLES = 5


def toy_kb() -> KnowledgeBase:
    return parse_triples("\t".join(t) for t in TOY_TRIPLES)


def toy_embeddings(kb: KnowledgeBase | None = None, seed: int = 0) -> EmbeddingTable:
    return train_transe(kb or toy_kb(), replace(TOY_EMBED, seed=seed))


@dataclass(frozen=True)
class MatchRun:
    seed: int
    experts: int
    initial_tv: float
    best_tv: float
    final_tv: float
    best_round: int | None
    trace: MetricTrace


def distribution_matching(seed: int, n_experts: int = 128, rounds: int | None = None,
                          target: str = "empirical", checkpoint: str = "best",
                          kb: KnowledgeBase | None = None,
                          tab: EmbeddingTable | None = None) -> MatchRun:
    """Train on the toy KB and report TV distance against the expert distribution.

    ``target="empirical"`` measures against the sampled expert paths,
    ``target="population"`` against the exact distribution of the sampler.
    """
    kb = kb or toy_kb()
    tab = tab or toy_embeddings(kb)
    experts = sample_expert_paths(kb, n_experts, 2, seed=seed)
    if target == "empirical":
        ref = None
    elif target == "population":
        ref = expert_distribution(kb, 2)
    else:
        raise ValueError(f"unknown TV target {target!r}")
    cfg = replace(TOY_TRAIN, seed=seed, checkpoint=checkpoint,
                  rounds=TOY_TRAIN.rounds if rounds is None else rounds)
    _, _, trace = train(kb, kb, tab, experts, cfg, target=ref)
    tv = trace.column("tv_distance")
    best = float(tv.min()) if len(tv) else trace.initial_tv
    final = float(tv[-1]) if len(tv) else trace.initial_tv
    return MatchRun(seed, n_experts, trace.initial_tv, best, final, trace.best_round, trace)


def expert_count_sweep(counts: Sequence[int], seeds: Sequence[int],
                       rounds: int | None = None) -> dict[int, list[MatchRun]]:
    """Final-round TV against the sampler's distribution for each expert count."""
    kb = toy_kb()
    tab = toy_embeddings(kb)
    return {n: [distribution_matching(s, n, rounds, "population", "final", kb, tab) for s in seeds]
            for n in counts}


# -- packet error rate -------------------------------------------------------

@dataclass
class ChannelSetup:
    kb: KnowledgeBase
    tab: EmbeddingTable
    policy: PolicyModel
    comparator: ComparatorModel


def channel_setup(seed: int = 0, n_experts: int = 256) -> ChannelSetup:
    kb = generate(replace(CHANNEL_KB, seed=seed))
    tab = train_transe(kb, replace(DESK_EMBED, seed=seed))
    experts = sample_expert_paths(kb, n_experts, 2, seed=seed)
    cfg = replace(DESK_TRAIN, seed=seed, track_tv=False, checkpoint="final")
    m, c, _ = train(kb, kb, tab, experts, cfg)
    return ChannelSetup(kb, tab, m, c)


def skg_per(setup: ChannelSetup, snr_db: float, packets: int, k: int = N_SKGS,
            seed: int = 0, strategy: str = "degree") -> list[tuple[float, SweepRow]]:
    """Reasoning-mode PER at one SNR on each sub-graph, densest first."""
    cfg = ChannelConfig(snr_db=(snr_db,), packets=packets, modes=("reasoning",), seed=seed)
    return [(skg.density, per_sweep(cfg, skg, setup.tab, setup.policy)[0])
            for skg in partition_skgs(setup.kb, k, seed=seed, strategy=strategy)]


# -- policy versus genetic baseline ------------------------------------------

def skg_suite(seed: int = 0, k: int = N_SKGS) -> list[KnowledgeBase]:
    return partition_skgs(generate(replace(SKG_PARENT, seed=seed)), k, seed=seed)


@dataclass(frozen=True)
class Comparison:
    density: float
    gaml: float
    ga: float
    gaml_single: float
    trace: MetricTrace


def compare_on_skg(kb: KnowledgeBase, seed: int, n_train: int = 256, n_test: int = 100,
                   samples: int = EVAL_SAMPLES, train_cfg: TrainConfig = DESK_TRAIN,
                   ga_cfg: GAConfig = GAConfig()) -> Comparison:
    """Train on one sub-graph and score both reasoners on held-out expert paths."""
    tab = train_transe(kb, replace(DESK_EMBED, seed=seed))
    experts = sample_expert_paths(kb, n_train, 2, seed=seed)
    test = sample_expert_paths(kb, n_test, 2, seed=10_000 + seed)
    m, c, trace = train(kb, kb, tab, experts, replace(train_cfg, seed=seed))
    gaml = evaluate_accuracy(m, kb, tab, test, samples, seed=seed)
    single = gaml if samples == 1 else evaluate_accuracy(m, kb, tab, test, 1, seed=seed)
    ga = ga_accuracy(kb, tab, c, test, 2, replace(ga_cfg, seed=seed))
    return Comparison(kb.density, gaml, ga, single, trace)


def mean_accuracy(runs: Sequence[Comparison]) -> tuple[float, float]:
    return float(np.mean([r.gaml for r in runs])), float(np.mean([r.ga for r in runs]))
