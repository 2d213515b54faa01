"""Genetic-algorithm path reasoner used as the comparison baseline.

A chromosome is a length-``L`` sequence of relation ids. It is decoded from
the origin step by step: a relation that is unusable at the current entity
is repaired to the usable relation with the nearest id (cyclically), and
among several tails the one with the best TransE score is taken. Fitness
is the comparator score of the decoded path embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comparator import ComparatorModel, feature
from .embedding import EmbeddingTable, path_embedding
from .kg import NO_OP, KBError, KnowledgeBase, ReasoningPath


@dataclass(frozen=True)
class GAConfig:
    population: int = 100
    generations: int = 50
    crossover: float = 0.8
    mutation: float = 0.05
    tournament: int = 3
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.crossover <= 1 and 0 <= self.mutation <= 1):
            raise ValueError("crossover and mutation rates must lie in [0, 1]")
        if min(self.population, self.tournament) < 1 or self.generations < 0:
            raise ValueError("population and tournament size must be >= 1")
        if not 0 <= self.elitism <= self.population:
            raise ValueError("elitism must be between 0 and the population size")


def repair(valid: tuple[int, ...], gene: int, n_relations: int) -> int:
    if gene in valid:
        return gene
    return min(valid, key=lambda v: (min(abs(gene - v), n_relations - abs(gene - v)), v))


def decode(kb: KnowledgeBase, tab: EmbeddingTable, e0: int, genes) -> ReasoningPath:
    path = ReasoningPath(e0)
    cur = e0
    for g in genes:
        r = repair(kb.valid_relations(cur), int(g), kb.n_relations)
        if r == NO_OP:
            nxt = cur
        else:
            tails = kb.tails(cur, r)
            if len(tails) == 1:
                nxt = tails[0]
            else:
                scores = np.linalg.norm(tab.entity_vecs[cur] + tab.relation_vecs[r]
                                        - tab.entity_vecs[list(tails)], axis=1)
                nxt = tails[int(np.argmin(scores))]
        path = path.extend(r, nxt)
        cur = nxt
    return path


@dataclass
class GAResult:
    path: ReasoningPath
    fitness: float
    best_per_generation: list[float] = field(default_factory=list)
    initial_fitness: list[float] = field(default_factory=list)


class _Evaluator:
    def __init__(self, kb, tab, c, e0):
        self.kb, self.tab, self.c, self.e0 = kb, tab, c, e0
        self.cache: dict[tuple[int, ...], tuple[ReasoningPath, float]] = {}

    def __call__(self, genes) -> tuple[ReasoningPath, float]:
        key = tuple(int(g) for g in genes)
        if key not in self.cache:
            p = decode(self.kb, self.tab, self.e0, key)
            self.cache[key] = (p, feature(self.c, path_embedding(self.tab, p)))
        return self.cache[key]


def ga_search(kb: KnowledgeBase, tab: EmbeddingTable, c: ComparatorModel, e0: int, L: int,
              cfg: GAConfig = GAConfig()) -> GAResult:
    if not 0 <= e0 < kb.n_entities:
        raise KBError(f"unknown entity id {e0}")
    if tab.n_entities != kb.n_entities:
        tab = tab.for_kb(kb)
    rng = np.random.default_rng([cfg.seed, e0])
    evaluate = _Evaluator(kb, tab, c, e0)
    n_rel = kb.n_relations
    pop = rng.integers(n_rel, size=(cfg.population, L))
    fit = np.array([evaluate(g)[1] for g in pop])
    result = GAResult(ReasoningPath(e0), -np.inf, initial_fitness=fit.tolist())

    def best_of(pop, fit):
        i = int(np.argmax(fit))
        return pop[i].copy(), fit[i]

    best_genes, best_fit = best_of(pop, fit)
    result.best_per_generation.append(float(best_fit))
    for _ in range(cfg.generations):
        elite = np.argsort(-fit, kind="stable")[:cfg.elitism]
        children = [pop[i].copy() for i in elite]
        while len(children) < cfg.population:
            parents = []
            for _ in range(2):
                contenders = rng.integers(cfg.population, size=cfg.tournament)
                parents.append(pop[contenders[np.argmax(fit[contenders])]])
            a, b = parents[0].copy(), parents[1].copy()
            if L > 1 and rng.random() < cfg.crossover:
                cut = int(rng.integers(1, L))
                a[cut:], b[cut:] = parents[1][cut:], parents[0][cut:]
            for child in (a, b):
                flip = rng.random(L) < cfg.mutation
                child[flip] = rng.integers(n_rel, size=int(flip.sum()))
                if len(children) < cfg.population:
                    children.append(child)
        pop = np.array(children).reshape(cfg.population, L)
        fit = np.array([evaluate(g)[1] for g in pop])
        g, f = best_of(pop, fit)
        if f > best_fit:
            best_genes, best_fit = g, f
        result.best_per_generation.append(float(best_fit))
    result.path, result.fitness = evaluate(best_genes)
    return result


def ga_reason(kb: KnowledgeBase, tab: EmbeddingTable, c: ComparatorModel, e0: int, L: int,
              cfg: GAConfig = GAConfig()) -> ReasoningPath:
    """Fittest decoded path found by the genetic search from ``e0``."""
    return ga_search(kb, tab, c, e0, L, cfg).path


def ga_accuracy(kb: KnowledgeBase, tab: EmbeddingTable, c: ComparatorModel, test, L: int,
                cfg: GAConfig = GAConfig()) -> float:
    """Fraction of test paths whose terminal entity the GA path reaches."""
    if len(test) == 0:
        raise ValueError("test set is empty")
    found: dict[int, int] = {}
    hits = 0
    for p in test:
        if p.origin not in found:
            found[p.origin] = ga_reason(kb, tab, c, p.origin, L, cfg).terminal
        hits += found[p.origin] == p.terminal
    return hits / len(test)
