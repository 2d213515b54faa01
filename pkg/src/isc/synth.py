"""Seeded synthetic knowledge bases for desk-scale runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kg import KBError, KnowledgeBase


@dataclass(frozen=True)
class SynthConfig:
    entities: int = 500
    relations: int = 8
    density: float = 4.0
    seed: int = 0
    allow_self_loops: bool = False

    def __post_init__(self):
        if self.entities < 1 or self.relations < 1:
            raise KBError("entity and relation counts must be >= 1")
        if self.density <= 0:
            raise KBError("density must be positive")


def generate(cfg: SynthConfig) -> KnowledgeBase:
    """Uniform random triples with duplicate rejection.

    Yields exactly ``round(density * entities)`` distinct triples.
    """
    n_e, n_r = cfg.entities, cfg.relations
    target = int(round(cfg.density * n_e))
    per_pair = n_e * n_e if cfg.allow_self_loops else n_e * (n_e - 1)
    if target > per_pair * n_r:
        raise KBError(f"density {cfg.density} infeasible for {n_e} entities and {n_r} relations")
    rng = np.random.default_rng(cfg.seed)
    seen: set[tuple[int, int, int]] = set()
    rows: list[tuple[int, int, int]] = []
    while len(rows) < target:
        batch = max(16, 2 * (target - len(rows)))
        hs = rng.integers(n_e, size=batch)
        rs = rng.integers(1, n_r + 1, size=batch)
        ts = rng.integers(n_e, size=batch)
        for h, r, t in zip(hs.tolist(), rs.tolist(), ts.tolist()):
            if h == t and not cfg.allow_self_loops:
                continue
            if (h, r, t) in seen:
                continue
            seen.add((h, r, t))
            rows.append((h, r, t))
            if len(rows) == target:
                break
    entity_names = [f"e{i}" for i in range(n_e)]
    relation_names = ["NO_OP"] + [f"r{j}" for j in range(1, n_r + 1)]
    return KnowledgeBase(entity_names, relation_names, rows)
