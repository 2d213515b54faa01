"""Knowledge bases: loading, indexing, partitioning and expert path sampling.

Entities and relations are addressed by dense integer ids. Relation id 0 is
the reserved ``NO_OP`` self-loop, available at every entity but never stored
as a triple.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

NO_OP = 0
NO_OP_NAME = "NO_OP"


class KBError(ValueError):
    """Raised for malformed knowledge-base input or invalid queries."""


@dataclass(frozen=True)
class Triple:
    head: int
    relation: int
    tail: int


@dataclass(frozen=True)
class ReasoningPath:
    """A walk ``origin, r1, e1, ..., rL, eL`` stored as (relation, entity) steps."""

    origin: int
    steps: tuple[tuple[int, int], ...] = ()

    @property
    def hops(self) -> int:
        return len(self.steps)

    @property
    def relations(self) -> tuple[int, ...]:
        return tuple(r for r, _ in self.steps)

    @property
    def entities(self) -> tuple[int, ...]:
        return (self.origin,) + tuple(e for _, e in self.steps)

    @property
    def terminal(self) -> int:
        return self.steps[-1][1] if self.steps else self.origin

    def extend(self, relation: int, entity: int) -> "ReasoningPath":
        return ReasoningPath(self.origin, self.steps + ((relation, entity),))


@dataclass
class PathSet:
    paths: list[ReasoningPath]
    source: str = "expert"
    q_values: np.ndarray | None = None

    def __post_init__(self):
        if self.source not in ("expert", "generated"):
            raise KBError(f"unknown path-set source {self.source!r}")
        hops = {p.hops for p in self.paths}
        if len(hops) > 1:
            raise KBError(f"paths disagree on hop bound: {sorted(hops)}")

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self) -> Iterator[ReasoningPath]:
        return iter(self.paths)

    @property
    def hops(self) -> int:
        return self.paths[0].hops if self.paths else 0

    def origins(self) -> list[int]:
        return [p.origin for p in self.paths]

    def empirical(self) -> dict[ReasoningPath, float]:
        n = len(self.paths)
        return {p: c / n for p, c in Counter(self.paths).items()}


class KnowledgeBase:
    """Immutable set of directed labeled triples over named entities.

    ``relation_names[0]`` is always ``NO_OP``. Triples keep insertion order,
    duplicates removed.
    """

    def __init__(self, entity_names: Sequence[str], relation_names: Sequence[str],
                 triples: Iterable[tuple[int, int, int]]):
        self.entity_names: tuple[str, ...] = tuple(entity_names)
        rel = tuple(relation_names)
        if not rel or rel[0] != NO_OP_NAME:
            rel = (NO_OP_NAME,) + tuple(r for r in rel if r != NO_OP_NAME)
        self.relation_names: tuple[str, ...] = rel
        if len(set(self.entity_names)) != len(self.entity_names):
            raise KBError("duplicate entity names")

        n_e, n_r = len(self.entity_names), len(self.relation_names)
        seen: set[tuple[int, int, int]] = set()
        rows = []
        for h, r, t in triples:
            h, r, t = int(h), int(r), int(t)
            if not (0 <= h < n_e and 0 <= t < n_e):
                raise KBError(f"triple ({h}, {r}, {t}) references unknown entity")
            if not (0 < r < n_r):
                raise KBError(f"triple ({h}, {r}, {t}) uses unknown or reserved relation")
            if (h, r, t) not in seen:
                seen.add((h, r, t))
                rows.append((h, r, t))
        self.triples = np.array(rows, dtype=np.int64).reshape(-1, 3)
        self.triples.setflags(write=False)
        self._triple_set = frozenset(seen)

        adj: list[list[tuple[int, int]]] = [[] for _ in range(n_e)]
        for h, r, t in rows:
            adj[h].append((r, t))
        self._adjacency = tuple(tuple(sorted(a)) for a in adj)
        tails: dict[tuple[int, int], list[int]] = {}
        for h, r, t in rows:
            tails.setdefault((h, r), []).append(t)
        self._tails = {k: tuple(sorted(v)) for k, v in tails.items()}
        self._mask: np.ndarray | None = None
        self._name_index = {n: i for i, n in enumerate(self.entity_names)}

    # -- sizes -----------------------------------------------------------
    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        """Relation count including ``NO_OP``."""
        return len(self.relation_names)

    @property
    def n_triples(self) -> int:
        return len(self.triples)

    @property
    def density(self) -> float:
        return self.n_triples / self.n_entities if self.n_entities else 0.0

    @property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        return self._adjacency

    def entity_id(self, name: str) -> int:
        try:
            return self._name_index[name]
        except KeyError:
            raise KBError(f"unknown entity {name!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self.relation_names.index(name)
        except ValueError:
            raise KBError(f"unknown relation {name!r}") from None

    def has_triple(self, h: int, r: int, t: int) -> bool:
        return (h, r, t) in self._triple_set

    def has_step(self, e: int, r: int, t: int) -> bool:
        """Edge check that also admits the implicit NO_OP self-loop."""
        if r == NO_OP:
            return e == t
        return (e, r, t) in self._triple_set

    def _check_entity(self, e: int) -> None:
        if not 0 <= e < self.n_entities:
            raise KBError(f"unknown entity id {e}")

    def tails(self, e: int, r: int) -> tuple[int, ...]:
        self._check_entity(e)
        if r == NO_OP:
            return (e,)
        return self._tails.get((e, r), ())

    def valid_relations(self, e: int) -> tuple[int, ...]:
        self._check_entity(e)
        return (NO_OP,) + tuple(sorted({r for r, _ in self._adjacency[e]}))

    @property
    def relation_mask(self) -> np.ndarray:
        """Boolean (entities, relations) table of usable actions."""
        if self._mask is None:
            mask = np.zeros((self.n_entities, self.n_relations), dtype=bool)
            mask[:, NO_OP] = True
            if self.n_triples:
                mask[self.triples[:, 0], self.triples[:, 1]] = True
            mask.setflags(write=False)
            self._mask = mask
        return self._mask

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.triples[:, 0], minlength=self.n_entities) if self.n_triples \
            else np.zeros(self.n_entities, dtype=np.int64)

    def is_valid_path(self, path: ReasoningPath) -> bool:
        if not 0 <= path.origin < self.n_entities:
            return False
        cur = path.origin
        for r, e in path.steps:
            if not self.has_step(cur, r, e):
                return False
            cur = e
        return True

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return (self.entity_names == other.entity_names
                and self.relation_names == other.relation_names
                and np.array_equal(self.triples, other.triples))

    def __repr__(self) -> str:
        return (f"KnowledgeBase(entities={self.n_entities}, relations={self.n_relations - 1}+NO_OP, "
                f"triples={self.n_triples})")


def outgoing(kb: KnowledgeBase, e: int) -> list[tuple[int, int]]:
    """Actions available at ``e``: its adjacency plus ``(NO_OP, e)``, sorted."""
    kb._check_entity(e)
    return sorted(((NO_OP, e),) + kb.adjacency[e])


# -- file formats --------------------------------------------------------

def parse_triples(lines: Iterable[str], source: str = "<input>") -> KnowledgeBase:
    entities: dict[str, int] = {}
    relations: dict[str, int] = {NO_OP_NAME: NO_OP}
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not all(p.strip() for p in parts):
            raise KBError(f"{source}:{lineno}: expected head<TAB>relation<TAB>tail, got {line!r}")
        h, r, t = (p.strip() for p in parts)
        if r == NO_OP_NAME:
            raise KBError(f"{source}:{lineno}: relation name {NO_OP_NAME!r} is reserved")
        for name in (h, t):
            entities.setdefault(name, len(entities))
        relations.setdefault(r, len(relations))
        rows.append((entities[h], relations[r], entities[t]))
    if not rows:
        raise KBError(f"{source}: no triples found")
    return KnowledgeBase(list(entities), list(relations), rows)


def load_triples(path: str | Path) -> KnowledgeBase:
    path = Path(path)
    if not path.is_file():
        raise KBError(f"triple file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return parse_triples(fh, source=str(path))


def write_triples(kb: KnowledgeBase, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for h, r, t in kb.triples:
            fh.write(f"{kb.entity_names[h]}\t{kb.relation_names[r]}\t{kb.entity_names[t]}\n")


def write_paths(kb: KnowledgeBase, paths: Iterable[ReasoningPath], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for p in paths:
            fields = [kb.entity_names[p.origin]]
            for r, e in p.steps:
                fields += [kb.relation_names[r], kb.entity_names[e]]
            fh.write("\t".join(fields) + "\n")


def read_paths(kb: KnowledgeBase, path: str | Path, source: str = "expert") -> PathSet:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) % 2 != 1:
                raise KBError(f"{path}:{lineno}: path line needs an odd number of fields")
            p = ReasoningPath(kb.entity_id(fields[0]))
            for rname, ename in zip(fields[1::2], fields[2::2]):
                p = p.extend(kb.relation_id(rname), kb.entity_id(ename))
            if not kb.is_valid_path(p):
                raise KBError(f"{path}:{lineno}: path is not a walk in the knowledge base")
            out.append(p)
    return PathSet(out, source)


# -- partitioning --------------------------------------------------------

def subgraph(kb: KnowledgeBase, entity_ids: Sequence[int]) -> KnowledgeBase:
    """Induced sub-KB over ``entity_ids`` (kept in ascending id order).

    Relation ids are preserved so policies and embeddings stay compatible.
    """
    keep = sorted(set(int(e) for e in entity_ids))
    remap = {e: i for i, e in enumerate(keep)}
    rows = [(remap[h], r, remap[t]) for h, r, t in kb.triples
            if h in remap and t in remap]
    return KnowledgeBase([kb.entity_names[e] for e in keep], kb.relation_names, rows)


def partition_skgs(kb: KnowledgeBase, k: int, seed: int = 0,
                   strategy: str = "shuffle") -> list[KnowledgeBase]:
    """Split ``kb`` into ``k`` disjoint sub-KBs ordered by descending density.

    ``strategy="shuffle"`` cuts a seeded permutation of the entities into equal
    blocks (the last block absorbs any remainder). ``strategy="degree"`` cuts
    the entities sorted by total degree instead, which spreads the densities.
    """
    if k < 1:
        raise KBError("k must be >= 1")
    if k > kb.n_entities:
        raise KBError(f"cannot cut {kb.n_entities} entities into {k} partitions")
    ids = np.arange(kb.n_entities)
    if strategy == "shuffle":
        order = np.random.default_rng(seed).permutation(ids)
    elif strategy == "degree":
        deg = np.zeros(kb.n_entities, dtype=np.int64)
        if kb.n_triples:
            np.add.at(deg, kb.triples[:, 0], 1)
            np.add.at(deg, kb.triples[:, 2], 1)
        order = np.lexsort((ids, -deg))
    else:
        raise KBError(f"unknown partition strategy {strategy!r}")
    size = kb.n_entities // k
    blocks = [order[i * size:(i + 1) * size] for i in range(k - 1)]
    blocks.append(order[(k - 1) * size:])
    parts = [subgraph(kb, b) for b in blocks]
    ranked = sorted(range(k), key=lambda i: -parts[i].density)
    return [parts[i] for i in ranked]


# -- expert sampling -----------------------------------------------------

def _walk_capable(kb: KnowledgeBase, hops: int) -> np.ndarray:
    """``cap[k][e]``: ``e`` starts a walk of exactly ``k`` real hops."""
    cap = [np.ones(kb.n_entities, dtype=bool)]
    h, t = kb.triples[:, 0], kb.triples[:, 2]
    for _ in range(hops):
        nxt = np.zeros(kb.n_entities, dtype=bool)
        nxt[h[cap[-1][t]]] = True
        cap.append(nxt)
    return np.array(cap)


def _reach_exact(kb: KnowledgeBase, start: int, hops: int) -> list[set[int]]:
    levels = [{start}]
    for _ in range(hops):
        levels.append({t for e in levels[-1] for _, t in kb.adjacency[e]})
    return levels


class _ReverseIndex:
    def __init__(self, kb: KnowledgeBase):
        self.incoming: list[list[int]] = [[] for _ in range(kb.n_entities)]
        for h, _, t in kb.triples:
            self.incoming[t].append(int(h))

    def levels(self, end: int, hops: int) -> list[set[int]]:
        levels = [{end}]
        for _ in range(hops):
            levels.append({h for e in levels[-1] for h in self.incoming[e]})
        return levels


def _half_choices(kb: KnowledgeBase, x: int, target: int, remaining: int,
                  back: list[set[int]]) -> list[tuple[int, int]]:
    """Edges out of ``x`` that keep ``target`` reachable in ``remaining - 1`` hops."""
    ok = back[remaining - 1]
    return [(r, t) for r, t in kb.adjacency[x] if t in ok]


def sample_expert_paths(kb: KnowledgeBase, n: int, hops: int, seed: int = 0) -> PathSet:
    """Sample ``n`` expert walks of exactly ``hops`` real hops.

    Start uniform over entities admitting such a walk, endpoint uniform over
    the exact-``hops`` forward frontier, meeting entity uniform over the
    intersection of the forward and reverse BFS frontiers, and each edge
    uniform among those that keep the remaining endpoint reachable.
    """
    if hops < 1:
        raise KBError("hops must be >= 1")
    cap = _walk_capable(kb, hops)
    starts = np.flatnonzero(cap[hops])
    if starts.size == 0:
        raise KBError(f"no walk of {hops} hops exists in the knowledge base")
    rng = np.random.default_rng(seed)
    rev = _ReverseIndex(kb)
    fwd_m = math.ceil(hops / 2)
    paths = []
    for _ in range(n):
        s = int(starts[rng.integers(starts.size)])
        fwd = _reach_exact(kb, s, hops)
        ends = sorted(fwd[hops])
        t = ends[rng.integers(len(ends))]
        back = rev.levels(t, hops - fwd_m)
        meet = sorted(fwd[fwd_m] & back[hops - fwd_m])
        mid = meet[rng.integers(len(meet))]
        path = ReasoningPath(s)
        for target, length in ((mid, fwd_m), (t, hops - fwd_m)):
            tgt_back = rev.levels(target, length)
            cur = path.terminal
            for remaining in range(length, 0, -1):
                choices = _half_choices(kb, cur, target, remaining, tgt_back)
                r, cur = choices[rng.integers(len(choices))]
                path = path.extend(r, cur)
        paths.append(path)
    return PathSet(paths, "expert")


def expert_distribution(kb: KnowledgeBase, hops: int) -> dict[ReasoningPath, float]:
    """Exact path distribution induced by :func:`sample_expert_paths`."""
    cap = _walk_capable(kb, hops)
    starts = [int(s) for s in np.flatnonzero(cap[hops])]
    if not starts:
        raise KBError(f"no walk of {hops} hops exists in the knowledge base")
    rev = _ReverseIndex(kb)
    fwd_m = math.ceil(hops / 2)
    dist: dict[ReasoningPath, float] = {}

    def expand(path: ReasoningPath, prob: float, legs: list[tuple[int, int]]):
        if not legs:
            dist[path] = dist.get(path, 0.0) + prob
            return
        (target, length), rest = legs[0], legs[1:]
        back = rev.levels(target, length)

        def walk(p: ReasoningPath, pr: float, remaining: int):
            if remaining == 0:
                expand(p, pr, rest)
                return
            choices = _half_choices(kb, p.terminal, target, remaining, back)
            for r, e in choices:
                walk(p.extend(r, e), pr / len(choices), remaining - 1)

        walk(path, prob, length)

    for s in starts:
        fwd = _reach_exact(kb, s, hops)
        ends = sorted(fwd[hops])
        for t in ends:
            back = rev.levels(t, hops - fwd_m)
            meet = sorted(fwd[fwd_m] & back[hops - fwd_m])
            p0 = 1.0 / (len(starts) * len(ends) * len(meet))
            for mid in meet:
                expand(ReasoningPath(s), p0, [(mid, fwd_m), (t, hops - fwd_m)])
    return dist


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    # fsum is exact, so the result does not depend on set iteration order
    return 0.5 * math.fsum(abs(float(p.get(k, 0.0)) - float(q.get(k, 0.0))) for k in keys)
