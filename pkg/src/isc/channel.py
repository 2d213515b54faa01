"""Entity packets over a BPSK/AWGN link, with three decoders.

Wire format per dimension (38 bits, dimension-major): a two's-complement
fixed-point word, MSB first, i.e. the sign bit (weight -8), 3 integer bits
and 34 fraction bits. With ``d = 100`` a packet is 3800 bits.

Decoders:

``none``
    exact match against the entity codebook, otherwise an erasure.
``nearest``
    closest entity to the dequantized vector.
``reasoning``
    shortlist the ``k`` closest entities, and if the closest one cannot be
    reached by the policy from the other entities of the message, take the
    shortlisted entity with the largest reachable path mass instead.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embedding import EmbeddingTable
from .kg import KnowledgeBase
from .policy import PolicyModel, terminal_mass

INT_BITS = 3
FRAC_BITS = 34
BITS_PER_DIM = 1 + INT_BITS + FRAC_BITS
MODES = ("none", "nearest", "reasoning")
_SHIFTS = np.arange(BITS_PER_DIM - 1, -1, -1, dtype=np.int64)
_SIGN = 1 << (BITS_PER_DIM - 1)
_WORD_MASK = (1 << BITS_PER_DIM) - 1


class ChannelError(ValueError):
    pass


@dataclass
class Packet:
    bits: np.ndarray
    entity: int = -1

    @property
    def width(self) -> int:
        return len(self.bits)


def quantize_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < -4.0) or np.any(v >= 4.0) or not np.all(np.isfinite(v)):
        raise ChannelError("components must lie in [-4, 4) for the fixed-point layout")
    word = np.rint(v * 2.0**FRAC_BITS).astype(np.int64) & _WORD_MASK
    return ((word[:, None] >> _SHIFTS) & 1).astype(np.uint8).ravel()


def dequantize(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % BITS_PER_DIM:
        raise ChannelError(f"packet width {bits.size} is not a multiple of {BITS_PER_DIM}")
    word = (bits.reshape(-1, BITS_PER_DIM) << _SHIFTS).sum(axis=1)
    word = np.where(word >= _SIGN, word - 2 * _SIGN, word)
    return word / 2.0**FRAC_BITS


def quantize(tab: EmbeddingTable, e: int) -> Packet:
    return Packet(quantize_vector(tab.entity(e)), e)


def bpsk_ber(snr_db: float) -> float:
    """Uncoded BPSK bit error rate ``Q(sqrt(2 * snr))``."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    snr = 10.0 ** (snr_db / 10.0)
    return 0.5 * math.erfc(math.sqrt(snr))


def noise_sigma(snr_db: float) -> float:
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return math.sqrt(1.0 / (2.0 * 10.0 ** (snr_db / 10.0)))


def transmit(p: Packet | np.ndarray, snr_db: float, seed: int | Sequence[int] = 0) -> np.ndarray:
    """BPSK map (0 -> +1, 1 -> -1), add Gaussian noise, hard decision.

    The noise draw depends only on ``seed``, so one seed swept over SNR
    gives nested error patterns.
    """
    bits = p.bits if isinstance(p, Packet) else np.asarray(p, dtype=np.uint8)
    sigma = noise_sigma(snr_db)
    if sigma == 0.0:
        return bits.copy()
    noise = np.random.default_rng(seed).standard_normal(bits.size)
    received = (1.0 - 2.0 * bits) + sigma * noise
    return (received < 0).astype(np.uint8)


# -- decoding ---------------------------------------------------------------

class Recoverer:
    """Decoder state for one knowledge base: quantized codebook and path-mass cache."""

    def __init__(self, kb: KnowledgeBase, tab: EmbeddingTable, m: PolicyModel | None = None,
                 shortlist: int = 5):
        if tab.n_entities != kb.n_entities:
            tab = tab.for_kb(kb)
        self.kb, self.tab, self.m = kb, tab, m
        self.shortlist = shortlist
        self.codewords = np.array([quantize_vector(v) for v in tab.entity_vecs])
        self.codebook = np.array([dequantize(b) for b in self.codewords])
        self.width = self.codewords.shape[1]
        self._mass: dict[int, dict[int, float]] = {}

    def mass_from(self, origin: int) -> dict[int, float]:
        if origin not in self._mass:
            self._mass[origin] = terminal_mass(self.m, self.kb, self.tab, origin)
        return self._mass[origin]

    def _ranked(self, v: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        d = np.linalg.norm(self.codebook - v, axis=1)
        k = min(k, len(d))
        ids = np.argpartition(d, k - 1)[:k] if k < len(d) else np.arange(len(d))
        order = np.lexsort((ids, d[ids]))
        return ids[order], d[ids][order]

    def recover(self, bits, mode: str = "nearest", context: Iterable[int] = ()) -> int | None:
        bits = np.asarray(bits)
        if bits.size != self.width:
            raise ChannelError(f"received {bits.size} bits, expected {self.width}")
        if mode not in MODES:
            raise ChannelError(f"unknown recovery mode {mode!r}")
        v = dequantize(bits)
        ids, d = self._ranked(v, self.shortlist if mode == "reasoning" else 1)
        first = int(ids[0])
        if mode == "none":
            return first if d[0] == 0.0 else None
        if mode == "nearest" or d[0] == 0.0:
            return first
        context = [c for c in context]
        if self.m is None or not context:
            return first
        masses = [sum(self.mass_from(o).get(int(e), 0.0) for o in context) for e in ids]
        if masses[0] > 0:
            return first
        best = max(range(len(ids)), key=lambda i: (masses[i], -d[i], -ids[i]))
        return int(ids[best]) if masses[best] > 0 else first


def recover(bits, kb: KnowledgeBase, tab: EmbeddingTable, m: PolicyModel | None,
            mode: str = "nearest", context: Iterable[int] = (), shortlist: int = 5) -> int | None:
    """One-shot decoding; returns an entity id, or None for an erasure."""
    return Recoverer(kb, tab, m, shortlist).recover(bits, mode, context)


# -- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelConfig:
    snr_db: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
    packets: int = 500
    modes: tuple[str, ...] = MODES
    shortlist: int = 5
    context_hops: int = 2
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.packets < 1:
            raise ChannelError("packets per point must be >= 1")
        bad = set(self.modes) - set(MODES)
        if bad:
            raise ChannelError(f"unknown recovery modes {sorted(bad)}")


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    mode: str
    trials: int
    errors: int

    @property
    def per(self) -> float:
        return self.errors / self.trials


def _incoming(kb: KnowledgeBase) -> list[list[int]]:
    inc: list[list[int]] = [[] for _ in range(kb.n_entities)]
    for h, _, t in kb.triples:
        inc[t].append(int(h))
    return [sorted(set(x)) for x in inc]


def make_message(kb: KnowledgeBase, incoming: list[list[int]], target: int, hops: int,
                 rng: np.random.Generator) -> list[int]:
    """Entities of a random walk of up to ``hops`` edges ending at ``target``, target excluded."""
    ctx, cur = [], target
    for _ in range(hops):
        if not incoming[cur]:
            break
        cur = incoming[cur][rng.integers(len(incoming[cur]))]
        if cur != target and cur not in ctx:
            ctx.append(cur)
    return ctx


def per_sweep(cfg: ChannelConfig, kb: KnowledgeBase, tab: EmbeddingTable,
              m: PolicyModel | None) -> list[SweepRow]:
    """Monte Carlo packet error rate per (SNR, mode).

    Trial ``i`` draws its target entity, message context and channel noise
    from seed ``(cfg.seed, i)``; every SNR point and mode reuses them.
    """
    dec = Recoverer(kb, tab, m, cfg.shortlist)
    incoming = _incoming(kb)
    trials = []
    for i in range(cfg.packets):
        rng = np.random.default_rng([cfg.seed, i])
        target = int(rng.integers(kb.n_entities))
        trials.append((target, make_message(kb, incoming, target, cfg.context_hops, rng)))

    def run_point(snr: float) -> list[SweepRow]:
        errors = dict.fromkeys(cfg.modes, 0)
        for i, (target, ctx) in enumerate(trials):
            rx = transmit(dec.codewords[target], snr, seed=[cfg.seed, i, 1])
            for mode in cfg.modes:
                if dec.recover(rx, mode, ctx) != target:
                    errors[mode] += 1
        return [SweepRow(float(snr), mode, cfg.packets, errors[mode]) for mode in cfg.modes]

    if cfg.threads > 1 and dec.m is not None and "reasoning" in cfg.modes:
        # warm the shared mass cache so worker threads only read it
        for _, ctx in trials:
            for o in ctx:
                dec.mass_from(o)
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            chunks = list(pool.map(run_point, cfg.snr_db))
    else:
        chunks = [run_point(s) for s in cfg.snr_db]
    return [row for chunk in chunks for row in chunk]


def write_sweep(rows: Sequence[SweepRow], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "mode", "trials", "errors", "per"])
        for r in rows:
            w.writerow([repr(r.snr_db), r.mode, r.trials, r.errors, repr(r.per)])


def wilson_interval(errors: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi
