"""Source-side semantic comparator.

A one-hidden-layer network maps a path embedding to a score in (0, 1)
that is high for expert-like paths. It is trained as a binary
cross-entropy discriminator (experts labelled 1, generated paths 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neural import DenseNet, ShapeError, sigmoid


@dataclass
class ComparatorModel:
    net: DenseNet

    def copy(self) -> "ComparatorModel":
        return ComparatorModel(self.net.copy())

    @property
    def dim(self) -> int:
        return self.net.input_width


def build_comparator(dim: int, hidden: int = 64, seed: int | None = 0) -> ComparatorModel:
    rng = None if seed is None else np.random.default_rng(seed)
    return ComparatorModel(DenseNet.build([dim, hidden, 1], ["relu", "sigmoid"], rng))


def _as_batch(c: ComparatorModel, p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        p = p[None, :]
    if p.ndim != 2 or p.shape[1] != c.dim:
        raise ShapeError(f"path embedding shape {p.shape} does not match comparator width {c.dim}")
    return p


def comparator_logit(c: ComparatorModel, p) -> np.ndarray:
    return c.net.logits(_as_batch(c, p))[:, 0]


def feature(c: ComparatorModel, p):
    """Comparator score; scalar for a single vector, array for a batch."""
    single = np.ndim(p) == 1
    out = sigmoid(comparator_logit(c, p))
    return float(out[0]) if single else out


def log_feature(c: ComparatorModel, p) -> np.ndarray:
    """``log feature(p)`` computed stably from the logit."""
    u = comparator_logit(c, p)
    return -np.logaddexp(0.0, -u)


def semantic_distance(c: ComparatorModel, p_expert, p_generated) -> float:
    """Signed feature gap ``feature(pE) - feature(pD)``."""
    a = _as_batch(c, p_expert)
    b = _as_batch(c, p_generated)
    if len(a) != 1 or len(b) != 1:
        raise ShapeError("semantic_distance compares two single path embeddings")
    return feature(c, a[0]) - feature(c, b[0])


def _check_batches(expert, generated):
    if len(expert) == 0 or len(generated) == 0:
        raise ValueError("comparator batches must be non-empty")


def comparator_loss(c: ComparatorModel, expert, generated) -> float:
    """``-(mean log D(expert) + mean log(1 - D(generated)))``."""
    expert, generated = _as_batch(c, expert), _as_batch(c, generated)
    _check_batches(expert, generated)
    ue = comparator_logit(c, expert)
    ug = comparator_logit(c, generated)
    return float(np.mean(np.logaddexp(0.0, -ue)) + np.mean(np.logaddexp(0.0, ug)))


def comparator_grads(c: ComparatorModel, expert, generated):
    expert, generated = _as_batch(c, expert), _as_batch(c, generated)
    _check_batches(expert, generated)
    x = np.vstack([expert, generated])
    out, cache = c.net.forward_cached(x)
    # d loss / d logit: (D - 1)/nE for experts, D/nG for generated
    up = out[:, 0].copy()
    up[:len(expert)] -= 1.0
    up[:len(expert)] /= len(expert)
    up[len(expert):] /= len(generated)
    grads, _ = c.net.backward_cached(cache, up[:, None], wrt_logits=True)
    return grads


def comparator_step(c: ComparatorModel, expert, generated, lr: float) -> ComparatorModel:
    """One SGD step on :func:`comparator_loss`."""
    if lr == 0:
        _check_batches(expert, generated)
        return c.copy()
    return ComparatorModel(c.net.sgd_step(comparator_grads(c, expert, generated), lr))
