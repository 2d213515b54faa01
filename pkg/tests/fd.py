"""Central finite differences shared by the gradient tests."""

import numpy as np

H = 1e-5
REL_TOL = 1e-4
# Components smaller than this are held to REL_TOL * FLOOR absolutely. Central
# differences carry round-off near eps * |f| / h (about 1e-10 here), which
# would swamp a purely relative test on near-zero components.
FLOOR = 1e-4


def numeric_grad(f, x: np.ndarray, h: float = H) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(x)
        flat[i] = old - h
        down = f(x)
        flat[i] = old
        gf[i] = (up - down) / (2 * h)
    return g


def rel_error(analytic, numeric) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), FLOOR)
    return float(np.max(np.abs(a - n) / scale)) if a.size else 0.0


def random_net(rng, sizes, activations):
    from isc.neural import DenseNet
    net = DenseNet.build(sizes, activations, rng)
    for layer in net.layers:
        layer.bias[:] = rng.normal(0.0, 0.5, size=layer.bias.shape)
    return net


def clear_of_kinks(net, x, margin: float = 1e-3) -> bool:
    """True when no ReLU pre-activation sits within ``margin`` of zero."""
    _, cache = net.forward_cached(x)
    return all(np.all(np.abs(z) > margin) for layer, z in zip(net.layers, cache.preacts)
               if layer.activation == "relu")
