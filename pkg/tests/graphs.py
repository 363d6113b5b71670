"""Random graph generators shared by the test modules."""

import numpy as np

from sobgnn.sparse_core import CsrMatrix


def triangle() -> CsrMatrix:
    return CsrMatrix.from_dense([[0, 1, 1], [1, 0, 1], [1, 1, 0]])


def random_weighted_graph(n: int, rng: np.random.Generator, density: float = 0.4,
                          connected: bool = True) -> CsrMatrix:
    """Symmetric adjacency with weights in (0, 1]; a ring is added when ``connected``."""
    w = rng.uniform(0.05, 1.0, size=(n, n)) * (rng.random((n, n)) < density)
    w = np.triu(w, 1)
    if connected and n > 1:
        idx = np.arange(n)
        w[idx[:-1], idx[1:]] = np.maximum(w[idx[:-1], idx[1:]], rng.uniform(0.05, 1.0, n - 1))
    w = w + w.T
    return CsrMatrix.from_dense(w)


def random_geometric_graph(n: int, rng: np.random.Generator, radius: float = 0.35,
                           sigma: float = 0.15) -> CsrMatrix:
    """Gaussian-weighted geometric graph on uniform points in the unit square, kept connected."""
    while True:
        pts = rng.random((n, 2))
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        mask = (d < radius) & (d > 0)
        # Connectivity check by repeated boolean propagation.
        reach = np.zeros(n, dtype=bool)
        reach[0] = True
        for _ in range(n):
            nxt = reach | mask[reach].any(axis=0)
            if nxt.sum() == reach.sum():
                break
            reach = nxt
        if reach.all():
            return CsrMatrix.from_dense(np.where(mask, np.exp(-d ** 2 / (2 * sigma ** 2)), 0.0))


def dense_normalize(m: np.ndarray) -> np.ndarray:
    d = m.sum(axis=1)
    inv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    return m * inv[:, None] * inv[None, :]


def finite_difference_check(loss, params, h: float = 1e-5, floor: float = 1e-10):
    """Worst relative error between ``params``-shaped analytic gradients and central differences.

    ``loss(p)`` returns ``(value, grads)`` for a ``ModelParams`` ``p``. Entries
    where both gradients are below ``floor`` in magnitude count as agreeing.
    Returns ``(worst_error, n_checked)``.
    """
    _, grads = loss(params)
    tensors = [t.copy() for t in params.tensors()]
    worst, checked = 0.0, 0
    for ti, (t, g) in enumerate(zip(tensors, grads.tensors())):
        for idx in np.ndindex(t.shape):
            orig = t[idx]
            t[idx] = orig + h
            up, _ = loss(params.with_tensors(tensors))
            t[idx] = orig - h
            down, _ = loss(params.with_tensors(tensors))
            t[idx] = orig
            fd = (up - down) / (2 * h)
            scale = max(abs(fd), abs(g[idx]))
            checked += 1
            if scale > floor:
                worst = max(worst, abs(fd - g[idx]) / scale)
    return worst, checked
