"""k-NN Gaussian-kernel graphs, datasets and stratified two-stage splits."""

from __future__ import annotations

import contextlib
import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DataError, DomainError, ParameterError, TestLeakageError
from .sparse_core import CsrMatrix, load_coo, parse_coo, save_coo

__all__ = [
    "Graph",
    "Dataset",
    "knn_gaussian_graph",
    "split_test",
    "split_dev",
    "split_dataset",
    "save_graph",
    "load_graph",
    "read_features",
    "read_labels",
]

SYMMETRIZATIONS = ("union", "mutual")


@dataclass(frozen=True)
class Graph:
    n_nodes: int
    adjacency: CsrMatrix
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = self.adjacency
        if a.shape != (self.n_nodes, self.n_nodes):
            raise DomainError(f"adjacency shape {a.shape} does not match n_nodes={self.n_nodes}")
        if not a.is_symmetric():
            raise DomainError("graph adjacency must be symmetric")
        if a.nnz and (a.values.min() <= 0 or a.values.max() > 1):
            raise DomainError("edge weights must lie in (0, 1]")
        if np.any(a.row_indices() == a.col_idx):
            raise DomainError("graph adjacency must have a zero diagonal")

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def knn_gaussian_graph(features, k: int = 30, bandwidth: float | str = "auto",
                       symmetrization: str = "union") -> Graph:
    """Weighted k-nearest-neighbour graph with Gaussian edge weights.

    Each node links to its ``k`` nearest rows by Euclidean distance with
    weight ``exp(-d^2 / (2 sigma^2))``. Distance ties go to the smaller
    node index. ``bandwidth="auto"`` sets sigma to the mean distance to the
    k-th neighbour. The directed relation is symmetrized with ``max``
    (union) or kept only where both directions agree (mutual).
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError(f"features must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("features contain non-finite values")
    n = x.shape[0]
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k!r}")
    if k >= n:
        raise ParameterError(f"k={k} must be smaller than the number of nodes ({n})")
    if symmetrization not in SYMMETRIZATIONS:
        raise ParameterError(f"symmetrization must be one of {SYMMETRIZATIONS}")

    d2 = _pairwise_sq_dists(x)
    np.fill_diagonal(d2, np.inf)
    # Stable sort on distance keeps the lower index first among ties.
    nbrs = np.argsort(d2, axis=1, kind="stable")[:, :k]
    nbr_d2 = np.take_along_axis(d2, nbrs, axis=1)

    if bandwidth == "auto":
        sigma = float(np.mean(np.sqrt(nbr_d2[:, -1])))
        if sigma == 0.0:
            sigma = 1.0  # every k-th neighbour is a duplicate row
    else:
        sigma = float(bandwidth)
        if not sigma > 0:
            raise ParameterError(f"bandwidth must be positive, got {bandwidth!r}")

    weights = np.exp(-nbr_d2 / (2.0 * sigma * sigma))
    # Far neighbours can underflow; keep them as edges with the smallest weight.
    np.maximum(weights, np.finfo(np.float64).tiny, out=weights)

    w = np.zeros((n, n))
    w[np.repeat(np.arange(n), k), nbrs.ravel()] = weights.ravel()
    if symmetrization == "union":
        sym = np.maximum(w, w.T)
    else:
        sym = np.where((w > 0) & (w.T > 0), np.maximum(w, w.T), 0.0)
    adjacency = CsrMatrix.from_dense(sym)
    meta = {"k": int(k), "kernel_bandwidth": sigma, "symmetrization": symmetrization}
    return Graph(n, adjacency, meta)


def save_graph(graph: Graph, path) -> None:
    save_coo(graph.adjacency, path, comments=["graph " + json.dumps(graph.meta, sort_keys=True)])


def load_graph(path) -> Graph:
    adjacency, comments = load_coo(path)
    meta = {}
    for line in comments:
        if line.startswith("graph "):
            meta = json.loads(line[len("graph "):])
    if adjacency.n_rows != adjacency.n_cols:
        raise DataError(f"{path}: graph matrix must be square, got {adjacency.shape}")
    try:
        return Graph(adjacency.n_rows, adjacency, meta)
    except DomainError as exc:
        raise DataError(f"{path}: {exc}") from None


# -- splits --------------------------------------------------------------------

def _allocate(counts: np.ndarray, fraction: float, total: int) -> np.ndarray:
    """Per-class quotas summing to ``total`` by largest remainder.

    Each quota is the floor or ceiling of ``fraction * count``.
    """
    exact = counts * fraction
    quota = np.floor(exact).astype(np.int64)
    remainder = exact - quota
    short = total - int(quota.sum())
    if short > 0:
        # Largest remainder first; ties by class index.
        order = np.lexsort((np.arange(len(counts)), -remainder))
        eligible = [c for c in order if quota[c] < counts[c]]
        for c in eligible[:short]:
            quota[c] += 1
    return quota


def _class_counts(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    classes, counts = np.unique(labels, return_counts=True)
    return classes, counts


def split_test(labels, test_fraction: float, test_seed: int) -> np.ndarray:
    """Stratified test mask; a pure function of ``(labels, test_fraction, test_seed)``."""
    labels = np.asarray(labels)
    n = len(labels)
    n_test = int(round(test_fraction * n))
    if n_test < 1 or n_test >= n:
        raise ParameterError(f"test fraction {test_fraction} gives an empty split for N={n}")
    classes, counts = _class_counts(labels)
    quota = _allocate(counts, test_fraction, n_test)
    rng = np.random.default_rng([int(test_seed), 0x7E57])
    mask = np.zeros(n, dtype=bool)
    for c, q in zip(classes, quota):
        idx = np.flatnonzero(labels == c)
        mask[rng.permutation(idx)[:q]] = True
    return mask


def split_dev(labels, dev_mask, train_count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split the development nodes into stratified train and validation masks.

    Only ``dev_mask`` is consulted; per-class train quotas follow the class
    proportions of the full label vector.
    """
    labels = np.asarray(labels)
    dev_mask = np.asarray(dev_mask, dtype=bool)
    n_dev = int(dev_mask.sum())
    if train_count < 1 or train_count >= n_dev:
        raise ParameterError(f"train count {train_count} gives an empty split of {n_dev} dev nodes")
    classes, counts = _class_counts(labels)
    quota = _allocate(counts, train_count / len(labels), train_count)
    rng = np.random.default_rng([int(seed), 0xDE5])
    train = np.zeros(len(labels), dtype=bool)
    for c, q in zip(classes, quota):
        idx = np.flatnonzero((labels == c) & dev_mask)
        if q > len(idx):
            raise ParameterError(f"class {c} has only {len(idx)} development nodes, needs {q}")
        train[rng.permutation(idx)[:q]] = True
    # Rounding can leave the total short when a class is exhausted; top up from the rest.
    missing = train_count - int(train.sum())
    if missing > 0:
        pool = np.flatnonzero(dev_mask & ~train)
        train[rng.permutation(pool)[:missing]] = True
    val = dev_mask & ~train
    return train, val


def split_dataset(labels, fractions=(0.1, 0.45, 0.45), seed: int = 0,
                  test_seed: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-stage stratified split into (train, val, test) masks.

    The test mask is drawn first from ``test_seed`` (defaults to ``seed``);
    train and validation are then drawn from the remaining nodes with
    ``seed``. Fixing ``test_seed`` and varying ``seed`` reshuffles only the
    development part.
    """
    labels = np.asarray(labels)
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ParameterError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    if len(np.unique(labels)) < 2:
        raise ParameterError("need at least two classes")
    test_seed = seed if test_seed is None else test_seed
    test = split_test(labels, fractions[2], test_seed)
    n_train = int(round(fractions[0] * len(labels)))
    train, val = split_dev(labels, ~test, n_train, seed)
    return train, val, test


class Dataset:
    """Features, labels and a train/val/test partition with a guarded test mask.

    Reading :attr:`test_mask` inside :meth:`sealed` raises
    :class:`TestLeakageError`; training and hyperparameter search run sealed.
    """

    def __init__(self, features, labels, train_mask, val_mask, test_mask,
                 fractions=(0.1, 0.45, 0.45), test_seed: int = 0):
        self.features = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        n = len(self.labels)
        masks = [np.asarray(m, dtype=bool) for m in (train_mask, val_mask, test_mask)]
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DataError(f"features have shape {self.features.shape}, expected {n} rows")
        if any(m.shape != (n,) for m in masks):
            raise DataError("masks must be boolean vectors with one entry per node")
        if np.any(masks[0] & masks[1]) or np.any(masks[0] & masks[2]) or np.any(masks[1] & masks[2]):
            raise DataError("train/val/test masks must be disjoint")
        if n and (self.labels.min() < 0):
            raise DataError("labels must be non-negative class indices")
        self.train_mask, self.val_mask = masks[0], masks[1]
        self._test_mask = masks[2]
        self.dev_mask = ~masks[2]
        self.fractions = tuple(fractions)
        self.test_seed = test_seed
        self._sealed = 0

    @classmethod
    def from_split(cls, features, labels, fractions=(0.1, 0.45, 0.45), seed: int = 0,
                   test_seed: int | None = None) -> "Dataset":
        test_seed = seed if test_seed is None else test_seed
        train, val, test = split_dataset(labels, fractions, seed, test_seed)
        return cls(features, labels, train, val, test, fractions, test_seed)

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def test_mask(self) -> np.ndarray:
        if self._sealed:
            raise TestLeakageError("test mask read while the dataset is sealed")
        return self._test_mask

    @contextlib.contextmanager
    def sealed(self) -> Iterator["Dataset"]:
        self._sealed += 1
        try:
            yield self
        finally:
            self._sealed -= 1

    def resplit(self, seed: int) -> "Dataset":
        """New train/val draw from the development nodes; the test mask is untouched."""
        n_train = int(round(self.fractions[0] * self.n_nodes))
        train, val = split_dev(self.labels, self.dev_mask, n_train, seed)
        return Dataset(self.features, self.labels, train, val, self._test_mask,
                       self.fractions, self.test_seed)


# -- ingestion -------------------------------------------------------------------

def read_features(path) -> np.ndarray:
    """Load a feature matrix from CSV (one row per node) or the COO text format."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".coo"):
        return parse_coo(text, source=path)[0].to_dense()
    rows = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError:
            if not rows and lineno == 1:
                continue  # header row
            raise DataError(f"{path}:{lineno}: non-numeric value") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        rows.append(row)
    if not rows:
        raise DataError(f"{path}: no feature rows")
    out = np.array(rows)
    if not np.all(np.isfinite(out)):
        raise DataError(f"{path}: non-finite feature values")
    return out


def read_labels(path) -> np.ndarray:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                value = int(line)
            except ValueError:
                raise DataError(f"{path}:{lineno}: expected an integer label, got {line!r}") from None
            if value < 0:
                raise DataError(f"{path}:{lineno}: negative label {value}")
            labels.append(value)
    if not labels:
        raise DataError(f"{path}: no labels")
    return np.array(labels, dtype=np.int64)
