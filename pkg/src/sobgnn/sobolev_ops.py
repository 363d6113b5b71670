"""Sparse Sobolev terms and the precomputed propagation-operator cascade.

The dense matrix power ``(A + eps I)^rho`` fills in quickly; replacing the
matrix product by the Hadamard product keeps the pattern of ``A + eps I``
for every ``rho``. A cascade holds the normalized operators for
``rho = 1..alpha``; it is built once and shared by all layers.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateCascadeError, DomainError, ParameterError
from .sparse_core import (
    CsrMatrix,
    add_scaled_identity,
    atomic_write_text,
    hadamard_power,
    load_coo,
    save_coo,
    sym_normalize,
)

__all__ = [
    "SobolevCascade",
    "sparse_sobolev_term",
    "sobolev_laplacian_term",
    "build_cascade",
    "gcn_operator",
    "save_cascade",
    "load_cascade",
]

# Only genuine underflow counts as a vanished operator.
DEGENERATE_THRESHOLD = 1e-300


@dataclass(frozen=True)
class SobolevCascade:
    eps: float
    alpha: int
    operators: tuple[CsrMatrix, ...]

    def __post_init__(self):
        object.__setattr__(self, "operators", tuple(self.operators))
        if len(self.operators) != self.alpha:
            raise ParameterError(f"cascade has {len(self.operators)} operators, expected alpha={self.alpha}")

    @property
    def n_nodes(self) -> int:
        return self.operators[0].n_rows

    def operator(self, rho: int) -> CsrMatrix:
        """Operator for the 1-based power ``rho``."""
        return self.operators[rho - 1]


def sparse_sobolev_term(a: CsrMatrix, eps: float, rho: int) -> CsrMatrix:
    """``(a + eps I)`` raised to the ``rho``-th Hadamard power."""
    if not a.is_symmetric():
        raise DomainError("sparse Sobolev term expects a symmetric adjacency")
    return hadamard_power(add_scaled_identity(a, eps), rho)


def sobolev_laplacian_term(l: CsrMatrix, eps: float, rho: int) -> CsrMatrix:
    """``(L + eps I)^(rho)`` for a Laplacian; signed entries are fine here."""
    return hadamard_power(add_scaled_identity(l, eps), rho)


def build_cascade(a: CsrMatrix, eps: float, alpha: int) -> SobolevCascade:
    """Normalized Sobolev operators ``D_rho^{-1/2} (A + eps I)^(rho) D_rho^{-1/2}``.

    Raises :class:`DegenerateCascadeError` naming the first ``rho`` whose
    Hadamard power has underflowed to zero.
    """
    if not isinstance(alpha, (int, np.integer)) or alpha < 1:
        raise ParameterError(f"alpha must be a positive integer, got {alpha!r}")
    if eps < 0:
        raise ParameterError(f"eps must be >= 0, got {eps}")
    if a.nnz and a.values.min() < 0:
        raise DomainError("adjacency weights must be non-negative")
    base = add_scaled_identity(a, eps)
    if not base.is_symmetric():
        raise DomainError("cascade expects a symmetric adjacency")
    operators = []
    for rho in range(1, alpha + 1):
        term = hadamard_power(base, rho)
        peak = term.max_abs()
        if peak < DEGENERATE_THRESHOLD:
            raise DegenerateCascadeError(rho, peak)
        operators.append(sym_normalize(term))
    return SobolevCascade(float(eps), int(alpha), tuple(operators))


def gcn_operator(a: CsrMatrix) -> CsrMatrix:
    """Renormalized GCN propagation operator built from ``A + I``."""
    return sym_normalize(add_scaled_identity(a, 1.0))


def save_cascade(cascade: SobolevCascade, directory) -> None:
    """Write one COO file per operator plus a ``cascade.json`` sidecar."""
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    files = []
    for rho, op in enumerate(cascade.operators, start=1):
        name = f"operator_rho{rho}.coo"
        save_coo(op, os.path.join(directory, name))
        files.append(name)
    sidecar = {"eps": cascade.eps, "alpha": cascade.alpha, "n_nodes": cascade.n_nodes, "files": files}
    atomic_write_text(os.path.join(directory, "cascade.json"), json.dumps(sidecar, indent=2) + "\n")


def load_cascade(directory, eps: float | None = None, alpha: int | None = None) -> SobolevCascade:
    """Read a cached cascade; if ``eps``/``alpha`` are given they must match the sidecar."""
    directory = os.fspath(directory)
    with open(os.path.join(directory, "cascade.json"), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    if eps is not None and float(eps) != sidecar["eps"]:
        raise DataError(f"cached cascade has eps={sidecar['eps']}, requested {eps}")
    if alpha is not None and int(alpha) != sidecar["alpha"]:
        raise DataError(f"cached cascade has alpha={sidecar['alpha']}, requested {alpha}")
    ops = tuple(load_coo(os.path.join(directory, name))[0] for name in sidecar["files"])
    return SobolevCascade(float(sidecar["eps"]), int(sidecar["alpha"]), ops)
