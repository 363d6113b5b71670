"""Dense spectral tools for checking Sobolev-norm and Hadamard-power identities.

Everything here works on small graphs (a few hundred nodes at most) and
exists to verify properties numerically; the training path never needs a
spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, IllConditionedError, ParameterError
from .sparse_core import CsrMatrix, add_scaled_identity, hadamard_power, spmm

__all__ = [
    "Spectrum",
    "PenalizationTable",
    "jacobi_eigh",
    "sym_eigendecomposition",
    "gft",
    "igft",
    "sobolev_norm",
    "sparse_sobolev_norm",
    "condition_number",
    "partial_permutation_matrix",
    "hadamard_spectrum_check",
    "penalization_curves",
    "cosine_similarity",
]

DEFAULT_SIZE_CAP = 2000
# Above this size the cyclic Jacobi sweeps get slow in pure numpy; "auto" hands over to LAPACK.
JACOBI_AUTO_LIMIT = 200
ILL_CONDITIONED = 1e-12


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T


@dataclass(frozen=True)
class PenalizationTable:
    rho_values: tuple[int, ...]
    nonsparse: dict[int, np.ndarray]
    sparse: dict[int, np.ndarray]
    eigenvalues: np.ndarray

    def similarity(self, rho: int) -> float:
        return cosine_similarity(self.nonsparse[rho], self.sparse[rho])


def _as_dense(m) -> np.ndarray:
    if isinstance(m, CsrMatrix):
        return m.to_dense()
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def jacobi_eigh(m: np.ndarray, rtol: float = 1e-12, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a real symmetric matrix.

    Sweeps over all (p, q) pairs in row order, applying a plane rotation
    that zeroes ``a[p, q]``, until the off-diagonal Frobenius norm falls
    below ``rtol * ||m||_F``. Returns unsorted eigenvalues and the
    accumulated rotation matrix.
    """
    a = np.array(m, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    fro = np.linalg.norm(a)
    if n < 2 or fro == 0.0:
        return np.diag(a).copy(), v
    target = rtol * fro
    diag_mask = np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a[~diag_mask]))
        if off < target:
            break
        # Rotations whose entry is negligible next to the target cannot move the sum.
        skip = target / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise ArithmeticError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.diag(a).copy(), v


def sym_eigendecomposition(m, method: str = "auto", size_cap: int = DEFAULT_SIZE_CAP,
                           symmetry_tol: float = 1e-12) -> Spectrum:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi up to
    :data:`JACOBI_AUTO_LIMIT` nodes, LAPACK beyond).
    """
    a = _as_dense(m)
    n = a.shape[0]
    if n > size_cap:
        raise ParameterError(f"matrix of size {n} exceeds the dense spectral cap of {size_cap}; subsample the graph")
    scale = max(1.0, float(np.max(np.abs(a)))) if n else 1.0
    if n and np.max(np.abs(a - a.T)) > symmetry_tol * scale:
        raise DomainError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    if method == "auto":
        method = "jacobi" if n <= JACOBI_AUTO_LIMIT else "lapack"
    if method == "jacobi":
        w, u = jacobi_eigh(a)
    elif method == "lapack":
        w, u = np.linalg.eigh(a)
    else:
        raise ParameterError(f"unknown eigensolver {method!r}")
    order = np.argsort(w, kind="stable")
    return Spectrum(w[order], u[:, order])


def gft(x, spectrum: Spectrum) -> np.ndarray:
    """Graph Fourier transform: coefficients of ``x`` in the eigenbasis."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != spectrum.n:
        raise DimensionError(f"signal length {x.shape[0]} does not match spectrum size {spectrum.n}")
    return spectrum.eigenvectors.T @ x


def igft(x_hat, spectrum: Spectrum) -> np.ndarray:
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x_hat.shape[0] != spectrum.n:
        raise DimensionError(f"coefficient length {x_hat.shape[0]} does not match spectrum size {spectrum.n}")
    return spectrum.eigenvectors @ x_hat


def _shifted_powers(eigenvalues: np.ndarray, eps: float, rho: float) -> np.ndarray:
    shifted = eigenvalues + eps
    # Rounding leaves the null eigenvalue of a Laplacian slightly negative.
    tiny = 1e-10 * max(1.0, float(np.max(np.abs(shifted))))
    shifted = np.where((shifted < 0) & (shifted > -tiny), 0.0, shifted)
    with np.errstate(invalid="raise"):
        return np.power(shifted, rho)


def sobolev_norm(x, l, eps: float, rho: float, spectrum: Spectrum | None = None) -> float:
    """``||(L + eps I)^{rho/2} x||`` evaluated in the graph Fourier domain.

    ``rho`` may be any real number; the sum is ``sum_i xhat_i^2 (lambda_i + eps)^rho``.
    Pass a precomputed ``spectrum`` of ``l`` to avoid re-decomposing.
    """
    if eps < 0:
        raise ParameterError(f"eps must be >= 0, got {eps}")
    spectrum = spectrum or sym_eigendecomposition(l)
    x_hat = gft(x, spectrum)
    total = float(np.sum(x_hat ** 2 * _shifted_powers(spectrum.eigenvalues, eps, rho)))
    return math.sqrt(max(total, 0.0))


def sparse_sobolev_norm(x, l: CsrMatrix, eps: float, rho: int) -> float:
    """``sqrt(x^T (L + eps I)^(rho) x)`` using the Hadamard-power term.

    For ``eps = 0`` this is only a semi-norm and may vanish for nonzero ``x``.
    """
    if eps < 0:
        raise ParameterError(f"eps must be >= 0, got {eps}")
    term = hadamard_power(add_scaled_identity(l, eps), rho)
    x = np.asarray(x, dtype=np.float64)
    quad = float(x @ spmm(term, x))
    return math.sqrt(max(quad, 0.0))


def condition_number(m, spectrum: Spectrum | None = None) -> float:
    """``|lambda_max| / |lambda_min|`` of a symmetric positive definite matrix.

    Raises :class:`IllConditionedError` when the smallest eigenvalue is at
    or below ``1e-12`` (a Laplacian's null eigenvalue makes kappa infinite).
    """
    spectrum = spectrum or sym_eigendecomposition(m)
    lo, hi = spectrum.eigenvalues[0], spectrum.eigenvalues[-1]
    if lo <= ILL_CONDITIONED:
        raise IllConditionedError(f"smallest eigenvalue {lo:.3e} <= {ILL_CONDITIONED}: condition number is unbounded")
    return abs(hi) / abs(lo)


def partial_permutation_matrix(n: int) -> np.ndarray:
    """The ``n^2 x n`` selector with a one at ``(i*n + i, i)``.

    ``P^T (S kron T) P`` equals the Hadamard product ``S o T`` for square
    ``S``, ``T``.
    """
    p = np.zeros((n * n, n))
    idx = np.arange(n)
    p[idx * n + idx, idx] = 1.0
    return p


def hadamard_spectrum_check(l, explicit_limit: int = 50) -> float:
    """Max-abs gap between ``L o L`` and its Kronecker spectral reconstruction.

    Evaluates ``P^T (U kron U)(Lam kron Lam)(U^T kron U^T) P`` from the
    eigendecomposition of ``L``. Up to ``explicit_limit`` nodes the
    Kronecker factors are formed in full; beyond that only the ``n`` rows
    the selector keeps are built.
    """
    a = _as_dense(l)
    n = a.shape[0]
    if n > 200:
        raise ParameterError(f"hadamard_spectrum_check is limited to n <= 200, got {n}")
    spec = sym_eigendecomposition(a)
    u, lam = spec.eigenvectors, spec.eigenvalues
    if n <= explicit_limit:
        p = partial_permutation_matrix(n)
        uu = np.kron(u, u)
        ll = np.kron(lam, lam)  # diagonal of Lam kron Lam
        recon = p.T @ (uu * ll) @ np.kron(u.T, u.T) @ p
    else:
        # Row i*n+i of U kron U is kron(U[i], U[i]).
        rows = np.einsum("ia,ib->iab", u, u).reshape(n, n * n)
        recon = (rows * np.kron(lam, lam)) @ rows.T
    return float(np.max(np.abs(recon - a * a)))


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / denom) if denom else 0.0


def _max_normalize(values: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(values))
    return values / peak if peak > 0 else values.copy()


def penalization_curves(l: CsrMatrix, rho_list) -> PenalizationTable:
    """Normalized eigenvalue penalizations of ``L^rho`` versus ``L^(rho)``.

    The non-sparse curve is ``lambda_i^rho`` over the spectrum of ``L``;
    the sparse curve is the spectrum of the Hadamard power ``L^(rho)``.
    Each is sorted ascending and divided by its largest magnitude.
    """
    rho_values = tuple(int(r) for r in rho_list)
    base = sym_eigendecomposition(l)
    lam = base.eigenvalues
    nonsparse, sparse = {}, {}
    for rho in rho_values:
        nonsparse[rho] = _max_normalize(np.sort(lam ** rho))
        sparse_eigs = sym_eigendecomposition(hadamard_power(l, rho)).eigenvalues
        sparse[rho] = _max_normalize(np.sort(sparse_eigs))
    return PenalizationTable(rho_values, nonsparse, sparse, base.eigenvalues)
