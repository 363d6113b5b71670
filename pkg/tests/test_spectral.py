import numpy as np
import pytest
import scipy.linalg
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from graphs import random_geometric_graph, random_weighted_graph, triangle
from sobgnn.errors import DimensionError, DomainError, IllConditionedError, ParameterError
from sobgnn.sparse_core import CsrMatrix, add_scaled_identity, hadamard_power, identity, laplacian
from sobgnn.spectral import (
    condition_number,
    cosine_similarity,
    gft,
    hadamard_spectrum_check,
    igft,
    jacobi_eigh,
    partial_permutation_matrix,
    penalization_curves,
    sobolev_norm,
    sparse_sobolev_norm,
    sym_eigendecomposition,
)


def exact_eigenvalues(dense) -> list[float]:
    """Eigenvalues with multiplicity from sympy's exact characteristic polynomial."""
    m = sympy.Matrix(np.asarray(dense, dtype=int).tolist())
    out = []
    for value, mult in m.eigenvals().items():
        out.extend([float(value)] * mult)
    return sorted(out)


class TestEigendecomposition:
    def test_identity(self):
        spec = sym_eigendecomposition(identity(5))
        np.testing.assert_allclose(spec.eigenvalues, 1.0, rtol=0, atol=1e-15)

    def test_path_laplacian(self):
        lap = laplacian(CsrMatrix.from_dense([[0, 1], [1, 0]]))
        want = exact_eigenvalues(lap.to_dense())
        assert want == [0.0, 2.0]
        np.testing.assert_allclose(sym_eigendecomposition(lap).eigenvalues, want, atol=1e-14)

    def test_triangle_laplacian(self):
        lap = laplacian(triangle())
        want = exact_eigenvalues(lap.to_dense())
        assert want == [0.0, 3.0, 3.0]
        np.testing.assert_allclose(sym_eigendecomposition(lap).eigenvalues, want, atol=1e-14)

    @pytest.mark.parametrize("n", [6, 11])
    def test_cycle_laplacian_closed_form(self, n):
        idx = np.arange(n)
        a = np.zeros((n, n))
        a[idx, (idx + 1) % n] = a[(idx + 1) % n, idx] = 1.0
        lap = laplacian(CsrMatrix.from_dense(a))
        want = np.sort(2 - 2 * np.cos(2 * np.pi * idx / n))
        np.testing.assert_allclose(sym_eigendecomposition(lap).eigenvalues, want, atol=1e-13)

    @pytest.mark.parametrize("seed", range(6))
    def test_jacobi_matches_lapack(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 60))
        lap = laplacian(random_weighted_graph(n, rng)).to_dense()
        vals, vecs = jacobi_eigh(lap)
        np.testing.assert_allclose(np.sort(vals), np.linalg.eigvalsh(lap), atol=1e-11)
        np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.T, lap, atol=1e-11)
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-12)

    def test_spectrum_invariants(self):
        lap = laplacian(random_weighted_graph(20, np.random.default_rng(1)))
        for method in ("jacobi", "lapack"):
            spec = sym_eigendecomposition(lap, method=method)
            assert np.all(np.diff(spec.eigenvalues) >= 0)
            np.testing.assert_allclose(spec.reconstruct(), lap.to_dense(), atol=1e-12)
            np.testing.assert_allclose(spec.eigenvectors.T @ spec.eigenvectors, np.eye(20), atol=1e-12)

    def test_asymmetric_rejected(self):
        with pytest.raises(DomainError):
            sym_eigendecomposition(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_size_cap(self):
        with pytest.raises(ParameterError):
            sym_eigendecomposition(np.eye(10), size_cap=5)

    def test_single_node(self):
        spec = sym_eigendecomposition(np.array([[2.5]]))
        np.testing.assert_array_equal(spec.eigenvalues, [2.5])


class TestGft:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        spec = sym_eigendecomposition(laplacian(random_weighted_graph(15, rng)))
        x = rng.normal(size=15)
        np.testing.assert_allclose(igft(gft(x, spec), spec), x, atol=1e-13)

    def test_eigenvector_is_unit_coefficient(self):
        spec = sym_eigendecomposition(laplacian(random_weighted_graph(8, np.random.default_rng(2))))
        want = np.zeros(8)
        want[5] = 1.0
        np.testing.assert_allclose(gft(spec.eigenvectors[:, 5], spec), want, atol=1e-13)

    def test_length_mismatch(self):
        spec = sym_eigendecomposition(identity(3))
        with pytest.raises(DimensionError):
            gft(np.ones(4), spec)


class TestSobolevNorm:
    def test_constant_signal_sees_only_shift(self):
        lap = laplacian(random_weighted_graph(10, np.random.default_rng(0)))
        for eps, rho in [(0.5, 1), (2.0, 3), (1.5, 2.5)]:
            got = sobolev_norm(np.ones(10), lap, eps, rho)
            assert got == pytest.approx(np.sqrt(eps ** rho * 10), rel=1e-12)

    def test_rho_zero_is_euclidean(self):
        rng = np.random.default_rng(1)
        lap = laplacian(random_weighted_graph(12, rng))
        x = rng.normal(size=12)
        assert sobolev_norm(x, lap, 0.7, 0) == pytest.approx(np.linalg.norm(x), rel=1e-13)

    def test_eigenvector(self):
        lap = laplacian(random_weighted_graph(9, np.random.default_rng(3)))
        spec = sym_eigendecomposition(lap)
        for i in (0, 4, 8):
            got = sobolev_norm(spec.eigenvectors[:, i], lap, 1.0, 2, spectrum=spec)
            assert got == pytest.approx(spec.eigenvalues[i] + 1.0, rel=1e-12)

    @pytest.mark.parametrize("rho", [0, 1, 2, 3])
    def test_matches_matrix_power_quadratic_form(self, rho):
        rng = np.random.default_rng(rho)
        lap = laplacian(random_weighted_graph(14, rng)).to_dense()
        x = rng.normal(size=14)
        m = np.linalg.matrix_power(lap + 0.5 * np.eye(14), rho)
        assert sobolev_norm(x, lap, 0.5, rho) == pytest.approx(np.sqrt(x @ m @ x), rel=1e-10)

    def test_fractional_power_against_schur_sqrtm(self):
        rng = np.random.default_rng(11)
        lap = laplacian(random_weighted_graph(14, rng)).to_dense()
        shifted = lap + 0.5 * np.eye(14)
        m = shifted @ scipy.linalg.sqrtm(shifted).real  # power 1.5
        x = rng.normal(size=14)
        assert sobolev_norm(x, lap, 0.5, 1.5) == pytest.approx(np.sqrt(x @ m @ x), rel=1e-10)

    def test_negative_eps(self):
        with pytest.raises(ParameterError):
            sobolev_norm(np.ones(3), laplacian(triangle()), -0.1, 1)


class TestSparseSobolevNorm:
    def test_rho_one_agrees_with_spectral_norm(self):
        rng = np.random.default_rng(4)
        lap = laplacian(random_weighted_graph(16, rng))
        x = rng.normal(size=16)
        assert sparse_sobolev_norm(x, lap, 1.0, 1) == pytest.approx(sobolev_norm(x, lap, 1.0, 1), rel=1e-12)

    def test_matches_dense_elementwise_power(self):
        rng = np.random.default_rng(5)
        lap = laplacian(random_weighted_graph(10, rng)).to_dense()
        x = rng.normal(size=10)
        m = (lap + 0.5 * np.eye(10)) ** 3
        got = sparse_sobolev_norm(x, CsrMatrix.from_dense(lap), 0.5, 3)
        assert got == pytest.approx(np.sqrt(x @ m @ x), rel=1e-12)

    def test_eps_zero_is_semi_norm(self):
        assert sparse_sobolev_norm(np.ones(3), laplacian(triangle()), 0.0, 1) == 0.0

    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 1.0]), st.integers(1, 3))
    @settings(max_examples=40, deadline=None)
    def test_norm_axioms(self, seed, eps, rho):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 15))
        lap = laplacian(random_weighted_graph(n, rng))
        x, y = rng.normal(size=n), rng.normal(size=n)
        c = float(rng.normal() * 3)
        nx, ny = sparse_sobolev_norm(x, lap, eps, rho), sparse_sobolev_norm(y, lap, eps, rho)
        assert nx > 0
        assert sparse_sobolev_norm(c * x, lap, eps, rho) == pytest.approx(abs(c) * nx, rel=1e-12)
        assert sparse_sobolev_norm(x + y, lap, eps, rho) <= (nx + ny) * (1 + 1e-12)


class TestConditionNumber:
    def test_identity(self):
        assert condition_number(np.eye(4)) == 1.0

    def test_triangle_shifted(self):
        # Spectrum of L is {0, 3, 3}; shifting by one gives {1, 4, 4}.
        m = add_scaled_identity(laplacian(triangle()), 1.0)
        assert condition_number(m) == pytest.approx(4.0, rel=1e-14)

    def test_closed_form_and_monotone(self):
        lap = laplacian(random_weighted_graph(20, np.random.default_rng(7)))
        lam_max = np.linalg.eigvalsh(lap.to_dense())[-1]
        kappas = []
        for eps in (0.1, 0.5, 1.0, 2.0, 4.0):
            kappa = condition_number(add_scaled_identity(lap, eps))
            assert kappa == pytest.approx((lam_max + eps) / eps, rel=1e-10)
            kappas.append(kappa)
        assert np.all(np.diff(kappas) < 0)

    def test_bare_laplacian_is_ill_conditioned(self):
        with pytest.raises(IllConditionedError):
            condition_number(laplacian(triangle()))


class TestHadamardSpectrum:
    def test_selector_shape(self):
        p = partial_permutation_matrix(3)
        assert p.shape == (9, 3)
        np.testing.assert_array_equal(np.flatnonzero(p.sum(axis=1)), [0, 4, 8])

    def test_selector_compresses_kronecker(self):
        rng = np.random.default_rng(0)
        s, t = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        p = partial_permutation_matrix(4)
        np.testing.assert_allclose(p.T @ np.kron(s, t) @ p, s * t, atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_small_graphs(self, seed):
        rng = np.random.default_rng(seed)
        lap = laplacian(random_weighted_graph(int(rng.integers(4, 13)), rng))
        scale = np.max(lap.values ** 2)
        assert hadamard_spectrum_check(lap) <= 1e-13 * scale

    def test_compressed_route_agrees_with_explicit(self):
        lap = laplacian(random_weighted_graph(20, np.random.default_rng(9)))
        scale = 20 * np.max(lap.values ** 2)  # rounding grows with n
        explicit = hadamard_spectrum_check(lap, explicit_limit=50)
        compressed = hadamard_spectrum_check(lap, explicit_limit=0)
        assert explicit <= 1e-13 * scale and compressed <= 1e-13 * scale
        assert abs(explicit - compressed) <= 1e-13 * scale

    def test_too_large(self):
        with pytest.raises(ParameterError):
            hadamard_spectrum_check(np.eye(201))


class TestPenalizationCurves:
    def test_rho_one_curves_coincide(self):
        lap = laplacian(random_weighted_graph(12, np.random.default_rng(0)))
        table = penalization_curves(lap, [1, 2])
        np.testing.assert_array_equal(table.nonsparse[1], table.sparse[1])
        assert table.similarity(1) == pytest.approx(1.0)

    def test_curves_are_normalized_and_sorted(self):
        lap = laplacian(random_geometric_graph(30, np.random.default_rng(1)))
        table = penalization_curves(lap, [2, 3])
        for rho in (2, 3):
            for curve in (table.nonsparse[rho], table.sparse[rho]):
                assert np.max(np.abs(curve)) == pytest.approx(1.0)
                assert np.all(np.diff(curve) >= 0)

    def test_sparse_curve_is_hadamard_spectrum(self):
        lap = laplacian(random_weighted_graph(10, np.random.default_rng(2)))
        table = penalization_curves(lap, [3])
        eigs = np.linalg.eigvalsh(hadamard_power(lap, 3).to_dense())
        np.testing.assert_allclose(table.sparse[3], eigs / np.max(np.abs(eigs)), atol=1e-12)

    def test_cosine_similarity(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0
        assert cosine_similarity([1, 2], [2, 4]) == pytest.approx(1.0)
        assert cosine_similarity([0, 0], [1, 1]) == 0.0
