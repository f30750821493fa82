import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gpboundary.sep_kernel import (
    EIGENVALUE_FLOOR,
    KernelSpec,
    basis_matrix,
    eigen_system,
    eigenvalues,
    kernel_value,
    pve,
    tail_mass,
    truncated_kernel,
)

mpmath.mp.dps = 40


def mp_eigen(a, j):
    x = 2 * a * a
    return float(mpmath.exp(-x) * mpmath.besseli(j, x))


def test_kernel_spec_validation():
    spec = KernelSpec(a=1.5, tau=10, J=4)
    assert spec.L == 9
    for bad in (dict(a=0), dict(tau=-1), dict(J=0), dict(J=2.5)):
        with pytest.raises(ValueError):
            KernelSpec(**bad)


class TestKernelValue:
    def test_examples(self):
        assert kernel_value(1, 0.3, 0.3) == 1.0
        assert kernel_value(1, 0, 0.5) == pytest.approx(math.exp(-4), rel=1e-14)
        assert kernel_value(2, 0.1, 0.35) == pytest.approx(math.exp(-8), rel=1e-12)
        assert kernel_value(2, 0.1, 0.35) == pytest.approx(3.3546e-4, rel=1e-4)

    @given(a=st.floats(0.05, 20), t1=st.floats(0, 1), t2=st.floats(0, 1), shift=st.integers(-3, 3))
    def test_stationary_and_symmetric(self, a, t1, t2, shift):
        k = kernel_value(a, t1, t2)
        assert 0 < k <= 1 or k == 0.0
        assert kernel_value(a, t2, t1) == pytest.approx(k, abs=1e-15)
        assert kernel_value(a, t1 + shift, t2) == pytest.approx(k, abs=1e-9)
        assert kernel_value(a, (t1 - t2) % 1.0, 0.0) == pytest.approx(k, abs=1e-9)

    @pytest.mark.parametrize("a", [0.5, 2, 8])
    def test_gram_matrix_positive_semidefinite(self, a):
        t = np.arange(50) / 50
        gram = kernel_value(a, t[:, None], t[None, :])
        assert np.linalg.eigvalsh(gram).min() >= -1e-10


class TestEigenSystem:
    def test_small_scale_limit(self):
        v = eigen_system(KernelSpec(a=1e-8, J=2)).eigenvalues
        np.testing.assert_allclose(v, [1, 0, 0, 0, 0], atol=1e-15)

    def test_unit_scale_against_oracle(self):
        v = eigen_system(KernelSpec(a=1, J=2)).eigenvalues
        oracle = [mp_eigen(1, j) for j in (0, 1, 1, 2, 2)]
        np.testing.assert_allclose(v, oracle, rtol=1e-13)
        np.testing.assert_allclose(v[:3], [0.308508, 0.215269, 0.215269], atol=1e-6)
        np.testing.assert_allclose(v[3:], [0.093239, 0.093239], atol=1e-6)

    @given(a=st.floats(0.01, 15), J=st.integers(1, 30))
    def test_structure(self, a, J):
        v = eigenvalues(a, J)
        assert len(v) == 2 * J + 1
        assert np.all(v[1::2] == v[2::2])
        distinct = np.concatenate([[v[0]], v[1::2]])
        distinct = distinct[distinct > EIGENVALUE_FLOOR]
        assert np.all(np.diff(distinct) < 0)

    @pytest.mark.parametrize("a", [0.3, 1, 3, 10])
    def test_full_spectrum_sums_to_one(self, a):
        v = eigenvalues(a, 400)
        assert v.sum() == pytest.approx(1.0, abs=1e-12)

    def test_read_only(self):
        v = eigen_system(KernelSpec()).eigenvalues
        with pytest.raises(ValueError):
            v[0] = 1


class TestBasis:
    def test_rows(self):
        r2 = math.sqrt(2)
        np.testing.assert_allclose(basis_matrix([0.0], 5)[0], [1, r2, 0, r2, 0], atol=1e-15)
        np.testing.assert_allclose(basis_matrix([math.pi], 3)[0], [1, -r2, 0], atol=1e-15)

    def test_orthonormal(self):
        grid = np.arange(4096) * 2 * np.pi / 4096
        psi = basis_matrix(grid, 21)
        np.testing.assert_allclose(psi.T @ psi / len(grid), np.eye(21), atol=1e-6)

    def test_even_size_rejected(self):
        with pytest.raises(ValueError):
            basis_matrix([0.0], 4)


class TestPve:
    def test_examples(self):
        assert pve(1e-9, 1) == pytest.approx(1.0, abs=1e-12)
        assert pve(0, 1) == 1.0
        oracle = mp_eigen(1, 0) + 2 * mp_eigen(1, 1) + 2 * mp_eigen(1, 2)
        assert pve(1, 2) == pytest.approx(oracle, rel=1e-13)
        assert pve(1, 2) == pytest.approx(0.925525, abs=1e-6)

    def test_large_scale_value(self):
        # the truncated mass at a = 10 is far below 0.98 because the harmonic
        # spread grows like a; the oracle sums the first 21 eigenvalues exactly
        oracle = mp_eigen(10, 0) + 2 * sum(mp_eigen(10, j) for j in range(1, 11))
        assert pve(10, 10) == pytest.approx(oracle, rel=1e-12)
        assert pve(10, 10) == pytest.approx(0.5425, abs=1e-4)

    def test_monotone(self):
        grid = np.linspace(0.1, 10, 100)
        for J in (1, 5, 10, 20):
            values = [pve(a, J) for a in grid]
            assert np.all(np.diff(values) <= 1e-15)
        for a in (0.5, 2, 7):
            values = [pve(a, J) for J in range(1, 40)]
            assert np.all(np.diff(values) >= -1e-15)

    def test_negative_scale(self):
        with pytest.raises(ValueError):
            pve(-1, 3)


class TestTruncatedKernel:
    def test_small_scale_is_constant(self):
        spec = KernelSpec(a=1e-8, J=3)
        t = np.linspace(0, 1, 7)
        np.testing.assert_allclose(truncated_kernel(spec, t, t), 1.0, atol=1e-12)

    def test_unit_scale_j10(self):
        spec = KernelSpec(a=1, J=10)
        assert truncated_kernel(spec, 0.2, 0.7) == pytest.approx(kernel_value(1, 0.2, 0.7), abs=1e-6)

    def test_single_harmonic(self):
        spec = KernelSpec(a=1, J=1)
        value = truncated_kernel(spec, 0, 0)
        assert value == pytest.approx(0.739046, abs=1e-6)
        assert 1 - value == pytest.approx(0.260953, abs=1e-6)
        assert 1 - value == pytest.approx(2 * tail_mass(1, 1), abs=1e-12)

    @pytest.mark.parametrize("a,J", [(1, 5), (5, 10), (10, 20)])
    def test_truncation_bound(self, a, J):
        t = np.arange(64) / 64
        diff = np.abs(truncated_kernel(KernelSpec(a=a, J=J), t, t) - kernel_value(a, t[:, None], t[None, :]))
        assert diff.max() <= 2 * tail_mass(a, J) + 1e-12
