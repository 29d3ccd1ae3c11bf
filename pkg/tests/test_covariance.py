import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_spd
from tspatterns.covariance import (
    apply_reducer,
    oas_coefficient,
    oas_shrinkage,
    pca_reducer,
    sample_covariance,
)
from tspatterns.errors import DegenerateInputError, ShapeError


def oas_rho_scalar(diag_or_matrix, n):
    """Scalar evaluation of the Chen et al. OAS intensity from traces."""
    m = [list(map(float, row)) for row in diag_or_matrix]
    p = len(m)
    tr = sum(m[i][i] for i in range(p))
    tr2 = sum(m[i][j] * m[j][i] for i in range(p) for j in range(p))
    num = (1 - 2 / p) * tr2 + tr * tr
    den = (n + 1 - 2 / p) * (tr2 - tr * tr / p)
    return 1.0 if den <= 0 else min(1.0, max(0.0, num / den))


class TestSampleCovariance:
    def test_examples(self):
        np.testing.assert_allclose(sample_covariance([[1.0, -1.0], [2.0, -2.0]]),
                                   [[1, 2], [2, 4]])
        np.testing.assert_allclose(sample_covariance(np.eye(3)), np.eye(3) / 3)
        np.testing.assert_allclose(sample_covariance([[3.0, 4.0]]), [[12.5]])

    def test_empty(self):
        with pytest.raises(DegenerateInputError):
            sample_covariance(np.zeros((3, 0)))

    def test_congruence(self, rng):
        x = rng.standard_normal((4, 50))
        w = rng.standard_normal((3, 4))
        np.testing.assert_allclose(sample_covariance(w @ x),
                                   w @ sample_covariance(x) @ w.T, atol=1e-12)

    def test_psd(self, rng):
        x = rng.standard_normal((5, 3))  # rank deficient
        assert np.linalg.eigvalsh(sample_covariance(x)).min() > -1e-12


class TestOAS:
    def test_identity_fixed_point(self):
        for p in (1, 2, 5):
            for n in (1, 10, 1000):
                np.testing.assert_allclose(oas_shrinkage(np.eye(p), n), np.eye(p))

    def test_rank_one(self):
        c = np.diag([1.0, 0.0])
        rho = oas_coefficient(c, 2)
        assert rho == pytest.approx(oas_rho_scalar(c, 2), abs=1e-15)
        assert rho == pytest.approx(1.0)  # (0*1 + 1) / (2 * 0.5)
        out = oas_shrinkage(c, 2)
        assert np.linalg.eigvalsh(out).min() > 0

    def test_matches_scalar_oracle(self, rng):
        for _ in range(20):
            x = rng.standard_normal((4, 6))
            c = sample_covariance(x)
            for n in (2, 6, 50):
                assert oas_coefficient(c, n) == pytest.approx(oas_rho_scalar(c, n),
                                                              rel=1e-12, abs=1e-15)

    def test_monotone_in_n(self):
        c = np.diag([3.0, 1.0, 0.5, 0.0])
        rhos = [oas_coefficient(c, n) for n in range(2, 1001)]
        oracle = [oas_rho_scalar(c, n) for n in range(2, 1001)]
        np.testing.assert_allclose(rhos, oracle, rtol=1e-12)
        assert np.all(np.diff(rhos) <= 0)

    def test_zero_trace(self):
        with pytest.raises(DegenerateInputError):
            oas_shrinkage(np.zeros((3, 3)), 10)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 20))
    def test_output_spd(self, seed, p, t):
        x = np.random.default_rng(seed).standard_normal((p, t))
        c = sample_covariance(x)
        out = oas_shrinkage(c, t)
        np.testing.assert_allclose(out, out.T)
        assert np.linalg.eigvalsh(out).min() > 0


class TestPCA:
    def test_axis_aligned(self):
        r = pca_reducer(np.diag([3.0, 2.0, 1.0])[None], 2)
        np.testing.assert_allclose(np.abs(r.filters), np.eye(3)[:, :2])
        np.testing.assert_allclose(apply_reducer(np.diag([3.0, 2.0, 1.0]), r),
                                   np.diag([3.0, 2.0]))

    def test_full_rank_invertible(self, rng):
        cs = random_spd(rng, 4, n=10)
        r = pca_reducer(cs, 4)
        np.testing.assert_allclose(r.filters.T @ r.filters, np.eye(4), atol=1e-10)
        reduced = apply_reducer(cs[0], r)
        np.testing.assert_allclose(r.filters @ reduced @ r.filters.T, cs[0], atol=1e-10)

    def test_tie_deterministic(self):
        c = np.diag([2.0, 1.0, 1.0])
        a = pca_reducer(c[None], 2).filters
        b = pca_reducer(c[None], 2).filters
        np.testing.assert_array_equal(a, b)
        assert abs(a[0, 0]) == pytest.approx(1.0)

    def test_identity_reducer(self, rng):
        c = random_spd(rng, 3)
        from tspatterns.covariance import SpatialReducer
        np.testing.assert_allclose(apply_reducer(c, SpatialReducer(np.eye(3))), c)

    def test_out_of_range(self):
        with pytest.raises(ShapeError):
            pca_reducer(np.eye(3)[None], 0)
        with pytest.raises(ShapeError):
            pca_reducer(np.eye(3)[None], 4)

    def test_reduced_mean_spectrum(self, rng):
        cs = random_spd(rng, 6, cond=1e3, n=20)
        r = pca_reducer(cs, 3)
        top = np.sort(np.linalg.eigvalsh(cs.mean(0)))[::-1][:3]
        got = np.sort(np.linalg.eigvalsh(apply_reducer(cs, r).mean(0)))[::-1]
        np.testing.assert_allclose(got, top, rtol=1e-9)
        x = rng.standard_normal((6, 3))
        assert np.linalg.eigvalsh(apply_reducer(sample_covariance(x), r)).min() > -1e-12
