import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_spd
from tspatterns.dataset import CovarianceDataset
from tspatterns.errors import ContractError, DegenerateInputError, ShapeError
from tspatterns.manifold import gen_eig, tangent_project, tangent_unproject
from tspatterns.patterns import (
    band_tangent_patterns,
    component_patterns,
    estimate_num_sources,
    extract_patterns,
    haufe_tangent_pattern,
    pattern_distance,
    patterns_from_tangent,
    predict_eigenvalues,
    raw_weights,
    relevance,
    source_strength,
)
from tspatterns.pipelines import fit_riemann, fit_spoc, transform
from tspatterns.simulation import SimulationParams, gen_dataset


@pytest.fixture(scope="module")
def noiseless():
    return gen_dataset(SimulationParams(n_obs=1000, seed=11))


class TestHaufe:
    def test_identity_cov(self):
        b = np.array([1.0, 2.0, -2.0])
        tp = haufe_tangent_pattern(b, np.eye(3))
        np.testing.assert_allclose(tp.pattern, b / 9.0)

    def test_diag(self):
        tp = haufe_tangent_pattern([1.0, 0.0], np.diag([4.0, 1.0]))
        np.testing.assert_allclose(tp.pattern, [1.0, 0.0])
        assert tp.sigma_yhat_sq == 4.0

    def test_inner_product(self, rng):
        for _ in range(50):
            d = rng.integers(1, 20)
            x = rng.standard_normal((d + 3, d))
            b = rng.standard_normal(d)
            tp = haufe_tangent_pattern(b, x.T @ x)
            assert b @ tp.pattern == pytest.approx(1.0, abs=1e-10)

    def test_zero_weights(self):
        with pytest.raises(DegenerateInputError):
            haufe_tangent_pattern(np.zeros(3), np.eye(3))

    def test_shape(self):
        with pytest.raises(ShapeError):
            haufe_tangent_pattern(np.ones(3), np.eye(2))


class TestPredictEigenvalues:
    def test_examples(self):
        np.testing.assert_allclose(predict_eigenvalues([2.0, 0.0], 2, 3),
                                   [np.exp(0.5), 1, 1])
        np.testing.assert_allclose(predict_eigenvalues([1.0], 1, 1), [np.e])

    def test_scaling(self):
        b = np.array([2.0, -1.0])
        for c in (0.5, 3.0):
            np.testing.assert_allclose(np.log(predict_eigenvalues(c * b, 2, 2)),
                                       np.log(predict_eigenvalues(b, 2, 2)) / c)


class TestPatternDistance:
    def test_examples(self):
        assert pattern_distance([1, 0], [3, 0]) == 0
        assert pattern_distance([1, 0], [-1, 0]) == 0
        assert pattern_distance([1, 0], [0, 1]) == 1
        assert pattern_distance([1, 0], np.array([1, 1]) / np.sqrt(2)) == \
            pytest.approx(1 - 1 / np.sqrt(2))

    def test_zero(self):
        with pytest.raises(ContractError):
            pattern_distance([0, 0], [1, 0])

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, 4, elements=st.floats(-10, 10)),
           arrays(np.float64, 4, elements=st.floats(-10, 10)),
           st.floats(0.01, 100), st.sampled_from([-1.0, 1.0]))
    def test_symmetric_and_scale_free(self, a, b, c, sign):
        if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
            return
        d = pattern_distance(a, b)
        assert 0 <= d <= 1
        assert pattern_distance(b, a) == pytest.approx(d, abs=1e-12)
        assert pattern_distance(sign * c * a, b) == pytest.approx(d, abs=1e-9)


class TestRelevance:
    def test_inversion_invariant(self, rng):
        lam = np.exp(rng.standard_normal(10))
        np.testing.assert_allclose(relevance(lam), relevance(1 / lam))


class TestExtract:
    def test_noiseless_recovery(self, noiseless):
        model = fit_riemann(noiseless)
        band = extract_patterns(model, noiseless)[0]
        truth = noiseless.truth.source_patterns[:, 0]
        assert pattern_distance(truth, band.patterns[:, 0]) < 0.02
        assert band.eigenvalues[0] == pytest.approx(np.e, rel=0.05)
        assert np.all(relevance(band.eigenvalues[1:]) < 1.1)
        np.testing.assert_allclose(np.linalg.norm(band.patterns, axis=0), 1,
                                   atol=1e-12)
        assert sorted(band.order.tolist()) == list(range(5))
        assert np.all(np.diff(relevance(band.eigenvalues)) <= 0)

    def test_raw_weight_identity(self, noiseless):
        model = fit_riemann(noiseless)
        feats = transform(model, noiseless)
        tp = band_tangent_patterns(model, feats)[0]
        assert raw_weights(model) @ tp.pattern == pytest.approx(1, abs=1e-10)
        # raw weights reproduce the standardized decision function
        z = model.standardizer.transform(feats)
        np.testing.assert_allclose(
            feats @ raw_weights(model),
            z @ model.head.weights + model.standardizer.means / model.standardizer.stds
            @ model.head.weights, atol=1e-8)

    def test_filters_are_not_patterns(self, noiseless):
        band = extract_patterns(fit_riemann(noiseless), noiseless)[0]
        truth = noiseless.truth.source_patterns[:, 0]
        inv_t = np.linalg.inv(noiseless.truth.mixing).T[:, 0]
        assert pattern_distance(truth, band.patterns[:, 0]) < 1e-8
        assert pattern_distance(inv_t, band.filters[:, 0]) < 1e-8
        assert pattern_distance(truth, band.filters[:, 0]) > 0.05

    def test_pca_patterns_in_channel_space(self, noiseless):
        model = fit_riemann(noiseless, n_components=3)
        band = extract_patterns(model, noiseless)[0]
        assert band.patterns.shape == (5, 3)

    def test_zero_weights(self, rng):
        c = random_spd(rng, 3)
        ds = CovarianceDataset(covs=np.broadcast_to(c, (20, 3, 3)).copy(),
                               targets=rng.standard_normal(20))
        with pytest.raises(DegenerateInputError):
            extract_patterns(fit_riemann(ds), ds)

    def test_wrong_method(self, noiseless):
        with pytest.raises(ContractError):
            extract_patterns(fit_spoc(noiseless), noiseless)

    def test_congruence_oracle(self, rng):
        # C_i = A diag(p_i) A^T with y = log p_1: the pattern is A e_1
        a = rng.standard_normal((4, 4)) + 3 * np.eye(4)
        p = np.exp(rng.standard_normal((300, 4)))
        covs = (a * p[:, None, :]) @ a.T
        ref = a @ np.diag(np.exp(np.log(p).mean(0))) @ a.T
        v = tangent_project(covs, ref)
        b = np.linalg.lstsq(v - v.mean(0), np.log(p[:, 0]) - np.log(p[:, 0]).mean(),
                            rcond=None)[0]
        cv = np.cov(v, rowvar=False, bias=True)
        tp = haufe_tangent_pattern(b, cv)
        pats, log_evals, _, _ = patterns_from_tangent(tp.pattern, ref)
        assert pattern_distance(a[:, 0], pats[:, 0]) < 1e-6
        assert np.exp(log_evals[0]) == pytest.approx(np.e, rel=0.05)

    def test_matches_explicit_gen_eig(self, rng):
        for p in (2, 4, 6):
            ref = random_spd(rng, p, cond=30)
            d = rng.standard_normal(p * (p + 1) // 2)
            pats, log_evals, order, filters = patterns_from_tangent(d, ref)
            evals, evecs = gen_eig(tangent_unproject(d, ref), ref)
            np.testing.assert_allclose(np.sort(np.exp(log_evals)), np.sort(evals),
                                       rtol=1e-9)
            np.testing.assert_allclose(filters.T @ ref @ filters, np.eye(p), atol=1e-9)
            c_d = tangent_unproject(d, ref)
            np.testing.assert_allclose(c_d @ filters,
                                       ref @ filters * np.exp(log_evals), atol=1e-8)
            expected = ref @ evecs
            for j in range(p):
                k = np.argmin(np.abs(evals - np.exp(log_evals[j])))
                assert pattern_distance(expected[:, k], pats[:, j]) < 1e-9

    def test_long_pattern_does_not_overflow(self, rng):
        ref = random_spd(rng, 3)
        d = 1e4 * rng.standard_normal(6)
        _, log_evals, _, _ = patterns_from_tangent(d, ref)
        assert np.all(np.isfinite(log_evals))


class TestComponentPatterns:
    def _pipeline(self, filters, reference):
        from tspatterns.pipelines import BandModel, FittedPipeline
        from tspatterns.linmodel import LinearHead, Standardizer

        k = filters.shape[1]
        band = BandModel(reference=reference, filters=filters,
                         eigenvalues=np.linspace(2, 1, k))
        return FittedPipeline(method="spoc", n_channels=filters.shape[0],
                              bands=(band,),
                              standardizer=Standardizer(np.zeros(k), np.ones(k)),
                              head=LinearHead(np.ones(k), 0.0, "ridge", 1.0),
                              offsets=(0,))

    def test_orthogonal_identity(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        pats = component_patterns(self._pipeline(q, np.eye(4)))[0].patterns
        assert all(pattern_distance(q[:, j], pats[:, j]) < 1e-12 for j in range(4))

    def test_inverse_transpose(self, rng):
        w = rng.standard_normal((4, 4))
        ref = random_spd(rng, 4)
        pats = component_patterns(self._pipeline(w, ref))[0].patterns
        target = np.linalg.inv(w).T
        assert all(pattern_distance(target[:, j], pats[:, j]) < 1e-10
                   for j in range(4))

    def test_spoc_identity_mixing(self):
        ds = gen_dataset(SimulationParams(mixing="identity", n_obs=500, seed=2))
        band = component_patterns(fit_spoc(ds), ds)[0]
        assert pattern_distance(np.eye(5)[:, 0], band.patterns[:, 0]) < 0.05


class TestShuffle:
    def test_zero_shuffles(self, noiseless):
        with pytest.raises(ContractError):
            estimate_num_sources(fit_riemann(noiseless), noiseless, n_shuffles=0)

    def test_noiseless(self):
        ds = gen_dataset(SimulationParams(n_obs=300, seed=5))
        res = estimate_num_sources(fit_riemann(ds), ds, n_shuffles=20, seed=1)
        assert res.q_hat == (1,)
        assert res.null_maxima.shape == (20, 1)

    def test_strength_scale_free(self):
        lam = np.exp([0.5, -0.2, 0.01])
        np.testing.assert_allclose(source_strength("riemann", lam),
                                   source_strength("riemann", lam ** 7))
        assert np.linalg.norm(source_strength("spoc", [3.0, -1.0])) == \
            pytest.approx(1.0)
