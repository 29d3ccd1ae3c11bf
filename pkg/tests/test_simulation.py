import numpy as np
import pytest

from tspatterns.errors import ContractError
from tspatterns.manifold import check_spd, geometric_mean, tangent_project
from tspatterns.simulation import (
    DEFAULT_GRIDS,
    SWEEP_COLUMNS,
    SimulationParams,
    cell_seed,
    gen_dataset,
    gen_mixing,
    latent_powers,
    run_sweep,
    seed_means,
    summarize_sweep,
)


class TestMixing:
    def test_zero_scale_is_identity(self):
        np.testing.assert_array_equal(gen_mixing(4, np.random.default_rng(0), 0.0),
                                      np.eye(4))

    def test_determinant(self):
        rng = np.random.default_rng(7)
        b = np.random.default_rng(7).standard_normal((5, 5))
        a = gen_mixing(5, rng)
        assert np.linalg.det(a) == pytest.approx(np.exp(np.trace(b)), rel=1e-6)

    def test_deterministic(self):
        a = gen_mixing(5, np.random.default_rng(3))
        b = gen_mixing(5, np.random.default_rng(3))
        assert a.tobytes() == b.tobytes()


class TestParams:
    def test_defaults(self):
        p = SimulationParams()
        assert (p.n_channels, p.n_sources, p.n_obs, p.weights) == (5, 1, 1000, (1.0,))

    @pytest.mark.parametrize("kw", [
        {"n_sources": 6}, {"n_sources": 2}, {"target_noise": -1.0},
        {"pattern_noise": -0.1}, {"mode": "eeg"}, {"mixing": "orthogonal"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ContractError):
            SimulationParams(**kw)


class TestDataset:
    def test_shapes_and_truth(self):
        ds = gen_dataset(SimulationParams(n_obs=50))
        assert ds.covs.shape == (50, 1, 5, 5)
        assert ds.truth.mixing.shape == (5, 5)
        assert ds.truth.n_sources == 1
        for c in ds.covs[:, 0]:
            check_spd(c)

    def test_deterministic(self):
        a = gen_dataset(SimulationParams(n_obs=30, pattern_noise=0.3, seed=4))
        b = gen_dataset(SimulationParams(n_obs=30, pattern_noise=0.3, seed=4))
        assert a.covs.tobytes() == b.covs.tobytes()
        assert a.targets.tobytes() == b.targets.tobytes()

    def test_noiseless_model(self):
        params = SimulationParams(n_obs=40, seed=9, weights=(2.0, -1.0),
                                  n_sources=2, bias=0.5)
        ds = gen_dataset(params)
        p = latent_powers(params)
        a = ds.truth.mixing
        np.testing.assert_allclose(ds.covs[:, 0], (a * p[:, None, :]) @ a.T,
                                   rtol=1e-12)
        np.testing.assert_allclose(ds.targets, np.log(p[:, :2]) @ [2, -1] + 0.5,
                                   rtol=1e-12)

    def test_zero_pattern_noise_shares_mixing(self):
        params = SimulationParams(n_obs=20, seed=2)
        ds = gen_dataset(params)
        p = latent_powers(params)
        a = ds.truth.mixing
        # every C_i = A E_i A^T with the same A
        e = np.linalg.solve(a, np.linalg.solve(a, ds.covs[:, 0]).swapaxes(1, 2))
        np.testing.assert_allclose(e, np.eye(5) * p[:, None, :], atol=1e-8)

    def test_pattern_noise_perturbs(self):
        clean = gen_dataset(SimulationParams(n_obs=20, seed=2))
        noisy = gen_dataset(SimulationParams(n_obs=20, seed=2, pattern_noise=0.5))
        assert not np.allclose(clean.covs, noisy.covs)

    def test_target_noise(self):
        params = SimulationParams(n_obs=2000, seed=2, target_noise=0.5)
        ds = gen_dataset(params)
        resid = ds.targets - np.log(latent_powers(params)[:, 0])
        assert resid.std() == pytest.approx(0.5, rel=0.1)

    def test_generative_consistency(self):
        # tangent vectors of the exact sources at their geometric mean are
        # linear in the log powers, hence in y
        params = SimulationParams(n_obs=200, n_sources=2, weights=(1.5, -0.5),
                                  bias=2.0, seed=6)
        ds = gen_dataset(params)
        e = np.eye(5) * latent_powers(params)[:, None, :]
        for covs in (e, ds.covs[:, 0]):
            v = tangent_project(covs, geometric_mean(covs, tol=1e-12, max_iter=200))
            design = np.column_stack([v, np.ones(len(v))])
            coef = np.linalg.lstsq(design, ds.targets, rcond=None)[0]
            assert np.max(np.abs(design @ coef - ds.targets)) < 1e-8

    def test_timeseries_mode(self):
        params = SimulationParams(n_obs=300, mode="timeseries", n_times=2000, seed=1)
        ds = gen_dataset(params)
        p = latent_powers(params)
        a = ds.truth.mixing
        expected = (a * p[:, None, :]) @ a.T
        rel = np.linalg.norm(ds.covs[:, 0] - expected, axis=(1, 2)) / \
            np.linalg.norm(expected, axis=(1, 2))
        assert np.median(rel) < 0.1

    def test_identity_mixing(self):
        ds = gen_dataset(SimulationParams(n_obs=10, mixing="identity"))
        off = ds.covs[:, 0] - np.eye(5) * np.diagonal(ds.covs[:, 0], axis1=1, axis2=2)[:, None]
        np.testing.assert_array_equal(off, 0)


class TestSweep:
    def test_cell_seeds_distinct(self):
        seeds = {cell_seed(s, a, i) for s in range(3) for a in DEFAULT_GRIDS
                 for i in range(7)}
        assert len(seeds) == 3 * 2 * 7

    def test_small_sweep(self):
        base = SimulationParams(n_obs=100)
        rows = run_sweep("target_noise", grid=(0.0, 1.0), methods=("riemann", "dummy"),
                         n_folds=3, seeds=(0, 1), base=base)
        assert len(rows) == 2 * 2 * 2 * 3
        assert all(set(r) == set(SWEEP_COLUMNS) for r in rows)
        assert all(r["status"] == "ok" for r in rows)
        summary = summarize_sweep(rows)
        np.testing.assert_allclose(summary["dummy"][1], 1.0)
        assert summary["riemann"][1][0] < 0.05
        assert seed_means(rows, "riemann", 0.0).shape == (2,)
        again = run_sweep("target_noise", grid=(0.0, 1.0), methods=("riemann", "dummy"),
                          n_folds=3, seeds=(0, 1), base=base, n_jobs=2)
        assert repr(again) == repr(rows)

    def test_errors_recorded(self):
        rows = run_sweep("pattern_noise", grid=(0.0,), methods=("csp",), n_folds=2,
                         seeds=(0,), base=SimulationParams(n_obs=20))
        assert all(r["status"].startswith("error:ContractError") for r in rows)

    def test_bad_axis(self):
        with pytest.raises(ContractError):
            run_sweep("sigma")
