import math

import numpy as np
import pytest
from scipy.optimize import minimize

from harmonic_expfam.expfam import NaturalParams, empirical_moments, moments, objective
from harmonic_expfam.optimize import CVReport, FitConfig, cross_validate, fit_map, fold_labels

from conftest import random_points


def clustered_sphere(n, rng, center=(0.8, 1.5), spread=0.4):
    b = np.abs(center[0] + spread * rng.normal(size=n))
    p = center[1] + spread * rng.normal(size=n) / np.maximum(np.sin(b), 0.2)
    return np.stack([b, p], axis=1)


class TestFitConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(L=0),
            dict(L=3, oversample=0.5),
            dict(L=3, alpha_reg=-1),
            dict(L=3, reg_scheme="ridge"),
            dict(L=3, gtol=0),
            dict(L=3, history=0),
        ],
    )
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            FitConfig(**kw)

    def test_precision_off_without_scheme(self):
        assert FitConfig(L=3, alpha_reg=1.0).precision("s2") is None
        p = FitConfig(L=2, alpha_reg=0.5, reg_scheme="plancherel").precision("s2")
        np.testing.assert_allclose(p, [1.5, 1.5, 1.5, 2.5, 2.5, 2.5, 2.5, 2.5])


class TestFit:
    def test_matches_scipy_lbfgs(self, rng):
        pts = clustered_sphere(300, rng)
        cfg = FitConfig(L=4, alpha_reg=1e-3, reg_scheme="plancherel", gtol=1e-7)
        stats = empirical_moments("s2", pts, 4)
        res = fit_map(stats, cfg)
        reg = cfg.precision("s2")

        def fun(x):
            return objective(NaturalParams("s2", 4, x), stats, cfg.oversample, reg)

        ref = minimize(fun, np.zeros(res.eta.eta.size), jac=True, method="L-BFGS-B", options=dict(gtol=1e-10, ftol=1e-15))
        assert res.converged
        assert res.objective == pytest.approx(ref.fun, abs=1e-8)
        np.testing.assert_allclose(res.eta.eta, ref.x, atol=5e-5)

    @pytest.mark.parametrize("manifold,L", [("s1", 6), ("s2", 5), ("so3", 2)])
    def test_converged_fit_matches_moments(self, manifold, L, rng):
        pts = random_points(manifold, 200, rng)
        pts[:, 0] = pts[:, 0] * 0.5
        stats = empirical_moments(manifold, pts, L)
        cfg = FitConfig(L=L, alpha_reg=1e-3, reg_scheme="plancherel")
        res = fit_map(stats, cfg)
        assert res.converged and res.grad_norm <= cfg.gtol
        resid = moments(res.eta, cfg.oversample).moments - stats.mean + cfg.precision(manifold) * res.eta.eta
        assert np.max(np.abs(resid)) <= cfg.gtol
        assert all(b <= a + 1e-12 for a, b in zip(res.trace, res.trace[1:]))

    def test_perturbed_starts_agree(self, rng):
        pts = clustered_sphere(200, rng)
        cfg = FitConfig(L=5, alpha_reg=1e-3, reg_scheme="plancherel", gtol=1e-7)
        stats = empirical_moments("s2", pts, 5)
        a = fit_map(stats, cfg, init=0.3 * rng.normal(size=35))
        b = fit_map(stats, cfg, init=0.3 * rng.normal(size=35))
        assert abs(a.objective - b.objective) <= 1e-6

    def test_recovers_von_mises_concentration(self):
        rng = np.random.default_rng(7)
        kappa, mu = 2.0, 0.9
        th = np.mod(rng.vonmises(mu, kappa, 20000), 2 * np.pi)[:, None]
        res = fit_map(empirical_moments("s1", th, 1), FitConfig(L=1, oversample=6))
        k_hat = math.sqrt(2) * np.hypot(*res.eta.eta)
        mu_hat = math.atan2(res.eta.eta[1], res.eta.eta[0])
        assert k_hat == pytest.approx(kappa, abs=0.06)
        assert mu_hat == pytest.approx(mu, abs=0.03)

    def test_uniform_data_gives_near_zero_fit(self):
        th = (2 * np.pi * np.arange(64) / 64)[:, None]
        res = fit_map(empirical_moments("s1", th, 3), FitConfig(L=3))
        np.testing.assert_allclose(res.eta.eta, 0.0, atol=1e-12)
        assert res.iterations == 0

    def test_bandlimit_mismatch(self, rng):
        stats = empirical_moments("s2", random_points("s2", 10, rng), 3)
        with pytest.raises(ValueError):
            fit_map(stats, FitConfig(L=4))

    def test_peaked_data_is_stable(self, rng):
        b = 0.05 * np.sqrt(rng.uniform(0, 1, 200))
        pts = np.stack([b, rng.uniform(0, 2 * np.pi, 200)], axis=1)
        res = fit_map(empirical_moments("s2", pts, 10), FitConfig(L=10, alpha_reg=1e-3, reg_scheme="plancherel"))
        assert np.all(np.isfinite(res.eta.eta)) and math.isfinite(res.objective)

    def test_iteration_limit(self, rng):
        stats = empirical_moments("s2", clustered_sphere(100, rng), 4)
        res = fit_map(stats, FitConfig(L=4, max_iter=2))
        assert res.iterations == 2 and not res.converged


class TestCrossValidation:
    def test_fold_labels(self):
        lab = fold_labels(103, 5, seed=3)
        counts = np.bincount(lab)
        assert counts.sum() == 103 and counts.max() - counts.min() <= 1
        np.testing.assert_array_equal(lab, fold_labels(103, 5, seed=3))
        assert not np.array_equal(lab, fold_labels(103, 5, seed=4))

    @pytest.mark.parametrize("n,k", [(10, 1), (3, 5)])
    def test_fold_errors(self, n, k):
        with pytest.raises(ValueError):
            fold_labels(n, k, 0)

    def test_report(self, rng):
        pts = clustered_sphere(150, rng)
        rep = cross_validate("s2", pts, 3, [2, 3], [0.0, 1e-2], seed=1)
        assert isinstance(rep, CVReport)
        assert len(rep.records) == 3 * 2 * 2
        assert len(rep.summary()) == 4
        for r in rep.records:
            assert r.train_ll >= r.test_ll - 0.5
        assert rep.best()["test_mean"] == max(s["test_mean"] for s in rep.summary())

    def test_deterministic(self, rng):
        pts = clustered_sphere(90, rng)
        a = cross_validate("s2", pts, 3, [2], [1e-3], seed=5)
        b = cross_validate("s2", pts, 3, [2], [1e-3], seed=5)
        assert [r.test_ll for r in a.records] == [r.test_ll for r in b.records]

    def test_fold_statistics_match_direct_fit(self, rng):
        pts = clustered_sphere(60, rng)
        rep = cross_validate("s2", pts, 3, [2], [0.0], seed=2)
        lab = fold_labels(60, 3, 2)
        train = empirical_moments("s2", pts[lab != 0], 2)
        res = fit_map(train, FitConfig(L=2))
        assert rep.records[0].train_ll == pytest.approx(-res.objective, abs=1e-9)


def sample_sphere_model(eta, n, rng):
    """Rejection sampling from a sphere model with a uniform proposal."""
    from harmonic_expfam.expfam import log_unnormalized

    from conftest import random_points as uniform

    # empirical maximum with a margin; the models here are smooth
    bound = float(np.max(log_unnormalized(eta, uniform("s2", 20000, rng)))) + 0.5
    out = []
    while sum(len(o) for o in out) < n:
        cand = uniform("s2", 4 * n, rng)
        keep = rng.uniform(size=cand.shape[0]) < np.exp(log_unnormalized(eta, cand) - bound)
        out.append(cand[keep])
    return np.concatenate(out)[:n]


class TestSelfConsistency:
    def test_fit_reaches_generating_model(self):
        rng = np.random.default_rng(11)
        eta0 = NaturalParams("s2", 4, 0.3 * rng.normal(size=24))
        train, test = sample_sphere_model(eta0, 10000, rng), sample_sphere_model(eta0, 10000, rng)
        res = fit_map(empirical_moments("s2", train, 4), FitConfig(L=4))
        test_stats = empirical_moments("s2", test, 4)
        from harmonic_expfam.expfam import log_likelihood

        assert abs(log_likelihood(res.eta, test_stats) - log_likelihood(eta0, test_stats)) <= 0.05

    def test_uniform_data_selects_flat_model(self, rng):
        pts = random_points("s2", 600, rng)
        rep = cross_validate("s2", pts, 5, [1, 2, 4], [1e-1], seed=0)
        best = rep.best()
        assert abs(best["test_mean"]) < 0.02
        assert best["L"] == 1
