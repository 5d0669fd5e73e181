import math

import numpy as np
import pytest

from harmonic_expfam.bayes_rotation import (
    _step,
    gaussian_log_likelihood,
    log_posterior,
    map_rotation,
    posterior,
    posterior_grid,
    rotate_spectral,
    sphere_analyze,
    sphere_synthesize,
    value_and_gradient,
)
from harmonic_expfam.expfam import NaturalParams, log_unnormalized
from harmonic_expfam.special_functions import (
    ManifoldPoint,
    compose,
    design_matrix,
    geodesic_distance,
    inverse,
    num_coeffs,
    rotation_matrix,
    sphere_to_xyz,
    xyz_to_sphere,
)
from harmonic_expfam.transforms import SpectralCoeffs

from conftest import random_points


def signal(L, rng):
    return SpectralCoeffs("s2", L, rng.normal(size=(L + 1) ** 2))


def planted_pair(L, sigma, rng):
    """x = R(g0) y + noise, so the posterior mode sits at g0."""
    y = signal(L, rng)
    g0 = random_points("so3", 1, rng)[0]
    x = rotate_spectral(y, g0)
    x = SpectralCoeffs("s2", L, x.coeffs + sigma * rng.normal(size=x.coeffs.size))
    return x, y, g0


class TestRotation:
    def test_matches_pointwise_rotation(self, rng):
        L = 6
        y = signal(L, rng)
        g = random_points("so3", 1, rng)[0]
        p = random_points("s2", 30, rng)
        back = xyz_to_sphere(sphere_to_xyz(*p.T) @ rotation_matrix(*g))  # R^T p
        lhs = design_matrix("s2", L, p) @ rotate_spectral(y, g).coeffs
        rhs = design_matrix("s2", L, back) @ y.coeffs
        np.testing.assert_allclose(lhs, rhs, atol=1e-11)

    def test_norm_preserved(self, rng):
        y = signal(8, rng)
        for g in random_points("so3", 5, rng):
            assert np.linalg.norm(rotate_spectral(y, g).coeffs) == pytest.approx(np.linalg.norm(y.coeffs), rel=1e-12)

    def test_representation_property(self, rng):
        y = signal(5, rng)
        g, h = random_points("so3", 2, rng)
        twice = rotate_spectral(rotate_spectral(y, h), g)
        once = rotate_spectral(y, compose(g, h))
        np.testing.assert_allclose(twice.coeffs, once.coeffs, atol=1e-11)

    def test_inverse_undoes(self, rng):
        y = signal(5, rng)
        g = random_points("so3", 1, rng)[0]
        np.testing.assert_allclose(rotate_spectral(rotate_spectral(y, g), inverse(g)).coeffs, y.coeffs, atol=1e-11)

    def test_so3_left_translation(self, rng):
        eta = NaturalParams("so3", 3, rng.normal(size=num_coeffs("so3", 3) - 1))
        g = random_points("so3", 1, rng)[0]
        h = random_points("so3", 10, rng)
        lhs = log_unnormalized(rotate_spectral(eta, g), h)
        rhs = log_unnormalized(eta, compose(np.broadcast_to(inverse(g), h.shape), h))
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_circle_rejected(self):
        with pytest.raises(ValueError):
            rotate_spectral(SpectralCoeffs("s1", 2, np.zeros(5)), (0, 0, 0))

    def test_sphere_grid_round_trip(self, rng):
        y = signal(6, rng)
        np.testing.assert_allclose(sphere_analyze(sphere_synthesize(y, 7)).coeffs, y.coeffs, atol=1e-12)


class TestPosterior:
    def test_conjugacy(self, rng):
        for _ in range(3):
            L, sigma = 4, 0.3
            x, y = signal(L, rng), signal(L, rng)
            prior = NaturalParams("so3", 2, 0.5 * rng.normal(size=num_coeffs("so3", 2) - 1))
            post = posterior(prior, x, y, sigma)
            gs = random_points("so3", 50, rng)
            diff = [
                log_posterior(post, g) - log_posterior(prior, g) - gaussian_log_likelihood(x, y, g, sigma) for g in gs
            ]
            assert np.var(diff) <= 1e-10

    def test_blank_signal_keeps_prior(self, rng):
        prior = NaturalParams("so3", 3, rng.normal(size=num_coeffs("so3", 3) - 1))
        post = posterior(prior, SpectralCoeffs("s2", 3, np.zeros(16)), signal(3, rng), 0.2)
        np.testing.assert_array_equal(post.eta, prior.eta)

    def test_no_prior_is_flat(self, rng):
        post = posterior(None, signal(2, rng), signal(2, rng), 1.0)
        assert post.manifold.value == "so3" and post.L == 2

    def test_bandlimits_combine(self, rng):
        prior = NaturalParams("so3", 1, rng.normal(size=9))
        x, y = signal(3, rng), signal(3, rng)
        post = posterior(prior, x, y, 1.0)
        flat = posterior(None, x, y, 1.0)
        assert post.L == 3
        np.testing.assert_allclose(post.eta[:9] - prior.eta, flat.eta[:9], atol=1e-15)
        np.testing.assert_array_equal(post.eta[9:], flat.eta[9:])

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_sigma_checked(self, sigma, rng):
        with pytest.raises(ValueError):
            posterior(None, signal(2, rng), signal(2, rng), sigma)

    def test_signal_bandlimits_must_match(self, rng):
        with pytest.raises(ValueError):
            posterior(None, signal(2, rng), signal(3, rng), 1.0)

    def test_posterior_grid_normalized(self, rng):
        x, y, _ = planted_pair(3, 0.5, rng)
        f = posterior_grid(posterior(None, x, y, 2.0), 5)
        assert f.integral() == pytest.approx(1.0, abs=1e-12)


class TestMAP:
    def test_gradient_matches_finite_differences(self, rng):
        x, y, _ = planted_pair(4, 0.1, rng)
        post = posterior(None, x, y, 1.0)
        g = random_points("so3", 1, rng)[0]
        v, grad = value_and_gradient(post, g)
        assert v == pytest.approx(log_posterior(post, g), rel=1e-12)
        h = 1e-6
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd = (value_and_gradient(post, _step(g, e))[0] - value_and_gradient(post, _step(g, -e))[0]) / (2 * h)
            assert fd == pytest.approx(grad[k], rel=1e-6, abs=1e-6)

    def test_body_step_is_right_multiplication(self, rng):
        g = random_points("so3", 1, rng)[0]
        xi = np.array([0.0, 0.0, 0.3])
        np.testing.assert_allclose(rotation_matrix(*_step(g, xi)), rotation_matrix(*g) @ rotation_matrix(0.3, 0, 0), atol=1e-12)

    def test_recovers_planted_rotation(self, rng):
        x, y, g0 = planted_pair(8, 0.05, rng)
        post = posterior(None, x, y, 0.05)
        g_coarse, v0 = map_rotation(post, 16, refine_steps=0)
        g_fine, v1 = map_rotation(post, 16)
        assert geodesic_distance(g_coarse.array, g0) <= math.pi / 16
        assert geodesic_distance(g_fine.array, g0) <= 0.2 * math.pi / 16
        assert v1 >= v0
        assert isinstance(g_fine, ManifoldPoint)

    def test_search_grid_must_exceed_bandlimit(self, rng):
        post = posterior(None, signal(4, rng), signal(4, rng), 1.0)
        with pytest.raises(ValueError):
            map_rotation(post, 4)

    def test_requires_so3(self):
        with pytest.raises(ValueError):
            map_rotation(NaturalParams.zeros("s2", 2), 8)

    def test_flat_posterior_returns_first_node(self):
        g, v = map_rotation(NaturalParams.zeros("so3", 2), 4)
        assert v == 0.0
        assert g.coords == pytest.approx((0.0, math.pi / 16, 0.0))
