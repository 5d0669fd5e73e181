import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation
from scipy.special import factorial, sph_harm_y

from harmonic_expfam.special_functions import (
    BasisIndex,
    Manifold,
    ManifoldPoint,
    block_offset,
    compose,
    design_matrix,
    eval_basis,
    eval_basis_block,
    euler_from_matrix,
    geodesic_distance,
    index_arrays,
    inverse,
    iter_wigner_d_complex,
    num_coeffs,
    rotation_block,
    rotation_matrix,
    sphere_to_xyz,
    xyz_to_sphere,
)

from conftest import random_points


def real_sh_oracle(l, m, beta, phi):
    """Real harmonic with unit mean square, built from scipy's complex harmonics."""
    if m == 0:
        return math.sqrt(4 * np.pi) * sph_harm_y(l, 0, beta, phi).real
    y = sph_harm_y(l, abs(m), beta, phi)
    # scipy includes the Condon-Shortley phase; this basis does not
    sign = (-1) ** abs(m)
    part = y.real if m > 0 else y.imag
    return math.sqrt(8 * np.pi) * sign * part


def wigner_d_oracle(j, mp, m, beta):
    """Closed-form sum for the small Wigner d-function."""
    c, s = math.cos(beta / 2), math.sin(beta / 2)
    pref = math.sqrt(factorial(j + mp) * factorial(j - mp) * factorial(j + m) * factorial(j - m))
    total = 0.0
    for k in range(0, 2 * j + 1):
        a, b, d, e = j + m - k, k, mp - m + k, j - mp - k
        if min(a, b, d, e) < 0:
            continue
        total += (-1) ** (mp - m + k) * c ** (2 * j + m - mp - 2 * k) * s ** (mp - m + 2 * k) / (
            factorial(a) * factorial(b) * factorial(d) * factorial(e)
        )
    return pref * total


class TestIndexing:
    @pytest.mark.parametrize("manifold,L,expected", [("s1", 5, 11), ("s2", 5, 36), ("so3", 3, 84), ("so3", 20, 12341)])
    def test_num_coeffs(self, manifold, L, expected):
        assert num_coeffs(manifold, L) == expected

    def test_so3_count_matches_sum_of_squares(self):
        for L in range(8):
            assert num_coeffs("so3", L) == sum((2 * l + 1) ** 2 for l in range(L + 1))

    @pytest.mark.parametrize("manifold", ["s1", "s2", "so3"])
    def test_position_round_trip(self, manifold):
        for pos in range(num_coeffs(manifold, 4)):
            idx = BasisIndex.from_position(manifold, pos)
            assert idx.position == pos

    def test_offsets_are_cumulative(self):
        for m in Manifold:
            for l in range(1, 6):
                assert block_offset(m, l) == num_coeffs(m, l - 1)

    @pytest.mark.parametrize(
        "args", [("s2", 2, 3, 0), ("s2", 1, 0, 1), ("so3", 1, 2, 0), ("s1", 1, 0, 0), ("s1", -1, 1, 0)]
    )
    def test_invalid_index(self, args):
        with pytest.raises(ValueError):
            BasisIndex(*args)

    def test_index_arrays_read_only(self):
        lam, _, _ = index_arrays("s2", 3)
        with pytest.raises(ValueError):
            lam[0] = 5


class TestCircle:
    def test_values(self):
        th = np.array([[0.3], [1.7]])
        blk = eval_basis_block("s1", 3, th)
        np.testing.assert_allclose(blk[:, 0], math.sqrt(2) * np.cos(3 * th[:, 0]), atol=1e-15)
        np.testing.assert_allclose(blk[:, 1], math.sqrt(2) * np.sin(3 * th[:, 0]), atol=1e-15)


class TestSphere:
    def test_matches_scipy(self, rng):
        pts = random_points("s2", 50, rng)
        for l in range(0, 9):
            blk = eval_basis_block("s2", l, pts)
            for m in range(-l, l + 1):
                ref = real_sh_oracle(l, m, pts[:, 0], pts[:, 1])
                np.testing.assert_allclose(blk[:, l + m], ref, atol=1e-11)

    def test_degree_one_is_scaled_xyz(self, rng):
        pts = random_points("s2", 20, rng)
        v = sphere_to_xyz(pts[:, 0], pts[:, 1])
        np.testing.assert_allclose(eval_basis_block("s2", 1, pts), math.sqrt(3) * v[:, [1, 2, 0]], atol=1e-14)

    def test_orthonormal_under_quadrature(self):
        L = 10
        x, w = np.polynomial.legendre.leggauss(L + 2)
        phi = 2 * np.pi * np.arange(2 * L + 2) / (2 * L + 2)
        B, P = np.meshgrid(np.arccos(x), phi, indexing="ij")
        W = np.repeat(w / 2, phi.size) / phi.size
        D = design_matrix("s2", L, np.stack([B.ravel(), P.ravel()], axis=1))
        np.testing.assert_allclose(D.T @ (W[:, None] * D), np.eye(D.shape[1]), atol=1e-12)

    def test_high_degree_is_stable(self, rng):
        pts = random_points("s2", 200, rng)
        pts[:3, 0] = [0.0, 1e-9, np.pi]
        blk = eval_basis_block("s2", 300, pts)
        assert np.all(np.isfinite(blk))
        assert np.max(np.abs(blk)) <= math.sqrt(601) * (1 + 1e-10)

    def test_pole(self):
        blk = eval_basis_block("s2", 4, np.array([[0.0, 1.3]]))[0]
        expected = np.zeros(9)
        expected[4] = 3.0
        np.testing.assert_allclose(blk, expected, atol=1e-14)


class TestRotations:
    def test_rotation_matrix_matches_scipy(self, rng):
        g = random_points("so3", 30, rng)
        R = rotation_matrix(*g.T)
        ref = Rotation.from_euler("ZYZ", g).as_matrix()
        np.testing.assert_allclose(R, ref, atol=1e-14)

    def test_euler_round_trip(self, rng):
        g = random_points("so3", 30, rng)
        R = rotation_matrix(*g.T)
        np.testing.assert_allclose(rotation_matrix(*euler_from_matrix(R).T), R, atol=1e-12)

    def test_compose_and_inverse(self, rng):
        g, h = random_points("so3", 10, rng), random_points("so3", 10, rng)
        gh = compose(g, h)
        np.testing.assert_allclose(rotation_matrix(*gh.T), rotation_matrix(*g.T) @ rotation_matrix(*h.T), atol=1e-12)
        assert np.max(geodesic_distance(compose(g, inverse(g)), np.zeros(3))) < 1e-7

    def test_xyz_round_trip(self, rng):
        pts = random_points("s2", 20, rng)
        np.testing.assert_allclose(xyz_to_sphere(sphere_to_xyz(*pts.T)), pts, atol=1e-12)


class TestWigner:
    def test_complex_d_matches_closed_form(self):
        L = 6
        for beta in (0.0, 0.4, 1.3, 2.9, np.pi):
            for l, d in iter_wigner_d_complex(L, np.array(beta)):
                for m in range(-l, l + 1):
                    for n in range(-l, l + 1):
                        assert abs(d[m + L, n + L] - wigner_d_oracle(l, m, n, beta)) < 1e-12

    def test_sphere_harmonics_transform_by_block(self, rng):
        """Y(R q) = U(R) Y(q) for every degree."""
        q = random_points("s2", 15, rng)
        for g in random_points("so3", 4, rng):
            Rq = rotation_matrix(*g) @ sphere_to_xyz(*q.T).T
            q2 = xyz_to_sphere(Rq.T)
            for l in range(1, 7):
                U = rotation_block(l, *g)
                np.testing.assert_allclose(eval_basis_block("s2", l, q2), eval_basis_block("s2", l, q) @ U.T, atol=1e-11)

    def test_homomorphism_and_orthogonality(self, rng):
        g, h = random_points("so3", 2, rng)
        gh = compose(g, h)
        for l in range(1, 8):
            Ug, Uh = rotation_block(l, *g), rotation_block(l, *h)
            np.testing.assert_allclose(rotation_block(l, *gh), Ug @ Uh, atol=1e-11)
            np.testing.assert_allclose(Ug @ Ug.T, np.eye(2 * l + 1), atol=1e-12)

    def test_sphere_is_zero_column_of_so3(self, rng):
        for b, p in random_points("s2", 5, rng):
            for l in range(1, 6):
                col = eval_basis_block("so3", l, np.array([[p, b, 0.0]]))[0].reshape(2 * l + 1, 2 * l + 1)[:, l]
                np.testing.assert_allclose(col, eval_basis_block("s2", l, np.array([[b, p]]))[0], atol=1e-12)

    def test_so3_orthonormal_monte_carlo_free(self):
        """Gram matrix under an exact product rule: Gauss-Legendre in cos beta, uniform angles."""
        L = 3
        x, w = np.polynomial.legendre.leggauss(L + 2)
        ang = 2 * np.pi * np.arange(2 * L + 2) / (2 * L + 2)
        A, Bt, G = np.meshgrid(ang, np.arccos(x), ang, indexing="ij")
        W = np.broadcast_to((w / 2)[None, :, None], A.shape).ravel() / ang.size**2
        D = design_matrix("so3", L, np.stack([A.ravel(), Bt.ravel(), G.ravel()], axis=1))
        np.testing.assert_allclose(D.T @ (W[:, None] * D), np.eye(D.shape[1]), atol=1e-12)


class TestPoints:
    def test_point_validation(self):
        with pytest.raises(ValueError):
            ManifoldPoint("s2", (1.0,))

    def test_eval_basis_single(self):
        p = ManifoldPoint("s2", (0.7, 2.0))
        idx = BasisIndex("s2", 2, -1)
        assert eval_basis(idx, p) == pytest.approx(real_sh_oracle(2, -1, 0.7, 2.0), abs=1e-12)

    def test_eval_basis_manifold_mismatch(self):
        with pytest.raises(ValueError):
            eval_basis(BasisIndex("s2", 1, 0), ManifoldPoint("so3", (0, 0, 0)))

    def test_empty_points(self):
        assert eval_basis_block("s2", 3, np.zeros((0, 2))).shape == (0, 7)

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(-10, 10, allow_nan=False),
        st.floats(-10, 10, allow_nan=False),
        st.floats(-10, 10, allow_nan=False),
    )
    def test_reduction_preserves_the_rotation(self, a, b, c):
        p = ManifoldPoint("so3", (a, b, c))
        assert 0 <= p.coords[1] <= np.pi
        np.testing.assert_allclose(rotation_matrix(*p.coords), rotation_matrix(a, b, c), atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False))
    def test_sphere_reduction_preserves_values(self, b, p):
        red = ManifoldPoint("s2", (b, p)).array[None, :]
        raw = np.array([[b, p]])
        np.testing.assert_allclose(sphere_to_xyz(*red.T), sphere_to_xyz(*raw.T), atol=1e-12)
        np.testing.assert_allclose(eval_basis_block("s2", 3, red), eval_basis_block("s2", 3, raw), atol=1e-10)
