"""Conjugate posterior inference over SO(3) from pairs of spherical signals.

Observation model: x = R(g) y + white noise of standard deviation sigma,
where [R(g) y](p) = y(g^-1 p).  In the sphere basis R(g) acts block-wise
by the real orthogonal matrices U^l(g), so the Gaussian likelihood is
linear in the SO(3) basis functions T^l(g) = sqrt(2l+1) U^l(g), and a
harmonic density prior on SO(3) stays harmonic after the update.
"""

from __future__ import annotations

import math

import numpy as np

from .expfam import NaturalParams, density_grid, log_unnormalized
from .special_functions import (
    Manifold,
    ManifoldPoint,
    _realify,
    euler_from_matrix,
    index_arrays,
    reduce_coords,
    rotation_block,
    rotation_matrix,
    z_rotation_block,
)
from .transforms import GridFunction, SpectralCoeffs, analyze, make_grid, synthesize

DEFAULT_REFINE_STEPS = 10


def _as_euler(g) -> np.ndarray:
    if isinstance(g, ManifoldPoint):
        if g.manifold is not Manifold.SO3:
            raise ValueError("rotation must be a point on SO3")
        return g.array
    g = np.asarray(g, dtype=float)
    if g.shape != (3,):
        raise ValueError("rotation must be three ZYZ Euler angles")
    return g


def sphere_analyze(samples: GridFunction, L: int | None = None) -> SpectralCoeffs:
    """Sphere-basis coefficients of an image sampled on an S2 grid."""
    if samples.spec.manifold is not Manifold.S2:
        raise ValueError("spherical signals must be sampled on an S2 grid")
    return analyze(samples, samples.spec.B - 1 if L is None else L)


def sphere_synthesize(x: SpectralCoeffs, B: int) -> GridFunction:
    return synthesize(x, make_grid(Manifold.S2, B))


def rotate_spectral(x, g):
    """Coefficients of the rotated function p -> x(g^-1 p).

    Accepts sphere coefficients (SpectralCoeffs, or NaturalParams on S2) and
    SO3 NaturalParams; on SO3 the left translation h -> f(g^-1 h) acts by
    left-multiplying each degree block with U^l(g).
    """
    a, b, c = _as_euler(g)
    if isinstance(x, NaturalParams):
        full = x.spectral().coeffs
        manifold, L = x.manifold, x.L
    else:
        full = x.coeffs
        manifold, L = x.manifold, x.L
    if manifold is Manifold.S1:
        raise ValueError("rotations act on S2 and SO3 coefficients only")
    lam = index_arrays(manifold, L)[0]
    out = full.copy()
    for l in range(1, L + 1):
        U = rotation_block(l, a, b, c)
        sel = lam == l
        if manifold is Manifold.S2:
            out[sel] = U @ full[sel]
        else:
            out[sel] = (U @ full[sel].reshape(2 * l + 1, 2 * l + 1)).ravel()
    if isinstance(x, NaturalParams):
        return NaturalParams(manifold, L, out[1:])
    return SpectralCoeffs(manifold, L, out)


def _pad(x: SpectralCoeffs, L: int) -> np.ndarray:
    out = np.zeros((L + 1) ** 2)
    n = min(x.coeffs.size, out.size)
    out[:n] = x.coeffs[:n]
    return out


def posterior(prior: NaturalParams | None, x: SpectralCoeffs, y: SpectralCoeffs, sigma: float) -> NaturalParams:
    """Conjugate update eta^l += x_l y_l^T / (sigma^2 sqrt(2l+1)) for l >= 1."""
    if not sigma > 0:
        raise ValueError(f"noise level must be positive, got {sigma}")
    if x.manifold is not Manifold.S2 or y.manifold is not Manifold.S2:
        raise ValueError("correspondence pair must be sphere coefficients")
    if x.L != y.L:
        raise ValueError(f"x and y bandlimits differ ({x.L} vs {y.L})")
    if prior is not None and prior.manifold is not Manifold.SO3:
        raise ValueError("prior must be a density on SO3")
    L = max(x.L, prior.L if prior is not None else 0)
    eta = prior.padded(L).eta.copy() if prior is not None else np.zeros(NaturalParams.zeros(Manifold.SO3, L).eta.size)
    xs, ys = _pad(x, L), _pad(y, L)
    pos = 0
    for l in range(1, L + 1):
        sl = slice(l * l, (l + 1) ** 2)
        k = (2 * l + 1) ** 2
        eta[pos : pos + k] += np.outer(xs[sl], ys[sl]).ravel() / (sigma**2 * math.sqrt(2 * l + 1))
        pos += k
    return NaturalParams(Manifold.SO3, L, eta)


def gaussian_log_likelihood(x: SpectralCoeffs, y: SpectralCoeffs, g, sigma: float) -> float:
    """log N(x | U(g) y, sigma^2) up to the normalizing constant."""
    r = x.coeffs - rotate_spectral(y, g).coeffs
    return -0.5 * float(r @ r) / sigma**2


# ---------------------------------------------------------------------------
# MAP


def _ry_generator(l: int) -> np.ndarray:
    """d/dbeta of the real d^l at beta = 0."""
    m = np.arange(-l, l)
    up = -0.5 * np.sqrt(l * (l + 1) - m * (m + 1))
    G = np.zeros((2 * l + 1, 2 * l + 1))
    G[m + l + 1, m + l] = up
    G[m + l, m + l + 1] = -up
    return _realify(G, l)


def _rz_generator(l: int) -> np.ndarray:
    m = np.arange(-l, l + 1)
    G = np.zeros((2 * l + 1, 2 * l + 1))
    idx = np.arange(2 * l + 1)
    G[idx, idx[::-1]] = -m
    return G


def _lie_generators(l: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Real degree-l generators of rotations about x, y, z."""
    Ay, Az = _ry_generator(l), _rz_generator(l)
    Ax = z_rotation_block(l, -np.pi / 2) @ Ay @ z_rotation_block(l, np.pi / 2)
    return Ax, Ay, Az


_HAT = np.array(
    [
        [[0, 0, 0], [0, 0, -1], [0, 1, 0]],
        [[0, 0, 1], [0, 0, 0], [-1, 0, 0]],
        [[0, -1, 0], [1, 0, 0], [0, 0, 0]],
    ],
    dtype=float,
)


def value_and_gradient(post: NaturalParams, g) -> tuple[float, np.ndarray]:
    """eta . T(g) and its body-frame gradient d/dt f(g exp(t J_k)), k = x, y, z."""
    a, b, c = _as_euler(g)
    lam = post.degrees
    value = 0.0
    grad = np.zeros(3)
    for l in range(1, post.L + 1):
        C = post.eta[lam == l].reshape(2 * l + 1, 2 * l + 1)
        U = rotation_block(l, a, b, c)
        s = math.sqrt(2 * l + 1)
        value += s * np.sum(C * U)
        for k, A in enumerate(_lie_generators(l)):
            grad[k] += s * np.sum(C * (U @ A))
    return float(value), grad


def _step(g: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Euler angles of g exp(xi), xi in body coordinates."""
    theta = float(np.linalg.norm(xi))
    K = np.tensordot(xi / theta, _HAT, axes=1) if theta else np.zeros((3, 3))
    E = np.eye(3) + math.sin(theta) * K + (1 - math.cos(theta)) * (K @ K)
    return euler_from_matrix(rotation_matrix(*g) @ E)


def map_rotation(post: NaturalParams, B: int, refine_steps: int = DEFAULT_REFINE_STEPS) -> tuple[ManifoldPoint, float]:
    """Grid arg-max of the posterior log-density, refined by gradient ascent.

    Ties on the grid go to the lowest canonical node index.  Refinement
    moves along the body-frame gradient, g <- g exp(t grad), which stays
    well conditioned where Euler coordinates degenerate; each step halves
    t until the objective increases.  The returned value is never below
    the grid maximum.
    """
    if post.manifold is not Manifold.SO3:
        raise ValueError("MAP rotation needs a density on SO3")
    if B <= post.L:
        raise ValueError(f"search bandlimit {B} must exceed posterior bandlimit {post.L}")
    if refine_steps < 0:
        raise ValueError("refine_steps must be >= 0")
    grid = make_grid(Manifold.SO3, B)
    f = synthesize(post.spectral(), grid).values
    i = int(np.argmax(f))
    g = grid.nodes()[i]
    best = float(f.ravel()[i])
    value, grad = value_and_gradient(post, g)
    t = (np.pi / B) / max(float(np.linalg.norm(grad)), 1e-300)
    for _ in range(refine_steps):
        gn2 = float(grad @ grad)
        if gn2 == 0.0:
            break
        for _ in range(60):
            cand = _step(g, t * grad)
            cv, cg = value_and_gradient(post, cand)
            if cv >= value + 1e-4 * t * gn2:
                break
            t *= 0.5
        else:
            break
        g, value, grad = cand, cv, cg
        t *= 2.0
    if value < best:
        value, g = best, grid.nodes()[i]
    g = reduce_coords(Manifold.SO3, g[None, :])[0]
    return ManifoldPoint(Manifold.SO3, tuple(g)), float(value)


def posterior_grid(post: NaturalParams, B: int) -> GridFunction:
    """Normalized posterior density on the SO3 grid of bandlimit B."""
    if post.manifold is not Manifold.SO3:
        raise ValueError("posterior must be a density on SO3")
    return density_grid(post, B)


def log_posterior(post: NaturalParams, g) -> float:
    return log_unnormalized(post, ManifoldPoint(Manifold.SO3, tuple(_as_euler(g))))
