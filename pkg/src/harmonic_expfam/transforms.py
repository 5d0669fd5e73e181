"""Forward and inverse Fourier transforms on equiangular grids.

The circle and the azimuthal Euler angles use length-2B FFTs; the polar
axis is a dense contraction against cached Legendre / Wigner-d tables.
Colatitude nodes are Fejer's first-rule (Chebyshev) points
beta_j = pi (2j+1) / 4B, whose weights integrate polynomials in cos(beta)
of degree < 2B exactly.  Products of two basis functions of degree < B
are integrated exactly, which makes ``analyze(synthesize(c))`` the
identity for bandlimit L < B.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .special_functions import (
    Manifold,
    design_matrix,
    index_arrays,
    iter_legendre,
    iter_wigner_d,
    num_coeffs,
)

TABLE_CACHE_SIZE = int(os.environ.get("HARMONIC_EXPFAM_TABLE_CACHE", "8"))


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Equiangular grid with quadrature weights summing to one.

    ``weights`` has the grid shape: (2B,) on S1, (2B, 2B) over (beta, phi)
    on S2 and (2B, 2B, 2B) over (alpha, beta, gamma) on SO3.  The canonical
    node order is C order over those axes.
    """

    manifold: Manifold
    B: int
    axes: tuple[np.ndarray, ...]
    weights: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def polar_weights(self) -> np.ndarray:
        """Colatitude weights (summing to one) on S2/SO3."""
        return polar_weights(self.B)

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (size, ndim), canonical order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True, eq=False)
class GridFunction:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size != self.spec.size:
            raise ValueError(f"expected {self.spec.size} values, got {values.size}")
        object.__setattr__(self, "values", values.reshape(self.spec.shape))

    def integral(self) -> float:
        return float(np.sum(self.spec.weights * self.values))


@dataclass(frozen=True, eq=False)
class SpectralCoeffs:
    manifold: Manifold
    L: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        manifold = Manifold.parse(self.manifold)
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (num_coeffs(manifold, self.L),):
            raise ValueError(f"{manifold.value} bandlimit {self.L} needs {num_coeffs(manifold, self.L)} coefficients, got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "manifold", manifold)
        object.__setattr__(self, "coeffs", coeffs)

    def block(self, degree: int) -> np.ndarray:
        lam = index_arrays(self.manifold, self.L)[0]
        return self.coeffs[lam == degree]


# ---------------------------------------------------------------------------
# Grids


@lru_cache(maxsize=64)
def polar_weights(B: int) -> np.ndarray:
    """Fejer first-rule weights on beta_j = pi(2j+1)/4B, normalized for sin(beta) dbeta / 2."""
    n = 2 * B
    theta = np.pi * (2 * np.arange(n) + 1) / (2 * n)
    k = np.arange(1, n // 2 + 1)
    w = (1.0 - 2.0 * np.sum(np.cos(2 * np.outer(theta, k)) / (4 * k * k - 1), axis=1)) / n
    w.setflags(write=False)
    return w


def polar_nodes(B: int) -> np.ndarray:
    return np.pi * (2 * np.arange(2 * B) + 1) / (4 * B)


def azimuth_nodes(B: int) -> np.ndarray:
    return 2 * np.pi * np.arange(2 * B) / (2 * B)


@lru_cache(maxsize=32)
def _make_grid(manifold: Manifold, B: int) -> GridSpec:
    az = azimuth_nodes(B)
    if manifold is Manifold.S1:
        axes = (az,)
        w = np.full(2 * B, 1.0 / (2 * B))
    elif manifold is Manifold.S2:
        axes = (polar_nodes(B), az)
        w = np.repeat(polar_weights(B)[:, None] / (2 * B), 2 * B, axis=1)
    else:
        axes = (az, polar_nodes(B), az.copy())
        w = np.broadcast_to(polar_weights(B)[None, :, None] / (2 * B) ** 2, (2 * B,) * 3).copy()
    for a in axes:
        a.setflags(write=False)
    w.setflags(write=False)
    return GridSpec(manifold, B, axes, w)


def make_grid(manifold, B: int) -> GridSpec:
    """Equiangular grid of bandlimit B: exact for degree < B."""
    if int(B) != B or B < 1:
        raise ValueError(f"grid bandlimit must be a positive integer, got {B}")
    return _make_grid(Manifold.parse(manifold), int(B))


# ---------------------------------------------------------------------------
# Real trigonometric transforms along one axis.  Frequencies -L..L are stored
# at index p + L; E_p = cos(p t) for p >= 0 and sin(|p| t) for p < 0.


def _rev(L: int) -> np.ndarray:
    """Indices L-1, ..., 0 (empty for L = 0, unlike a reversed slice)."""
    return np.arange(L - 1, -1, -1)


def _trig_synth(K: np.ndarray, axis: int, N: int) -> np.ndarray:
    K = np.moveaxis(K, axis, -1)
    L = (K.shape[-1] - 1) // 2
    H = np.zeros(K.shape[:-1] + (N,), dtype=complex)
    H[..., : L + 1] = K[..., L:]
    H[..., 1 : L + 1] -= 1j * K[..., _rev(L)]
    out = N * np.fft.ifft(H, axis=-1).real
    return np.moveaxis(out, -1, axis)


def _trig_analysis(f: np.ndarray, axis: int, L: int) -> np.ndarray:
    f = np.moveaxis(f, axis, -1)
    N = f.shape[-1]
    F = np.fft.rfft(f, axis=-1)[..., : L + 1] / N
    out = np.empty(f.shape[:-1] + (2 * L + 1,))
    out[..., L:] = F.real
    out[..., :L] = -F.imag[..., L:0:-1]
    return np.moveaxis(out, -1, axis)


# ---------------------------------------------------------------------------
# Polar tables


@lru_cache(maxsize=TABLE_CACHE_SIZE)
def _legendre_grid_table(B: int, L: int) -> np.ndarray:
    """Pn_l^m(cos beta_j) as array [m, j, l], zero for l < m."""
    beta = polar_nodes(B)
    table = np.zeros((L + 1, beta.size, L + 1))
    for l, P in iter_legendre(L, np.cos(beta), np.sin(beta)):
        table[:, :, l] = P.T
    table.setflags(write=False)
    return table


@lru_cache(maxsize=TABLE_CACHE_SIZE)
def _wigner_grid_table(B: int, L: int) -> tuple[np.ndarray, ...]:
    """Real d^l(beta_j) blocks for l = 0..L, each of shape (2B, 2l+1, 2l+1)."""
    out = []
    for _, d in iter_wigner_d(L, polar_nodes(B)):
        d = np.ascontiguousarray(d)
        d.setflags(write=False)
        out.append(d)
    return tuple(out)


@lru_cache(maxsize=64)
def _so3_scatter(l: int, L: int):
    m = np.arange(-l, l + 1)
    sm, am = np.sign(m), np.abs(m)
    rows_p = (L + am)[:, None] * np.ones((1, 2 * l + 1), dtype=int)
    rows_n = (L - am)[:, None] * np.ones((1, 2 * l + 1), dtype=int)
    cols_p = rows_p.T
    cols_n = rows_n.T
    sign_n = sm[None, :] * np.ones((2 * l + 1, 1))
    sign_m = sm[:, None] * np.ones((1, 2 * l + 1))
    return rows_p, rows_n, cols_p, cols_n, sign_m, sign_n


def _s2_coeff_matrix(c: np.ndarray, L: int) -> np.ndarray:
    """Canonical S2 coefficients -> array [m + L, l] with the sqrt(2) folded in."""
    lam, m, _ = index_arrays(Manifold.S2, L)
    C = np.zeros((2 * L + 1, L + 1))
    C[m + L, lam] = c * np.where(m == 0, 1.0, math.sqrt(2.0))
    return C


# ---------------------------------------------------------------------------
# Public transforms


def _check_band(manifold: Manifold, L: int, spec: GridSpec):
    if spec.manifold is not manifold:
        raise ValueError(f"coefficients on {manifold.value} but grid on {spec.manifold.value}")
    if L >= spec.B:
        raise ValueError(f"bandlimit {L} must be below grid bandlimit {spec.B}")
    if L < 0:
        raise ValueError("bandlimit must be non-negative")


def synthesize(c: SpectralCoeffs, spec: GridSpec) -> GridFunction:
    """Evaluate sum_i c_i T_i at every grid node."""
    manifold, L = c.manifold, c.L
    _check_band(manifold, L, spec)
    N = 2 * spec.B
    x = c.coeffs
    if manifold is Manifold.S1:
        K = np.zeros(2 * L + 1)
        K[L] = x[0]
        K[L + 1 :] = math.sqrt(2.0) * x[1::2]
        K[_rev(L)] = math.sqrt(2.0) * x[2::2]
        values = _trig_synth(K, 0, N)
    elif manifold is Manifold.S2:
        P = _legendre_grid_table(spec.B, L)
        C = _s2_coeff_matrix(x, L)
        K = np.empty((N, 2 * L + 1))
        K[:, L:] = (P @ C[L:, :, None])[..., 0].T
        if L:
            K[:, _rev(L)] = (P[1:] @ C[_rev(L), :, None])[..., 0].T
        values = _trig_synth(K, 1, N)
    else:
        tables = _wigner_grid_table(spec.B, L)
        K = np.zeros((N, 2 * L + 1, 2 * L + 1))
        lam = index_arrays(manifold, L)[0]
        for l in range(L + 1):
            cb = x[lam == l].reshape(2 * l + 1, 2 * l + 1) * math.sqrt(2 * l + 1)
            d = tables[l]
            rp, rn, cp, cn, sm, sn = _so3_scatter(l, L)
            np.add.at(K, (slice(None), rp, cp), cb * d)
            np.add.at(K, (slice(None), rp, cn), cb * sn * d[:, :, ::-1])
            np.add.at(K, (slice(None), rn, cp), -cb * sm * d[:, ::-1, :])
            np.add.at(K, (slice(None), rn, cn), -cb * sm * sn * d[:, ::-1, ::-1])
        # K[b, p, q] -> f[alpha, b, gamma]
        values = _trig_synth(_trig_synth(K, 2, N), 1, N).transpose(1, 0, 2)
    return GridFunction(spec, values)


def analyze(f: GridFunction, L: int) -> SpectralCoeffs:
    """Quadrature coefficients sum_nodes w f T_i for all degrees <= L."""
    spec = f.spec
    manifold = spec.manifold
    _check_band(manifold, L, spec)
    v = f.values
    if manifold is Manifold.S1:
        F = _trig_analysis(v, 0, L)
        out = np.empty(2 * L + 1)
        out[0] = F[L]
        out[1::2] = math.sqrt(2.0) * F[L + 1 :]
        out[2::2] = math.sqrt(2.0) * F[_rev(L)]
    elif manifold is Manifold.S2:
        P = _legendre_grid_table(spec.B, L)
        F = _trig_analysis(v, 1, L) * spec.polar_weights[:, None]  # [b, m+L]
        lam, m, _ = index_arrays(manifold, L)
        G = np.empty((2 * L + 1, L + 1))
        G[L:] = np.einsum("mbl,bm->ml", P, F[:, L:])
        if L:
            G[_rev(L)] = np.einsum("mbl,bm->ml", P[1:], F[:, _rev(L)])
        out = G[m + L, lam] * np.where(m == 0, 1.0, math.sqrt(2.0))
    else:
        tables = _wigner_grid_table(spec.B, L)
        F = _trig_analysis(_trig_analysis(v, 0, L), 2, L)  # [p, b, q]
        F = F.transpose(1, 0, 2) * spec.polar_weights[:, None, None]
        out = []
        for l in range(L + 1):
            d = tables[l]
            rp, rn, cp, cn, sm, sn = _so3_scatter(l, L)
            acc = np.einsum("bij,bij->ij", F[:, rp, cp], d)
            acc += sn * np.einsum("bij,bij->ij", F[:, rp, cn], d[:, :, ::-1])
            acc -= sm * np.einsum("bij,bij->ij", F[:, rn, cp], d[:, ::-1, :])
            acc -= sm * sn * np.einsum("bij,bij->ij", F[:, rn, cn], d[:, ::-1, ::-1])
            out.append(math.sqrt(2 * l + 1) * acc.ravel())
        out = np.concatenate(out)
    return SpectralCoeffs(manifold, L, out)


# ---------------------------------------------------------------------------
# Dense reference implementations


def naive_synthesize(c: SpectralCoeffs, spec: GridSpec) -> GridFunction:
    _check_band(c.manifold, c.L, spec)
    D = design_matrix(spec.manifold, c.L, spec.nodes())
    return GridFunction(spec, D @ c.coeffs)


def naive_analyze(f: GridFunction, L: int) -> SpectralCoeffs:
    spec = f.spec
    _check_band(spec.manifold, L, spec)
    D = design_matrix(spec.manifold, L, spec.nodes())
    return SpectralCoeffs(spec.manifold, L, D.T @ (spec.weights * f.values).ravel())


def clear_caches():
    _legendre_grid_table.cache_clear()
    _wigner_grid_table.cache_clear()
