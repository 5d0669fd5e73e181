"""Harmonic exponential family densities.

p(g | eta) = exp(eta . T(g)) / Z(eta) with respect to the normalized
invariant measure, where T collects every basis function of degree 1..L.
The constant function is excluded from eta because Z absorbs it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .special_functions import (
    Manifold,
    ManifoldPoint,
    as_coords,
    basis_bound,
    degrees,
    dim,
    iter_basis_blocks,
    num_coeffs,
)
from .transforms import GridFunction, SpectralCoeffs, analyze, make_grid, synthesize

DEFAULT_OVERSAMPLE = 2.0


class MomentError(ArithmeticError):
    """The moment computation produced a non-positive normalizer or NaN."""


@dataclass(frozen=True, eq=False)
class NaturalParams:
    manifold: Manifold
    L: int
    eta: np.ndarray = field(repr=False)

    def __post_init__(self):
        manifold = Manifold.parse(self.manifold)
        if self.L < 0:
            raise ValueError("bandlimit must be non-negative")
        eta = np.asarray(self.eta, dtype=float)
        expected = num_coeffs(manifold, self.L) - 1
        if eta.shape != (expected,):
            raise ValueError(f"{manifold.value} bandlimit {self.L} needs {expected} parameters, got {eta.shape}")
        if not np.all(np.isfinite(eta)):
            raise ValueError("non-finite natural parameters")
        object.__setattr__(self, "manifold", manifold)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def zeros(cls, manifold, L: int) -> "NaturalParams":
        return cls(manifold, L, np.zeros(num_coeffs(manifold, L) - 1))

    @property
    def degrees(self) -> np.ndarray:
        return degrees(self.manifold, self.L)[1:]

    def spectral(self) -> SpectralCoeffs:
        """Coefficients with a zero constant slot prepended."""
        return SpectralCoeffs(self.manifold, self.L, np.concatenate([[0.0], self.eta]))

    def padded(self, L: int) -> "NaturalParams":
        """Same function at a larger bandlimit."""
        if L < self.L:
            raise ValueError("cannot truncate by padding")
        eta = np.zeros(num_coeffs(self.manifold, L) - 1)
        eta[: self.eta.size] = self.eta
        return NaturalParams(self.manifold, L, eta)


@dataclass(frozen=True)
class MomentReport:
    moments: np.ndarray
    logZ: float


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Empirical mean of the degree 1..L basis functions over N points."""

    manifold: Manifold
    L: int
    N: int
    mean: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "manifold", Manifold.parse(self.manifold))
        if self.mean.shape != (num_coeffs(self.manifold, self.L) - 1,):
            raise ValueError("statistics do not match the bandlimit")


def grid_bandlimit(L: int, oversample: float = DEFAULT_OVERSAMPLE) -> int:
    """Quadrature grid bandlimit used for moments at model bandlimit L."""
    if oversample < 1:
        raise ValueError(f"oversampling factor must be >= 1, got {oversample}")
    return int(math.ceil(oversample * L - 1e-12)) + 1


def plancherel_precision(manifold, L: int, alpha: float) -> np.ndarray:
    """Diagonal Gaussian prior precision alpha * dim(degree) per parameter."""
    return alpha * dim(manifold, degrees(manifold, L)[1:]).astype(float)


def _check_match(eta: NaturalParams, stats: SufficientStats):
    if eta.manifold is not stats.manifold or eta.L != stats.L:
        raise ValueError(
            f"parameters ({eta.manifold.value}, L={eta.L}) do not match statistics ({stats.manifold.value}, L={stats.L})"
        )


# ---------------------------------------------------------------------------


def log_unnormalized(eta: NaturalParams, points) -> np.ndarray | float:
    """eta . T(p) at one point (ManifoldPoint) or an array of points."""
    single = isinstance(points, ManifoldPoint)
    c = as_coords(eta.manifold, points)
    out = np.zeros(c.shape[0])
    pos = 0
    for l, block in iter_basis_blocks(eta.manifold, eta.L, c):
        if l == 0:
            continue
        k = block.shape[1]
        out += block @ eta.eta[pos : pos + k]
        pos += k
    return float(out[0]) if single else out


def _log_density_grid(eta: NaturalParams, B: int) -> GridFunction:
    return synthesize(eta.spectral(), make_grid(eta.manifold, B))


def moments(eta: NaturalParams, oversample: float = DEFAULT_OVERSAMPLE) -> MomentReport:
    """Model moments E[T] and log normalizer via grid synthesis and analysis.

    The log-density is synthesized exactly on a grid of bandlimit
    ceil(oversample * L) + 1, shifted by its maximum before exponentiation,
    and analyzed back to degree L; the shift is restored in logZ.
    """
    if eta.L == 0:
        return MomentReport(np.zeros(0), 0.0)
    ell = _log_density_grid(eta, grid_bandlimit(eta.L, oversample))
    shift = float(np.max(ell.values))
    phi = GridFunction(ell.spec, np.exp(ell.values - shift))
    M = analyze(phi, eta.L).coeffs
    if not (M[0] > 0) or not np.all(np.isfinite(M)):
        raise MomentError(f"normalizer {M[0]!r} from moment computation")
    return MomentReport(M[1:] / M[0], shift + math.log(M[0]))


def log_partition(eta: NaturalParams, oversample: float = DEFAULT_OVERSAMPLE) -> float:
    return moments(eta, oversample).logZ


def log_likelihood(eta: NaturalParams, stats: SufficientStats, oversample: float = DEFAULT_OVERSAMPLE) -> float:
    """Mean per-point log-likelihood w.r.t. the normalized invariant measure."""
    _check_match(eta, stats)
    return float(eta.eta @ stats.mean) - log_partition(eta, oversample)


def _reg_vector(eta: NaturalParams, reg) -> np.ndarray | None:
    if reg is None:
        return None
    reg = np.broadcast_to(np.asarray(reg, dtype=float), eta.eta.shape)
    return reg


def objective(eta: NaturalParams, stats: SufficientStats, oversample=DEFAULT_OVERSAMPLE, reg=None):
    """Negative mean log-posterior and its gradient (moment discrepancy plus prior term)."""
    _check_match(eta, stats)
    rep = moments(eta, oversample)
    value = rep.logZ - float(eta.eta @ stats.mean)
    grad = rep.moments - stats.mean
    r = _reg_vector(eta, reg)
    if r is not None:
        value += 0.5 * float(np.sum(r * eta.eta**2))
        grad = grad + r * eta.eta
    return value, grad


def nll_gradient(eta: NaturalParams, stats: SufficientStats, oversample=DEFAULT_OVERSAMPLE, reg=None) -> np.ndarray:
    return objective(eta, stats, oversample, reg)[1]


def empirical_moments(manifold, points, L: int) -> SufficientStats:
    """Mean of the degree 1..L basis functions over the points."""
    manifold = Manifold.parse(manifold)
    c = as_coords(manifold, points)
    if c.shape[0] == 0:
        raise ValueError("empirical moments of an empty point set")
    sums = group_sums(manifold, c, L, np.zeros(c.shape[0], dtype=int), 1)[0]
    return SufficientStats(manifold, L, c.shape[0], sums / c.shape[0])


def group_sums(manifold, points, L: int, labels: np.ndarray, ngroups: int, chunk: int = 4096) -> np.ndarray:
    """Per-group sums of the degree 1..L basis functions, shape (ngroups, J-1).

    Streams one degree at a time so the full design matrix is never held.
    """
    manifold = Manifold.parse(manifold)
    c = as_coords(manifold, points)
    labels = np.asarray(labels)
    out = np.zeros((ngroups, num_coeffs(manifold, L) - 1))
    for start in range(0, c.shape[0], chunk):
        sl = slice(start, start + chunk)
        ind = np.zeros((ngroups, c[sl].shape[0]))
        ind[labels[sl], np.arange(c[sl].shape[0])] = 1.0
        pos = 0
        for l, block in iter_basis_blocks(manifold, L, c[sl]):
            if l == 0:
                continue
            k = block.shape[1]
            out[:, pos : pos + k] += ind @ block
            pos += k
    return out


def density_grid(eta: NaturalParams, B: int) -> GridFunction:
    """Normalized density on the grid of bandlimit B.

    The normalizer is the grid's own quadrature of exp(eta . T), so the
    weighted values sum to one on that grid.
    """
    if B <= eta.L:
        raise ValueError(f"grid bandlimit {B} must exceed model bandlimit {eta.L}")
    ell = _log_density_grid(eta, B)
    shift = float(np.max(ell.values))
    phi = np.exp(ell.values - shift)
    Z = float(np.sum(ell.spec.weights * phi))
    return GridFunction(ell.spec, phi / Z)


def moment_bounds(manifold, L: int) -> np.ndarray:
    """Sup-norm bound of each sufficient statistic (bounds any moment)."""
    lam = degrees(manifold, L)[1:]
    return np.array([basis_bound(manifold, int(l)) for l in lam])
