"""Real, L2-normalized matrix-element bases on the circle, the sphere and SO(3).

All bases are orthonormal under the invariant measure normalized to total
mass one, and the degree-zero function is identically one.

Coordinates:
    S1   theta
    S2   (beta, phi)          colatitude, longitude
    SO3  (alpha, beta, gamma) ZYZ Euler angles, R = Rz(alpha) Ry(beta) Rz(gamma)

Sphere basis (no Condon-Shortley phase), with Pn the Legendre function
normalized so that Pn_l^0 = sqrt(2l+1) P_l:

    T_l^m = sqrt(2) Pn_l^m(cos beta) cos(m phi)      m > 0
    T_l^0 = Pn_l^0(cos beta)
    T_l^m = sqrt(2) Pn_l^|m|(cos beta) sin(|m| phi)  m < 0

For degree one this is sqrt(3) * (y, z, x).

The SO(3) basis is T^l(g) = sqrt(2l+1) U^l(g), where U^l is the real
orthogonal matrix with  Y_l(g p) = U^l(g) Y_l(p)  for the sphere basis
Y_l above.  Hence U(gh) = U(g) U(h), and the sphere functions are the
n = 0 column evaluated at the coset representative (phi, beta, 0).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi


class Manifold(str, enum.Enum):
    S1 = "s1"
    S2 = "s2"
    SO3 = "so3"

    @classmethod
    def parse(cls, value: "Manifold | str") -> "Manifold":
        if isinstance(value, Manifold):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown manifold {value!r}") from None

    @property
    def ndim(self) -> int:
        return {Manifold.S1: 1, Manifold.S2: 2, Manifold.SO3: 3}[self]


# ---------------------------------------------------------------------------
# Index bookkeeping


def block_size(manifold, degree: int) -> int:
    """Number of basis functions of a given degree."""
    manifold = Manifold.parse(manifold)
    if degree == 0:
        return 1
    if manifold is Manifold.S1:
        return 2
    if manifold is Manifold.S2:
        return 2 * degree + 1
    return (2 * degree + 1) ** 2


def block_offset(manifold, degree: int) -> int:
    """Position of the first basis function of ``degree`` in canonical order."""
    manifold = Manifold.parse(manifold)
    if degree == 0:
        return 0
    if manifold is Manifold.S1:
        return 2 * degree - 1
    if manifold is Manifold.S2:
        return degree * degree
    return degree * (2 * degree - 1) * (2 * degree + 1) // 3


def num_coeffs(manifold, L: int) -> int:
    """J(L): number of basis functions with degree <= L."""
    return block_offset(manifold, L + 1)


def dim(manifold, degree) -> np.ndarray | int:
    """Dimension of the irreducible representation of a degree.

    On the circle the complex representations are one dimensional; the real
    cos/sin pair carries one unit each.
    """
    manifold = Manifold.parse(manifold)
    if manifold is Manifold.S1:
        return np.ones_like(degree) if isinstance(degree, np.ndarray) else 1
    return 2 * degree + 1


def basis_bound(manifold, degree: int) -> float:
    """Sup-norm bound of the normalized basis functions of one degree."""
    manifold = Manifold.parse(manifold)
    if manifold is Manifold.S1:
        return 1.0 if degree == 0 else math.sqrt(2.0)
    return math.sqrt(2 * degree + 1)


@lru_cache(maxsize=64)
def _index_table(manifold: Manifold, L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lam, m, n = [], [], []
    for d in range(L + 1):
        if manifold is Manifold.S1:
            if d == 0:
                lam.append(0), m.append(0), n.append(0)
            else:
                lam += [d, d]
                m += [1, -1]
                n += [0, 0]
        elif manifold is Manifold.S2:
            for mm in range(-d, d + 1):
                lam.append(d), m.append(mm), n.append(0)
        else:
            for mm in range(-d, d + 1):
                for nn in range(-d, d + 1):
                    lam.append(d), m.append(mm), n.append(nn)
    out = tuple(np.array(a, dtype=np.int64) for a in (lam, m, n))
    for a in out:
        a.setflags(write=False)
    return out


def index_arrays(manifold, L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrays (degree, m, n) for every basis function up to L in canonical order."""
    return _index_table(Manifold.parse(manifold), int(L))


def degrees(manifold, L: int) -> np.ndarray:
    return index_arrays(manifold, L)[0]


@dataclass(frozen=True)
class BasisIndex:
    """One basis function.  On S1, ``m`` is +1 for cosine and -1 for sine."""

    manifold: Manifold
    degree: int
    m: int = 0
    n: int = 0

    def __post_init__(self):
        object.__setattr__(self, "manifold", Manifold.parse(self.manifold))
        d, m, n = self.degree, self.m, self.n
        if d < 0:
            raise ValueError(f"negative degree {d}")
        if self.manifold is Manifold.S1:
            ok = (d == 0 and m == 0) or (d > 0 and m in (1, -1))
            ok = ok and n == 0
        elif self.manifold is Manifold.S2:
            ok = abs(m) <= d and n == 0
        else:
            ok = abs(m) <= d and abs(n) <= d
        if not ok:
            raise ValueError(f"index (degree={d}, m={m}, n={n}) out of range on {self.manifold.value}")

    @property
    def position(self) -> int:
        """Position in the canonical linear ordering."""
        d, m, n = self.degree, self.m, self.n
        off = block_offset(self.manifold, d)
        if self.manifold is Manifold.S1:
            return 0 if d == 0 else off + (0 if m == 1 else 1)
        if self.manifold is Manifold.S2:
            return off + d + m
        return off + (m + d) * (2 * d + 1) + (n + d)

    @classmethod
    def from_position(cls, manifold, pos: int) -> "BasisIndex":
        manifold = Manifold.parse(manifold)
        L = 0
        while num_coeffs(manifold, L) <= pos:
            L += 1
        lam, m, n = index_arrays(manifold, L)
        return cls(manifold, int(lam[pos]), int(m[pos]), int(n[pos]))


# ---------------------------------------------------------------------------
# Points


def _reduce_sphere(beta: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    beta = np.mod(beta, TWO_PI)
    flip = beta > np.pi
    beta = np.where(flip, TWO_PI - beta, beta)
    phi = np.mod(np.where(flip, phi + np.pi, phi), TWO_PI)
    return beta, phi


def reduce_coords(manifold, coords) -> np.ndarray:
    """Reduce coordinates into their canonical ranges.

    Colatitudes outside [0, pi] are reflected through the pole, which moves
    the longitude (or first Euler angle) by pi and, on SO3, the last Euler
    angle by pi as well, so the represented point is unchanged.
    """
    manifold = Manifold.parse(manifold)
    c = np.array(coords, dtype=float)
    if manifold is Manifold.S1:
        return np.mod(c, TWO_PI)
    c = np.atleast_2d(c) if c.ndim == 1 else c
    if manifold is Manifold.S2:
        beta, phi = _reduce_sphere(c[..., 0], c[..., 1])
        return np.stack([beta, phi], axis=-1)
    beta = np.mod(c[..., 1], TWO_PI)
    flip = beta > np.pi
    beta = np.where(flip, TWO_PI - beta, beta)
    alpha = np.mod(np.where(flip, c[..., 0] + np.pi, c[..., 0]), TWO_PI)
    gamma = np.mod(np.where(flip, c[..., 2] + np.pi, c[..., 2]), TWO_PI)
    return np.stack([alpha, beta, gamma], axis=-1)


@dataclass(frozen=True)
class ManifoldPoint:
    manifold: Manifold
    coords: tuple[float, ...]

    def __post_init__(self):
        manifold = Manifold.parse(self.manifold)
        c = np.atleast_1d(np.asarray(self.coords, dtype=float))
        if c.shape != (manifold.ndim,):
            raise ValueError(f"{manifold.value} point needs {manifold.ndim} coordinates, got {c.shape}")
        if manifold is Manifold.S1:
            red = reduce_coords(manifold, c)
        else:
            red = reduce_coords(manifold, c[None, :])[0]
        object.__setattr__(self, "manifold", manifold)
        object.__setattr__(self, "coords", tuple(float(v) for v in np.atleast_1d(red)))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords)


def as_coords(manifold, points) -> np.ndarray:
    """Normalize a point collection to a float array of shape (N, ndim)."""
    manifold = Manifold.parse(manifold)
    if isinstance(points, ManifoldPoint):
        points = [points]
    if isinstance(points, (list, tuple)) and points and isinstance(points[0], ManifoldPoint):
        for p in points:
            if p.manifold is not manifold:
                raise ValueError("points on mixed manifolds")
        return np.array([p.coords for p in points], dtype=float).reshape(-1, manifold.ndim)
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, manifold.ndim)
    arr = arr.reshape(-1, manifold.ndim)
    if manifold is not Manifold.S1:
        beta = arr[:, 0 if manifold is Manifold.S2 else 1]
        if np.any((beta < 0) | (beta > np.pi)):
            arr = reduce_coords(manifold, arr)
    return arr


# ---------------------------------------------------------------------------
# Rotations


def rotation_matrix(alpha, beta, gamma) -> np.ndarray:
    """3x3 matrices Rz(alpha) Ry(beta) Rz(gamma); broadcasts over inputs."""
    a, b, g = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (alpha, beta, gamma)))
    ca, sa, cb, sb, cg, sg = np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.cos(g), np.sin(g)
    R = np.empty(a.shape + (3, 3))
    R[..., 0, 0] = ca * cb * cg - sa * sg
    R[..., 0, 1] = -ca * cb * sg - sa * cg
    R[..., 0, 2] = ca * sb
    R[..., 1, 0] = sa * cb * cg + ca * sg
    R[..., 1, 1] = -sa * cb * sg + ca * cg
    R[..., 1, 2] = sa * sb
    R[..., 2, 0] = -sb * cg
    R[..., 2, 1] = sb * sg
    R[..., 2, 2] = cb
    return R


def euler_from_matrix(R: np.ndarray) -> np.ndarray:
    """ZYZ Euler angles of rotation matrices, shape (..., 3)."""
    R = np.asarray(R, dtype=float)
    # (1 + cos b) (cos, sin)(a + g) and (1 - cos b) (cos, sin)(a - g)
    cp, sp = R[..., 0, 0] + R[..., 1, 1], R[..., 1, 0] - R[..., 0, 1]
    cm, sm = R[..., 1, 1] - R[..., 0, 0], -(R[..., 1, 0] + R[..., 0, 1])
    first = np.hypot(R[..., 0, 2], R[..., 1, 2])
    beta = np.arctan2(0.5 * (first + np.hypot(R[..., 2, 0], R[..., 2, 1])), R[..., 2, 2])
    plus = np.arctan2(sp, cp)
    minus = np.arctan2(sm, cm)
    # first-order entries fix alpha away from the poles; the better
    # conditioned of a +- g then gives gamma
    alpha = np.where(first > 0, np.arctan2(R[..., 1, 2], R[..., 0, 2]), np.where(beta < np.pi / 2, plus, minus))
    gamma = np.where(beta < np.pi / 2, plus - alpha, alpha - minus)
    return np.stack([np.mod(alpha, TWO_PI), beta, np.mod(gamma, TWO_PI)], axis=-1)


def compose(g, h) -> np.ndarray:
    """Euler angles of the product g h."""
    return euler_from_matrix(rotation_matrix(*np.asarray(g, float).T) @ rotation_matrix(*np.asarray(h, float).T))


def inverse(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    a, b, c = g[..., 0], g[..., 1], g[..., 2]
    return reduce_coords(Manifold.SO3, np.stack([np.pi - c, b, np.pi - a], axis=-1)).reshape(g.shape)


def geodesic_distance(g, h) -> np.ndarray:
    """Rotation angle of g^-1 h."""
    Rg = rotation_matrix(*np.asarray(g, float).T)
    Rh = rotation_matrix(*np.asarray(h, float).T)
    tr = np.einsum("...ij,...ij->...", Rg, Rh)
    return np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))


def sphere_to_xyz(beta, phi) -> np.ndarray:
    beta, phi = np.asarray(beta, float), np.asarray(phi, float)
    sb = np.sin(beta)
    return np.stack([sb * np.cos(phi), sb * np.sin(phi), np.cos(beta)], axis=-1)


def xyz_to_sphere(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    beta = np.arccos(np.clip(v[..., 2] / np.linalg.norm(v, axis=-1), -1.0, 1.0))
    phi = np.mod(np.arctan2(v[..., 1], v[..., 0]), TWO_PI)
    return np.stack([beta, phi], axis=-1)


# ---------------------------------------------------------------------------
# Associated Legendre functions


@lru_cache(maxsize=32)
def _legendre_coeffs(L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    l = np.arange(L + 1, dtype=float)[:, None]
    m = np.arange(L + 1, dtype=float)[None, :]
    valid = l > m
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.sqrt((2 * l - 1) * (2 * l + 1) / ((l - m) * (l + m)))
        b = np.sqrt((2 * l + 1) * (l + m - 1) * (l - m - 1) / ((l - m) * (l + m) * (2 * l - 3)))
    a = np.where(valid, a, 0.0)
    b = np.where(valid & (l - m >= 2), b, 0.0)
    mm = np.arange(1, L + 1, dtype=float)
    sectoral = np.sqrt((2 * mm + 1) / (2 * mm))
    for arr in (a, b, sectoral):
        arr.setflags(write=False)
    return a, b, sectoral


def iter_legendre(L: int, x, s=None):
    """Yield ``(l, P)`` for l = 0..L, P[..., m] = Pn_l^m(x) for m <= l (zero above).

    Fully normalized three-term recurrence in the degree at fixed order,
    seeded from the sectoral terms Pn_m^m = prod_k sqrt((2k+1)/2k) * s^m.
    Seeds underflow gracefully to zero; no factorials are formed.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None)) if s is None else np.asarray(s, dtype=float)
    a, b, sectoral = _legendre_coeffs(L)
    shape = x.shape + (L + 1,)
    prev2 = np.zeros(shape)
    prev1 = np.zeros(shape)
    seed = np.ones(x.shape)
    xe = x[..., None]
    for l in range(L + 1):
        cur = np.zeros(shape)
        if l > 0:
            cur[..., :l] = a[l, :l] * xe * prev1[..., :l] - b[l, :l] * prev2[..., :l]
            seed = seed * sectoral[l - 1] * s
        cur[..., l] = seed
        yield l, cur
        prev2, prev1 = prev1, cur


def legendre_table(L: int, x) -> np.ndarray:
    """Pn_l^m(x) for all l, m <= L; shape x.shape + (L+1, L+1) indexed [..., l, m]."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (L + 1, L + 1))
    for l, P in iter_legendre(L, x):
        out[..., l, :] = P
    return out


def _trig(order: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """cos(m t) for m >= 0, sin(|m| t) for m < 0; shape angle.shape + order.shape."""
    t = np.asarray(angle, dtype=float)[..., None] * np.abs(order)
    return np.where(order >= 0, np.cos(t), np.sin(t))


def _sphere_block(l: int, P: np.ndarray, phi: np.ndarray) -> np.ndarray:
    m = np.arange(-l, l + 1)
    norm = np.where(m == 0, 1.0, math.sqrt(2.0))
    return norm * P[..., np.abs(m)] * _trig(m, phi)


# ---------------------------------------------------------------------------
# Wigner d


def _wigner_seed_log(l0, m, n):
    """log|d| and sign of the closed-form single-term seed at l0 = max(|m|,|n|)."""
    # row index m, column index n
    s = np.maximum(0, n - m)
    pa = 2 * l0 + n - m - 2 * s  # power of cos(beta/2)
    pb = m - n + 2 * s  # power of sin(beta/2)
    from scipy.special import gammaln

    lognorm = 0.5 * (gammaln(l0 + n + 1) + gammaln(l0 - n + 1) + gammaln(l0 + m + 1) + gammaln(l0 - m + 1))
    lognorm = lognorm - (gammaln(l0 + n - s + 1) + gammaln(s + 1) + gammaln(m - n + s + 1) + gammaln(l0 - m - s + 1))
    sign = np.where((m - n + s) % 2 == 0, 1.0, -1.0)
    return lognorm, pa, pb, sign


@lru_cache(maxsize=32)
def _wigner_static(L: int):
    m = np.arange(-L, L + 1)[:, None] * np.ones((1, 2 * L + 1), dtype=np.int64)
    n = m.T.copy()
    l0 = np.maximum(np.abs(m), np.abs(n))
    lognorm, pa, pb, sign = _wigner_seed_log(l0, m, n)
    return m, n, l0, lognorm, pa, pb, sign


def iter_wigner_d_complex(L: int, beta):
    """Yield ``(l, d)`` with d[..., m+L, n+L] = d^l_{mn}(beta) (standard convention).

    The standard convention has d^1_{10} = -sin(beta)/sqrt(2).  Entries with
    max(|m|, |n|) > l are zero.  Recurrence in l at fixed (m, n), seeded at
    l = max(|m|, |n|) from the closed form evaluated in log space.
    """
    beta = np.asarray(beta, dtype=float)
    m, n, l0, lognorm, pa, pb, sign = _wigner_static(L)
    mf, nf = m.astype(float), n.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lc = np.log(np.abs(np.cos(beta / 2)))[..., None, None]
        ls = np.log(np.abs(np.sin(beta / 2)))[..., None, None]
        logv = lognorm + np.where(pa > 0, pa * lc, 0.0) + np.where(pb > 0, pb * ls, 0.0)
    seeds = sign * np.exp(logv)
    cb = np.cos(beta)[..., None, None]
    shape = beta.shape + (2 * L + 1, 2 * L + 1)
    prev2 = np.zeros(shape)
    prev1 = np.zeros(shape)
    for l in range(L + 1):
        if l == 0:
            cur = np.where(l0 == 0, seeds, 0.0)
        else:
            k = l - 1  # step k -> k+1 = l
            active = l0 < l
            with np.errstate(divide="ignore", invalid="ignore"):
                den = np.sqrt((l * l - mf * mf) * (l * l - nf * nf))
                c1 = l * (2 * k + 1) / den
                shift = mf * nf / (k * l) if k > 0 else np.zeros_like(mf)
                c2 = (l / k) * np.sqrt((k * k - mf * mf) * (k * k - nf * nf)) / den if k > 0 else np.zeros_like(mf)
            c1 = np.where(active, c1, 0.0)
            c2 = np.where(active & (l0 < k), c2, 0.0)
            shift = np.where(active, shift, 0.0)
            cur = c1 * (cb - shift) * prev1 - c2 * prev2
            cur = np.where(l0 == l, seeds, cur)
        yield l, cur
        prev2, prev1 = prev1, cur


def _realify(dc: np.ndarray, l: int) -> np.ndarray:
    """Conjugate a standard-convention d block into the real basis.

    Y^c_m (no Condon-Shortley phase) = s_m Y^CS_m with s_m = (-1)^m for m > 0,
    and Y^CS(Ry(b) r) = d(b) Y^CS(r).  The real basis is Y = C Y^c with
    C_{m,m} = a_m, C_{m,-m} = b_m.
    """
    m = np.arange(-l, l + 1)
    s = np.where((m > 0) & (m % 2 == 1), -1.0, 1.0)
    dt = dc * s[:, None] * s[None, :]
    r2 = 1.0 / math.sqrt(2.0)
    a = np.where(m > 0, r2, np.where(m < 0, 1j * r2, 1.0)).astype(complex)
    b = np.where(m > 0, r2, np.where(m < 0, -1j * r2, 0.0)).astype(complex)
    flip_r = dt[..., ::-1, :]
    flip_c = dt[..., :, ::-1]
    flip_rc = dt[..., ::-1, ::-1]
    A, Bc = a[:, None], b[:, None]
    out = (
        A * np.conj(a)[None, :] * dt
        + A * np.conj(b)[None, :] * flip_c
        + Bc * np.conj(a)[None, :] * flip_r
        + Bc * np.conj(b)[None, :] * flip_rc
    )
    return out.real


def iter_wigner_d(L: int, beta):
    """Yield ``(l, d)`` for l = 0..L where d has shape beta.shape + (2l+1, 2l+1).

    ``d`` is the real orthogonal matrix of Ry(beta) acting on the degree-l
    real sphere basis.
    """
    for l, dc in iter_wigner_d_complex(L, beta):
        block = dc[..., L - l : L + l + 1, L - l : L + l + 1]
        yield l, _realify(block, l)


def wigner_d(degree: int, beta: float) -> np.ndarray:
    """Real middle-angle factor d^l(beta), a (2l+1) x (2l+1) orthogonal matrix."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    out = None
    for l, d in iter_wigner_d(degree, beta):
        out = d
    return out


def z_rotation_block(degree: int, angle) -> np.ndarray:
    """Real matrix of Rz(angle) on the degree-l sphere basis, shape angle.shape + (2l+1, 2l+1)."""
    angle = np.asarray(angle, dtype=float)
    m = np.arange(-degree, degree + 1)
    t = angle[..., None] * m
    Z = np.zeros(angle.shape + (2 * degree + 1, 2 * degree + 1))
    idx = np.arange(2 * degree + 1)
    Z[..., idx, idx] = np.cos(t)
    # row m couples to column -m with -sin(m t)
    off = m != 0
    Z[..., idx[off], idx[off][::-1]] = -np.sin(t[..., off])
    return Z


def rotation_block(degree: int, alpha, beta, gamma) -> np.ndarray:
    """U^l(g): real orthogonal representation matrix, broadcast over points."""
    beta = np.asarray(beta, dtype=float)
    d = wigner_d_batch(degree, beta)
    return z_rotation_block(degree, alpha) @ d @ z_rotation_block(degree, gamma)


def wigner_d_batch(degree: int, beta) -> np.ndarray:
    out = None
    for l, d in iter_wigner_d(degree, beta):
        out = d
    return out


# ---------------------------------------------------------------------------
# Basis evaluation


def eval_basis_block(manifold, degree: int, points) -> np.ndarray:
    """All basis functions of one degree at many points.

    Returns an array of shape (N, block_size) with columns in canonical
    order.  ``points`` is a list of ManifoldPoint or an (N, ndim) array.
    """
    manifold = Manifold.parse(manifold)
    if degree < 0:
        raise ValueError("degree must be non-negative")
    c = as_coords(manifold, points)
    N = c.shape[0]
    if degree == 0:
        return np.ones((N, 1))
    if N == 0:
        return np.zeros((0, block_size(manifold, degree)))
    if manifold is Manifold.S1:
        t = degree * c[:, 0]
        return math.sqrt(2.0) * np.stack([np.cos(t), np.sin(t)], axis=-1)
    if manifold is Manifold.S2:
        beta, phi = c[:, 0], c[:, 1]
        P = None
        for _, P in iter_legendre(degree, np.cos(beta), np.abs(np.sin(beta))):
            pass
        return _sphere_block(degree, P, phi)
    U = rotation_block(degree, c[:, 0], c[:, 1], c[:, 2])
    return math.sqrt(2 * degree + 1) * U.reshape(N, -1)


def eval_basis(idx: BasisIndex, p: ManifoldPoint) -> float:
    """Value of one real basis function at one point."""
    if idx.manifold is not p.manifold:
        raise ValueError(f"index on {idx.manifold.value} but point on {p.manifold.value}")
    row = eval_basis_block(idx.manifold, idx.degree, [p])[0]
    return float(row[idx.position - block_offset(idx.manifold, idx.degree)])


def iter_basis_blocks(manifold, L: int, points):
    """Yield ``(degree, block)`` for degree 0..L, streaming through one recurrence."""
    manifold = Manifold.parse(manifold)
    c = as_coords(manifold, points)
    N = c.shape[0]
    if manifold is Manifold.S1:
        for l in range(L + 1):
            yield l, eval_basis_block(manifold, l, c)
    elif manifold is Manifold.S2:
        beta, phi = c[:, 0], c[:, 1]
        for l, P in iter_legendre(L, np.cos(beta), np.abs(np.sin(beta))):
            yield l, _sphere_block(l, P, phi) if l else np.ones((N, 1))
    else:
        for l, d in iter_wigner_d(L, c[:, 1]):
            U = z_rotation_block(l, c[:, 0]) @ d @ z_rotation_block(l, c[:, 2])
            yield l, math.sqrt(2 * l + 1) * U.reshape(N, -1)


def design_matrix(manifold, L: int, points) -> np.ndarray:
    """(N, J(L)) matrix of every basis function at every point."""
    blocks = [b for _, b in iter_basis_blocks(manifold, L, points)]
    return np.concatenate(blocks, axis=1)
