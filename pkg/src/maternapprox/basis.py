"""Direct (scaling-function) bases on regular lattices.

Two families are supported:

``spline``
    Cardinal B-splines of order ``m`` (1, 2 or 3), centred on lattice
    nodes, unnormalised (the ``m = 1`` hat has value 1 at its node).
``db3``
    Translates of the Daubechies-3 scaling function, L2-normalised:
    ``h^(-1/2) phi(s/h - k)`` with support ``[k h, (k + 5) h]``.

Every function whose support intersects the open box is kept.  Mass and
stiffness entries are inner products over the whole line (no boundary rows
are modified), so the 1-d matrices are banded Toeplitz sections and the
d-dimensional ones follow from Kronecker products.  Basis functions are
ordered with the first axis varying slowest, matching ``kron``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, floor, ceil, sqrt

import numpy as np
import scipy.sparse as sp

from .matern import as_points
from .sparse import canonical, kron, lump_rows

__all__ = [
    "DB3_LAMBDA",
    "DB3_LAMBDA_EXACT",
    "db3_connection_coefficients",
    "db3_filter",
    "Db3Table",
    "db3_table",
    "cascade_db3",
    "bspline",
    "bspline_derivative",
    "spline_stencil",
    "spline_CG_1d",
    "db3_CG_1d",
    "lump",
    "tensor_assemble",
    "BasisSpec",
    "BasisSystem",
    "build_basis",
    "evaluate_basis",
    "LocationOutsideDomain",
]

# Connection coefficients <phi', phi'(. - eta)> for DB3, eta = 0..4, as
# commonly tabulated (truncated to 3-4 digits).
DB3_LAMBDA = (5.267, -3.390, 0.876, -0.114, -0.00535)
# The same coefficients in closed form.  The truncated table does not sum to
# zero (its symbol is 3e-4 at frequency 0), which acts like a spurious
# 3e-4 / h^2 mass term that grows under refinement, so G uses these.
DB3_LAMBDA_EXACT = (295 / 56, -356 / 105, 92 / 105, -4 / 35, -3 / 560)

DB3_TABLE_LEVEL = 17
_SNAP = 1e-9


class LocationOutsideDomain(ValueError):
    pass


def db3_filter():
    """Two-scale coefficients ``p_k`` of DB3, normalised so that ``sum(p) == 2``."""
    r = sqrt(10.0)
    s = sqrt(5 + 2 * r)
    return np.array(
        [1 + r + s, 5 + r + 3 * s, 10 - 2 * r + 2 * s, 10 - 2 * r - 2 * s, 5 + r - 3 * s, 1 + r - s]
    ) / 16.0


def cascade_db3(levels):
    """Values of the DB3 scaling function on ``k 2^-levels``, ``0 <= k <= 5 2^levels``.

    Integer values come from the eigenvector (eigenvalue 1) of the
    two-scale matrix, normalised to sum to one; each further level fills the
    odd dyadic points from the previous level.
    """
    if levels < 0:
        raise ValueError("levels must be non-negative")
    p = db3_filter()
    # phi(i) = sum_j p[2i - j] phi(j) for interior integers i, j = 1..4
    m = np.array([[p[2 * i - j] if 0 <= 2 * i - j <= 5 else 0.0 for j in range(1, 5)] for i in range(1, 5)])
    w, v = np.linalg.eig(m)
    vec = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    vals = np.zeros(6)
    vals[1:5] = vec / vec.sum()
    for lev in range(1, levels + 1):
        half = 2 ** (lev - 1)
        new = np.zeros(5 * 2**lev + 1)
        new[::2] = vals
        odd = np.arange(1, 5 * 2**lev, 2)
        for k in range(6):
            j = odd - k * half
            ok = (j >= 0) & (j <= 5 * half)
            new[odd[ok]] += p[k] * vals[j[ok]]
        vals = new
    return vals


def db3_connection_coefficients():
    """``Lambda(0..4)`` from the two-scale relation.

    ``Lambda(n) = 2 sum_kl p_k p_l Lambda(2n + l - k)``, normalised by
    ``sum_n n^2 Lambda(n) = -2`` (polynomial reproduction of ``x^2``).
    """
    p = db3_filter()
    T = np.zeros((9, 9))
    for a, n in enumerate(range(-4, 5)):
        for k in range(6):
            for l in range(6):
                j = 2 * n + l - k
                if -4 <= j <= 4:
                    T[a, j + 4] += 2 * p[k] * p[l]
    w, v = np.linalg.eig(T)
    lam = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    lam *= -2.0 / np.dot(np.arange(-4, 5) ** 2, lam)
    return lam[4:]


@dataclass(frozen=True)
class Db3Table:
    levels: int
    values: np.ndarray = field(repr=False)
    lam: tuple = DB3_LAMBDA_EXACT

    @property
    def p(self):
        return db3_filter()

    def lambda_at(self, eta):
        eta = abs(int(eta))
        return self.lam[eta] if eta < len(self.lam) else 0.0

    def __call__(self, s):
        """Scaling function at arbitrary points (linear interpolation, zero off ``(0, 5)``)."""
        s = np.asarray(s, dtype=float)
        x = s * 2.0**self.levels
        out = np.zeros(s.shape)
        inside = (x > 0) & (x < self.values.size - 1)
        xi = x[inside]
        i0 = np.floor(xi).astype(np.int64)
        frac = xi - i0
        out[inside] = (1 - frac) * self.values[i0] + frac * self.values[i0 + 1]
        return out


@lru_cache(maxsize=4)
def db3_table(levels=DB3_TABLE_LEVEL):
    vals = cascade_db3(levels)
    vals.setflags(write=False)
    return Db3Table(levels=levels, values=vals)


def bspline(m, t):
    """Cardinal B-spline of order ``m`` (degree ``m``) supported on ``[0, m + 1]``."""
    t = np.asarray(t, dtype=float)
    if m == 0:
        return ((t >= 0) & (t < 1)).astype(float)
    out = np.zeros(t.shape)
    for j in range(m + 2):
        out += (-1) ** j * comb(m + 1, j) * np.maximum(t - j, 0.0) ** m
    out /= factorial(m)
    out[(t <= 0) | (t >= m + 1)] = 0.0
    return out


def bspline_derivative(m, t):
    return bspline(m - 1, t) - bspline(m - 1, np.asarray(t, dtype=float) - 1)


def _bspline_pieces(m):
    """Exact polynomial pieces of the order-``m`` B-spline: ``pieces[c]`` on ``[c, c+1]``
    as rational coefficients in the local variable ``u = t - c``."""
    pieces = []
    for cell in range(m + 1):
        poly = [Fraction(0)] * (m + 1)
        for j in range(cell + 1):
            # (u + cell - j)^m expanded in u
            shift = cell - j
            coef = Fraction((-1) ** j * comb(m + 1, j), factorial(m))
            for k in range(m + 1):
                poly[k] += coef * comb(m, k) * Fraction(shift) ** (m - k)
        pieces.append(poly)
    return pieces


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_int01(a):
    return sum(c / (k + 1) for k, c in enumerate(a))


def _poly_der(a):
    return [k * c for k, c in enumerate(a)][1:] or [Fraction(0)]


@lru_cache(maxsize=None)
def spline_stencil(m):
    """Unit-spacing inner products ``(c[delta], g[delta])`` for ``delta = 0..m``.

    The integrands are piecewise polynomials, so the integrals are done in
    exact rational arithmetic cell by cell and rounded once.
    """
    if m not in (1, 2, 3):
        raise ValueError(f"spline order must be 1, 2 or 3, got {m}")
    pieces = _bspline_pieces(m)
    dpieces = [_poly_der(p) for p in pieces]
    c = np.empty(m + 1)
    g = np.empty(m + 1)
    for delta in range(m + 1):
        # cell `cell` of B(t) meets cell `cell - delta` of B(t - delta)
        cells = range(delta, m + 1)
        c[delta] = float(sum(_poly_int01(_poly_mul(pieces[k], pieces[k - delta])) for k in cells))
        g[delta] = float(sum(_poly_int01(_poly_mul(dpieces[k], dpieces[k - delta])) for k in cells))
    return c, g


def _toeplitz(n, stencil):
    offsets = []
    diags = []
    for k, v in enumerate(stencil):
        if k >= n or v == 0.0:
            continue
        offsets.extend([k] if k == 0 else [k, -k])
        diags.extend([np.full(n - k, v)] if k == 0 else [np.full(n - k, v)] * 2)
    return canonical(sp.diags(diags, offsets, shape=(n, n)))


def _spacing(J, spacing):
    if spacing is not None:
        return float(spacing)
    return 2.0 ** (-J)


def spline_CG_1d(m, J=0, nnodes=None, spacing=None):
    """Mass and stiffness matrices of ``nnodes`` order-``m`` splines at spacing ``2^-J``."""
    if nnodes is None or nnodes < m + 2:
        raise ValueError(f"need at least {m + 2} nodes")
    h = _spacing(J, spacing)
    c, g = spline_stencil(m)
    return _toeplitz(nnodes, c * h), _toeplitz(nnodes, g / h)


def db3_CG_1d(J=0, nnodes=None, spacing=None, lam=DB3_LAMBDA_EXACT):
    """``C = I`` and the 9-band ``G[k, l] = h^-2 Lambda(k - l)`` for the normalised DB3 basis."""
    if nnodes is None or nnodes < 9:
        raise ValueError("need at least 9 DB3 functions")
    h = _spacing(J, spacing)
    lam = np.asarray(lam) / h**2
    return canonical(sp.identity(nnodes, format="csc")), _toeplitz(nnodes, lam)


def lump(c):
    """Diagonal matrix of row sums."""
    return lump_rows(c)


def tensor_assemble(C1, G1, d=None):
    """Tensor-product mass and stiffness matrices.

    ``C1``/``G1`` are either a single pair of 1-d matrices (replicated over
    ``d`` axes) or per-axis sequences.
    """
    if sp.issparse(C1) or isinstance(C1, np.ndarray):
        if d is None:
            raise ValueError("d is required with a single 1-d pair")
        Cs, Gs = [C1] * d, [G1] * d
    else:
        Cs, Gs = list(C1), list(G1)
    if len(Cs) == 1:
        return canonical(Cs[0]), canonical(Gs[0])
    C = Cs[0]
    for c in Cs[1:]:
        C = kron(C, c)
    G = None
    for i in range(len(Cs)):
        term = Gs[0] if i == 0 else Cs[0]
        for j in range(1, len(Cs)):
            term = kron(term, Gs[j] if j == i else Cs[j])
        G = term if G is None else G + term
    return canonical(C), canonical(G)


# --- lattice geometry ------------------------------------------------------


@dataclass(frozen=True)
class BasisSpec:
    """Basis family on a box.

    Function ``j`` along an axis sits at ``origin + j * spacing`` (spline
    centre, DB3 left support edge).  Indices run over every translate whose
    support meets the open box ``(lower, upper)``.
    """

    family: str
    order: int
    lower: tuple
    upper: tuple
    spacing: float
    origin: tuple = None

    def __post_init__(self):
        if self.family not in ("spline", "db3"):
            raise ValueError(f"unknown basis family {self.family!r}")
        if self.family == "spline" and self.order not in (1, 2, 3):
            raise ValueError("spline order must be 1, 2 or 3")
        if self.family == "db3" and self.order != 3:
            raise ValueError("only the N = 3 Daubechies basis is supported")
        object.__setattr__(self, "lower", tuple(float(v) for v in np.atleast_1d(self.lower)))
        object.__setattr__(self, "upper", tuple(float(v) for v in np.atleast_1d(self.upper)))
        if self.origin is None:
            object.__setattr__(self, "origin", self.lower)
        else:
            object.__setattr__(self, "origin", tuple(float(v) for v in np.atleast_1d(self.origin)))
        if len(self.lower) != len(self.upper) or len(self.origin) != len(self.lower):
            raise ValueError("lower, upper and origin must have equal length")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @classmethod
    def on_box(cls, family, lower, upper, nodes_per_axis, order=None, expand=0.0, fixed_count=False):
        """Lattice with ``nodes_per_axis`` nodes spanning the box edge to edge,
        extended by ``expand`` in every direction without moving the nodes.

        With ``fixed_count`` the nodes span the expanded box instead, so the
        number of basis functions does not grow with ``expand``.
        """
        if order is None:
            order = 3 if family == "db3" else 1
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if fixed_count:
            lower, upper, expand = lower - expand, upper + expand, 0.0
        spacing = float((upper - lower).max() / (nodes_per_axis - 1))
        return cls(
            family=family,
            order=order,
            lower=tuple(lower - expand),
            upper=tuple(upper + expand),
            spacing=spacing,
            origin=tuple(lower),
        )

    @property
    def d(self):
        return len(self.lower)

    @property
    def support(self):
        """Support of function 0 in lattice units."""
        if self.family == "spline":
            half = (self.order + 1) / 2
            return -half, half
        return 0.0, 5.0

    def index_range(self, axis):
        lo, hi = self.support
        a = (self.lower[axis] - self.origin[axis]) / self.spacing
        b = (self.upper[axis] - self.origin[axis]) / self.spacing
        a = round(a) if abs(a - round(a)) < _SNAP else a
        b = round(b) if abs(b - round(b)) < _SNAP else b
        return floor(a - hi) + 1, ceil(b - lo) - 1

    @property
    def shape(self):
        return tuple(hi - lo + 1 for lo, hi in (self.index_range(ax) for ax in range(self.d)))

    @property
    def n(self):
        return int(np.prod(self.shape))

    def centers(self, axis):
        """Lattice positions of the functions along ``axis``."""
        lo, hi = self.index_range(axis)
        return self.origin[axis] + self.spacing * np.arange(lo, hi + 1)


@dataclass(frozen=True)
class BasisSystem:
    spec: BasisSpec
    C: sp.csc_matrix
    G: sp.csc_matrix
    C_lumped: sp.csc_matrix

    @property
    def d(self):
        return self.spec.d

    @property
    def n(self):
        return self.C.shape[0]


def build_basis(spec):
    """Assemble ``C``, ``G`` and the lumped ``C`` for a :class:`BasisSpec`."""
    Cs, Gs = [], []
    for n_axis in spec.shape:
        if spec.family == "spline":
            c, g = spline_CG_1d(spec.order, nnodes=n_axis, spacing=spec.spacing)
        else:
            c, g = db3_CG_1d(nnodes=n_axis, spacing=spec.spacing)
        Cs.append(c)
        Gs.append(g)
    C, G = tensor_assemble(Cs, Gs)
    return BasisSystem(spec=spec, C=C, G=G, C_lumped=lump(C))


def _axis_values(spec, axis, x):
    lo, hi = spec.support
    width = int(round(hi - lo))
    jmin, jmax = spec.index_range(axis)
    t = (x - spec.origin[axis]) / spec.spacing
    j = np.floor(t - hi).astype(np.int64)[:, None] + 1 + np.arange(width + 1)[None, :]
    u = t[:, None] - j - lo
    if spec.family == "spline":
        vals = bspline(spec.order, u)
    else:
        vals = db3_table()(u) / sqrt(spec.spacing)
    idx = j - jmin
    vals[(idx < 0) | (idx > jmax - jmin)] = 0.0
    return np.clip(idx, 0, jmax - jmin), vals


def evaluate_basis(spec, locations):
    """Sparse ``B`` with ``B[i, j] = xi_j(s_i)`` (CSR, one row per location)."""
    pts = as_points(locations)
    if pts.shape[1] != spec.d:
        raise ValueError(f"locations have dimension {pts.shape[1]}, basis has {spec.d}")
    lower = np.asarray(spec.lower)
    upper = np.asarray(spec.upper)
    tol = 1e-12 * max(1.0, np.abs(upper).max(), np.abs(lower).max())
    if np.any(pts < lower - tol) or np.any(pts > upper + tol):
        raise LocationOutsideDomain("location outside the basis domain")
    shape = spec.shape
    cols = np.zeros((pts.shape[0], 1), dtype=np.int64)
    vals = np.ones((pts.shape[0], 1))
    for axis in range(spec.d):
        idx, v = _axis_values(spec, axis, pts[:, axis])
        cols = (cols[:, :, None] * shape[axis] + idx[:, None, :]).reshape(pts.shape[0], -1)
        vals = (vals[:, :, None] * v[:, None, :]).reshape(pts.shape[0], -1)
    rows = np.repeat(np.arange(pts.shape[0]), cols.shape[1])
    keep = vals.ravel() != 0.0
    B = sp.csr_matrix(
        (vals.ravel()[keep], (rows[keep], cols.ravel()[keep])), shape=(pts.shape[0], spec.n)
    )
    B.sum_duplicates()
    return B
