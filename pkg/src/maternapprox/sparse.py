"""Sparse linear algebra used by every approximation method.

Matrices are ``scipy.sparse.csc_matrix`` objects kept in canonical form
(column-major, sorted row indices, no duplicates).  General operations
(products, sums, transposes) are the scipy ones; this module adds the
pieces scipy does not provide:

* ``kron`` with an index-overflow guard,
* ``sandwich`` for exactly symmetric ``B^T diag(d) B`` products,
* a sparse Cholesky factorization (elimination tree, symbolic row counts,
  up-looking numeric phase) compiled with numba, with an approximate
  minimum degree ordering,
* dense reference routines used as test oracles,
* a plain-text coordinate dump.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "NotPositiveDefinite",
    "AsymmetricInput",
    "CholeskyFactor",
    "canonical",
    "kron",
    "sandwich",
    "lump_rows",
    "amd_order",
    "cholesky",
    "solve",
    "dense_cholesky_solve",
    "dump_coordinates",
    "load_coordinates",
]

PIVOT_RTOL = 1e-12
SYMMETRY_RTOL = 1e-10


class NotPositiveDefinite(np.linalg.LinAlgError):
    """A pivot fell below ``PIVOT_RTOL`` times the largest diagonal entry."""

    def __init__(self, column, pivot):
        super().__init__(f"non-positive pivot {pivot:.3e} at column {column}")
        self.column = column
        self.pivot = pivot


class AsymmetricInput(ValueError):
    pass


def canonical(a):
    """Return ``a`` as a float64 CSC matrix with sorted, summed indices."""
    a = sp.csc_matrix(a, dtype=np.float64)
    a.sum_duplicates()
    a.sort_indices()
    return a


def kron(a, b):
    """Kronecker product; entry ``(i1*b.rows + i2, j1*b.cols + j2) = a[i1,j1]*b[i2,j2]``."""
    limit = np.iinfo(np.int64).max
    for x, y in ((a.shape[0], b.shape[0]), (a.shape[1], b.shape[1])):
        if x and y and x > limit // y:
            raise OverflowError("kron result dimension overflows int64")
    return canonical(sp.kron(a, b, format="csc"))


def sandwich(b, d=None):
    """``b.T @ diag(d) @ b`` with exact floating-point symmetry."""
    b = sp.csr_matrix(b)
    db = b if d is None else sp.diags(np.asarray(d, dtype=float)) @ b
    s = (b.T @ db).tocsc()
    return canonical(0.5 * (s + s.T))


def lump_rows(c):
    """Diagonal matrix holding the row sums of ``c`` (mass lumping)."""
    return sp.diags(np.asarray(c.sum(axis=1)).ravel(), format="csc")


def amd_order(a):
    """Approximate minimum degree permutation of a symmetric matrix."""
    from cvxopt import amd, spmatrix

    low = sp.tril(a, format="coo")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    m = spmatrix(
        np.ones(low.nnz).tolist(),
        low.row.astype(int).tolist(),
        low.col.astype(int).tolist(),
        (n, n),
    )
    return np.asarray(amd.order(m, "L"), dtype=np.int64).ravel()


# --- numba kernels -------------------------------------------------------
# ``U`` below is the upper triangle of the permuted matrix in CSC form, so
# column k of U is row k of the lower triangle.


@numba.njit(cache=True)
def _etree(n, up, ui):
    parent = np.full(n, -1, np.int64)
    ancestor = np.full(n, -1, np.int64)
    for k in range(n):
        for p in range(up[k], up[k + 1]):
            i = ui[p]
            while i != -1 and i < k:
                nxt = ancestor[i]
                ancestor[i] = k
                if nxt == -1:
                    parent[i] = k
                i = nxt
    return parent


@numba.njit(cache=True)
def _ereach(up, ui, k, parent, stack, mark):
    # Pattern of row k of L, returned in stack[top:] in topological order.
    n = parent.shape[0]
    top = n
    mark[k] = k
    for p in range(up[k], up[k + 1]):
        i = ui[p]
        if i > k:
            continue
        length = 0
        while mark[i] != k:
            stack[length] = i
            length += 1
            mark[i] = k
            i = parent[i]
        while length > 0:
            top -= 1
            length -= 1
            stack[top] = stack[length]
    return top


@numba.njit(cache=True)
def _column_pointers(n, up, ui, parent):
    counts = np.ones(n, np.int64)
    stack = np.empty(n, np.int64)
    mark = np.full(n, -1, np.int64)
    for k in range(n):
        top = _ereach(up, ui, k, parent, stack, mark)
        for t in range(top, n):
            counts[stack[t]] += 1
    lp = np.zeros(n + 1, np.int64)
    for j in range(n):
        lp[j + 1] = lp[j] + counts[j]
    return lp


@numba.njit(cache=True)
def _numeric(n, up, ui, ux, parent, lp, pivot_tol):
    nnz = lp[n]
    li = np.empty(nnz, np.int64)
    lx = np.empty(nnz, np.float64)
    nxt = lp[:n].copy()
    x = np.zeros(n, np.float64)
    stack = np.empty(n, np.int64)
    mark = np.full(n, -1, np.int64)
    for k in range(n):
        top = _ereach(up, ui, k, parent, stack, mark)
        for p in range(up[k], up[k + 1]):
            i = ui[p]
            if i <= k:
                x[i] = ux[p]
        d = x[k]
        x[k] = 0.0
        for t in range(top, n):
            i = stack[t]
            lki = x[i] / lx[lp[i]]
            x[i] = 0.0
            for p in range(lp[i] + 1, nxt[i]):
                x[li[p]] -= lx[p] * lki
            d -= lki * lki
            p = nxt[i]
            nxt[i] += 1
            li[p] = k
            lx[p] = lki
        if d <= pivot_tol:
            return li, lx, k, d
        p = nxt[k]
        nxt[k] += 1
        li[p] = k
        lx[p] = np.sqrt(d)
    return li, lx, -1, 0.0


@numba.njit(cache=True)
def _forward(lp, li, lx, x):
    n = lp.shape[0] - 1
    r = x.shape[1]
    for j in range(n):
        djj = lx[lp[j]]
        for c in range(r):
            x[j, c] /= djj
        for p in range(lp[j] + 1, lp[j + 1]):
            i = li[p]
            v = lx[p]
            for c in range(r):
                x[i, c] -= v * x[j, c]


@numba.njit(cache=True)
def _backward(lp, li, lx, x):
    n = lp.shape[0] - 1
    r = x.shape[1]
    for j in range(n - 1, -1, -1):
        for p in range(lp[j] + 1, lp[j + 1]):
            i = li[p]
            v = lx[p]
            for c in range(r):
                x[j, c] -= v * x[i, c]
        djj = lx[lp[j]]
        for c in range(r):
            x[j, c] /= djj


# --- public factorization API ---------------------------------------------


@dataclass(frozen=True)
class CholeskyFactor:
    """``P A P^T = L L^T`` with ``(P A P^T)[i, j] = A[perm[i], perm[j]]``."""

    perm: np.ndarray
    L: sp.csc_matrix

    @property
    def n(self):
        return self.L.shape[0]

    @property
    def nnz(self):
        return self.L.nnz

    def solve(self, b):
        return solve(self, b)

    def logdet(self):
        return 2.0 * np.log(self.L.diagonal()).sum()


def _check_symmetric(a):
    scale = abs(a).max() if a.nnz else 0.0
    diff = a - a.T
    if diff.nnz and abs(diff).max() > SYMMETRY_RTOL * max(scale, 1e-300):
        raise AsymmetricInput("matrix is not symmetric")


def cholesky(a, ordering="amd"):
    """Sparse Cholesky factorization of a symmetric positive definite matrix.

    Parameters
    ----------
    a : sparse or dense (n, n) array
        Full symmetric matrix (both triangles stored).
    ordering : {"amd", "natural"}
        Fill-reducing approximate minimum degree, or the identity.

    Raises
    ------
    AsymmetricInput, NotPositiveDefinite
    """
    a = canonical(a)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"square matrix required, got {a.shape}")
    _check_symmetric(a)
    if ordering == "amd":
        perm = amd_order(a)
    elif ordering == "natural":
        perm = np.arange(n, dtype=np.int64)
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    ap = a[perm][:, perm] if ordering != "natural" else a
    upper = canonical(sp.triu(ap, format="csc"))
    up = upper.indptr.astype(np.int64)
    ui = upper.indices.astype(np.int64)
    ux = upper.data
    diag = ap.diagonal()
    tol = PIVOT_RTOL * (diag.max() if n else 0.0)
    parent = _etree(n, up, ui)
    lp = _column_pointers(n, up, ui, parent)
    li, lx, bad, pivot = _numeric(n, up, ui, ux, parent, lp, tol)
    if bad >= 0:
        raise NotPositiveDefinite(int(perm[bad]), float(pivot))
    L = sp.csc_matrix((lx, li, lp), shape=(n, n))
    return CholeskyFactor(perm=perm, L=L)


def solve(factor, b):
    """Solve ``A x = b`` by permute, forward, backward, unpermute."""
    b = np.asarray(b, dtype=np.float64)
    vector = b.ndim == 1
    if b.shape[0] != factor.n:
        raise ValueError(f"rhs has {b.shape[0]} rows, factor has {factor.n}")
    x = np.ascontiguousarray(b.reshape(factor.n, -1)[factor.perm])
    L = factor.L
    lp = L.indptr.astype(np.int64)
    li = L.indices.astype(np.int64)
    _forward(lp, li, L.data, x)
    _backward(lp, li, L.data, x)
    out = np.empty_like(x)
    out[factor.perm] = x
    return out[:, 0] if vector else out.reshape(b.shape)


def dense_cholesky_solve(a, b):
    """Dense reference solve (LAPACK Cholesky); the oracle path."""
    if sp.issparse(a):
        a = a.toarray()
    c = scipy.linalg.cho_factor(np.asarray(a, dtype=float), lower=True)
    return scipy.linalg.cho_solve(c, b)


def dump_coordinates(a, path):
    """Write ``a`` as 0-based ``row col value`` lines with 17 significant digits."""
    coo = sp.coo_matrix(a)
    order = np.lexsort((coo.row, coo.col))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {a.shape[0]} {a.shape[1]} {coo.nnz}\n")
        fh.write("row col value\n")
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}\n")


def load_coordinates(path):
    with open(path, encoding="utf-8") as fh:
        nrows, ncols, _ = (int(t) for t in fh.readline().lstrip("# ").split())
        fh.readline()
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csc_matrix((nrows, ncols))
    return canonical(
        sp.coo_matrix(
            (data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
            shape=(nrows, ncols),
        )
    )
