"""Weight precision matrices for the SPDE basis approximation.

For integer ``alpha = nu + d/2``::

    Q_1 = K / phi^2
    Q_2 = K C^-1 K / phi^2
    Q_a = K C^-1 Q_(a-2) C^-1 K,     a >= 3

with ``K = kappa^2 C + G``.  ``C^-1`` is replaced by the inverse of the
lumped (row-sum) mass matrix to keep ``Q`` sparse, by the identity for the
orthonormal DB3 basis, or by the true dense inverse (reference only).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .basis import BasisSystem, evaluate_basis
from .matern import MaternParams
from .sparse import canonical, cholesky

__all__ = [
    "AlphaNotInteger",
    "AlphaOutOfRange",
    "PrecisionModel",
    "build_K",
    "build_Q",
    "implied_covariance",
    "C_INV_MODES",
    "MAX_ALPHA",
]

C_INV_MODES = ("lumped", "identity", "exact")
MAX_ALPHA = 5


class AlphaNotInteger(ValueError):
    pass


class AlphaOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class PrecisionModel:
    basis: BasisSystem
    params: MaternParams
    alpha: int
    Q: object  # sparse CSC, or dense ndarray in "exact" mode
    c_inv_mode: str

    @property
    def is_sparse(self):
        return sp.issparse(self.Q)

    def factor(self):
        if self.is_sparse:
            return cholesky(self.Q)
        return scipy.linalg.cho_factor(self.Q, lower=True)

    def solve(self, b, factor=None):
        f = self.factor() if factor is None else factor
        if self.is_sparse:
            return f.solve(b)
        return scipy.linalg.cho_solve(f, b)


def build_K(basis, kappa):
    return canonical(kappa**2 * basis.C + basis.G)


def integer_alpha(params):
    alpha = params.alpha
    k = int(round(alpha))
    if abs(alpha - k) > 1e-12:
        raise AlphaNotInteger(f"nu + d/2 = {alpha} is not an integer")
    if not 1 <= k <= MAX_ALPHA:
        raise AlphaOutOfRange(f"alpha = {k} outside 1..{MAX_ALPHA}")
    return k


def default_c_inv_mode(basis):
    return "identity" if basis.spec.family == "db3" else "lumped"


def build_Q(basis, params, c_inv_mode=None):
    """Precision of the basis weights for the Matérn model ``params``."""
    alpha = integer_alpha(params)
    mode = default_c_inv_mode(basis) if c_inv_mode is None else c_inv_mode
    if mode not in C_INV_MODES:
        raise ValueError(f"unknown c_inv_mode {mode!r}")
    K = build_K(basis, params.kappa)
    scale = params.phi**-2

    if mode == "exact":
        Kd = K.toarray()
        N = scipy.linalg.solve(basis.C.toarray(), Kd, assume_a="pos")  # C^-1 K
        Q = scale * (Kd if alpha % 2 else Kd @ N)
        for _ in range((alpha - 1) // 2):
            Q = N.T @ Q @ N
        Q = 0.5 * (Q + Q.T)
        return PrecisionModel(basis, params, alpha, Q, mode)

    if mode == "identity":
        cdiag = basis.C.diagonal()
        off = basis.C - sp.diags(cdiag)
        if off.count_nonzero():
            raise ValueError("identity mode requires a diagonal mass matrix")
    else:
        cdiag = basis.C_lumped.diagonal()
    if np.any(cdiag <= 0):
        raise ValueError("mass-matrix diagonal must be strictly positive")
    inv = sp.diags(1.0 / cdiag, format="csc")
    N = canonical(inv @ K)  # C^-1 K
    if alpha % 2:
        Q = scale * K
    else:
        M = canonical(sp.diags(1.0 / np.sqrt(cdiag)) @ K)
        Q = scale * (M.T @ M)
    for _ in range((alpha - 1) // 2):
        Q = N.T @ Q @ N
    Q = canonical(Q)
    Q = canonical(0.5 * (Q + Q.T))
    return PrecisionModel(basis, params, alpha, Q, mode)


def implied_covariance(model, locs_a, locs_b=None, factor=None):
    """``B_a Q^-1 B_b^T``, solving against whichever side has fewer locations."""
    Ba = evaluate_basis(model.basis.spec, locs_a)
    Bb = Ba if locs_b is None else evaluate_basis(model.basis.spec, locs_b)
    f = model.factor() if factor is None else factor
    if Bb.shape[0] <= Ba.shape[0]:
        X = model.solve(Bb.T.toarray(), f)
        return np.asarray(Ba @ X)
    X = model.solve(Ba.T.toarray(), f)
    return np.asarray(Bb @ X).T
