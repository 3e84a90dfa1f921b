"""Stationary Matérn covariance in the SPDE parametrisation.

    r(h) = 2^(1-nu) phi^2 / ((4 pi)^(d/2) Gamma(nu + d/2) kappa^(2 nu))
           * (kappa h)^nu K_nu(kappa h)

with spectral density ``phi^2 (2 pi)^-d (kappa^2 + |w|^2)^-(nu + d/2)``.
The field solves ``(kappa^2 - Laplacian)^(alpha/2) X = phi W`` with
``alpha = nu + d/2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gamma, lgamma, log, pi, sqrt

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import kv

__all__ = [
    "MaternParams",
    "bessel_k",
    "matern_cov",
    "matern_spectrum",
    "kappa_from_range",
    "phi_for_unit_variance",
    "dense_cov_matrix",
    "pairwise_distances",
    "as_points",
]


@dataclass(frozen=True)
class MaternParams:
    """Shape ``nu``, inverse range ``kappa``, noise amplitude ``phi``, dimension ``d``."""

    nu: float
    kappa: float
    phi: float = 1.0
    d: int = 2

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.phi > 0:
            raise ValueError(f"phi must be positive, got {self.phi}")
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")

    @classmethod
    def from_range(cls, nu, range_, d=2):
        """Unit-variance parameters with approximate range ``sqrt(8 nu)/kappa``."""
        kappa = kappa_from_range(nu, range_)
        return cls(nu=nu, kappa=kappa, phi=phi_for_unit_variance(nu, kappa, d), d=d)

    @property
    def alpha(self):
        return self.nu + self.d / 2

    @property
    def variance(self):
        return _variance(self.nu, self.kappa, self.phi, self.d)

    @property
    def range(self):
        return sqrt(8 * self.nu) / self.kappa


def _variance(nu, kappa, phi, d):
    # phi^2 Gamma(nu) (4 pi)^(-d/2) Gamma(nu + d/2)^-1 kappa^(-2 nu), in logs
    return float(
        np.exp(
            2 * log(phi)
            + lgamma(nu)
            - 0.5 * d * log(4 * pi)
            - lgamma(nu + 0.5 * d)
            - 2 * nu * log(kappa)
        )
    )


def bessel_k(nu, x):
    """Modified Bessel function of the second kind, real order ``nu``."""
    return kv(nu, x)


def matern_cov(p, h):
    """Matérn covariance at distance(s) ``h >= 0``; exact variance at ``h = 0``."""
    h = np.asarray(h, dtype=float)
    var = p.variance
    x = p.kappa * h
    out = np.full(x.shape, var)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        # var * 2^(1-nu)/Gamma(nu) * x^nu K_nu(x)
        with np.errstate(under="ignore", over="ignore", invalid="ignore"):
            val = var * (2.0 ** (1 - p.nu) / gamma(p.nu)) * xp**p.nu * kv(p.nu, xp)
        val[~np.isfinite(val)] = 0.0
        # x^nu K_nu(x) rounds above its limit for tiny x
        out[pos] = np.minimum(val, var)
    return out if out.ndim else float(out)


def matern_spectrum(p, omega):
    """Spectral density at frequency magnitude ``omega``."""
    omega = np.asarray(omega, dtype=float)
    return p.phi**2 * (2 * pi) ** (-p.d) * (p.kappa**2 + omega**2) ** (-p.alpha)


def kappa_from_range(nu, range_):
    if not range_ > 0:
        raise ValueError(f"range must be positive, got {range_}")
    return sqrt(8 * nu) / range_


def phi_for_unit_variance(nu, kappa, d=2):
    """``phi`` such that ``matern_cov(p, 0) == 1``."""
    log_phi2 = 0.5 * d * log(4 * pi) + lgamma(nu + 0.5 * d) + 2 * nu * log(kappa) - lgamma(nu)
    return float(np.exp(0.5 * log_phi2))


def as_points(locs):
    """``(n, d)`` float array; a 1-d array is read as ``n`` points on the line."""
    locs = np.asarray(locs, dtype=float)
    return locs.reshape(-1, 1) if locs.ndim == 1 else locs


def pairwise_distances(a, b):
    return cdist(as_points(a), as_points(b))


def dense_cov_matrix(p, locs_a, locs_b=None):
    """Dense matrix of ``matern_cov(p, |a_i - b_j|)``."""
    if locs_b is None:
        locs_b = locs_a
    return matern_cov(p, pairwise_distances(locs_a, locs_b))
