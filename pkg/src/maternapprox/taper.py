"""Covariance tapering with Wendland functions."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import pi, sqrt

import numpy as np
import scipy.sparse as sp

from .matern import as_points, matern_cov
from .sparse import canonical

__all__ = [
    "NuNotTaperable",
    "TaperSpec",
    "wendland",
    "select_taper_kind",
    "theta_from_neighbors",
    "pairs_within",
    "tapered_cov_matrix",
]

# Largest nu for which each taper is valid when d <= 3.
_VALID_NU = {"wendland1": 1.5, "wendland2": 2.5}


class NuNotTaperable(ValueError):
    pass


@dataclass(frozen=True)
class TaperSpec:
    kind: str
    theta: float

    def __post_init__(self):
        if self.kind not in _VALID_NU:
            raise ValueError(f"unknown taper {self.kind!r}")
        if not self.theta > 0:
            raise ValueError("taper range must be positive")

    def check_valid(self, nu, d=2, override=False):
        if override:
            return
        if d > 3 or nu > _VALID_NU[self.kind]:
            raise NuNotTaperable(f"{self.kind} is not a valid taper for nu={nu}, d={d}")


def wendland(spec, tau):
    """Taper value at distance ``tau``; zero for ``tau >= theta``."""
    t = np.asarray(tau, dtype=float) / spec.theta
    one_minus = np.maximum(1.0 - t, 0.0)
    if spec.kind == "wendland1":
        return one_minus**4 * (1 + 4 * t)
    # 35/3 gives the C^4 Wendland function; 35/2 is not positive definite in 2-d
    return one_minus**6 * (1 + 6 * t + 35.0 / 3.0 * t * t)


def select_taper_kind(nu):
    if not nu > 0:
        raise ValueError("nu must be positive")
    if nu <= 1.5:
        return "wendland1"
    if nu <= 2.5:
        return "wendland2"
    raise NuNotTaperable(f"no Wendland taper is valid for nu={nu}; pass an explicit TaperSpec")


def theta_from_neighbors(m, area, k_target):
    """Taper range giving ``k_target`` expected neighbours among ``m`` uniform points (2-d)."""
    if m <= 0 or area <= 0 or k_target <= 0:
        raise ValueError("m, area and k_target must be positive")
    return sqrt(k_target * area / (pi * m))


def pairs_within(a, b, radius):
    """Index pairs ``(i, j)`` with ``|a_i - b_j| < radius`` and their distances.

    Points of ``b`` are bucketed on a uniform grid of cell size ``radius``;
    each point of ``a`` only visits the ``3^d`` neighbouring cells.
    """
    a = as_points(a)
    b = as_points(b)
    d = a.shape[1]
    if a.shape[0] == 0 or b.shape[0] == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    if not np.isfinite(radius):
        i, j = np.meshgrid(np.arange(a.shape[0]), np.arange(b.shape[0]), indexing="ij")
        i, j = i.ravel(), j.ravel()
        return i, j, np.linalg.norm(a[i] - b[j], axis=1)
    origin = np.minimum(a.min(axis=0), b.min(axis=0))
    cb = np.floor((b - origin) / radius).astype(np.int64)
    ca = np.floor((a - origin) / radius).astype(np.int64)
    dims = np.maximum(cb.max(axis=0), ca.max(axis=0)) + 3
    strides = np.cumprod(np.concatenate([[1], dims[::-1][:-1]]))[::-1]
    # shift by one so that neighbour offsets never go negative
    keys_b = (cb + 1) @ strides
    order = np.argsort(keys_b, kind="stable")
    sorted_keys = keys_b[order]
    base = (ca + 1) @ strides
    rows, cols = [], []
    for offset in product((-1, 0, 1), repeat=d):
        key = base + np.asarray(offset) @ strides
        start = np.searchsorted(sorted_keys, key, side="left")
        stop = np.searchsorted(sorted_keys, key, side="right")
        count = stop - start
        total = count.sum()
        if total == 0:
            continue
        i = np.repeat(np.arange(a.shape[0]), count)
        first = np.repeat(start - np.concatenate([[0], np.cumsum(count)[:-1]]), count)
        rows.append(i)
        cols.append(order[first + np.arange(total)])
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    i = np.concatenate(rows)
    j = np.concatenate(cols)
    dist = np.linalg.norm(a[i] - b[j], axis=1)
    keep = dist < radius
    return i[keep], j[keep], dist[keep]


def tapered_cov_matrix(p, spec, locs_a, locs_b=None, taper=True):
    """Sparse tapered Matérn covariance between two location sets.

    ``taper=False`` keeps the support cut-off at ``theta`` but uses a taper
    identically equal to one inside it (useful as a degenerate check).
    """
    a = as_points(locs_a)
    b = a if locs_b is None else as_points(locs_b)
    i, j, dist = pairs_within(a, b, spec.theta)
    vals = matern_cov(p, dist)
    if taper:
        vals = vals * wendland(spec, dist)
    m = sp.csc_matrix((vals, (i, j)), shape=(a.shape[0], b.shape[0]))
    m = canonical(m)
    if locs_b is None:
        m = canonical(0.5 * (m + m.T))
    return m
