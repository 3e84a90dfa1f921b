"""Process-convolution approximation with Matérn kernels on a lattice.

A Matérn field with parameters ``(nu, kappa, phi)`` in ``R^d`` is the
convolution of white noise with a Matérn-shaped kernel of shape
``nu/2 - d/4``, the same ``kappa``, and ``phi_k^2 = phi``.  The discrete
version places kernels at lattice nodes ``u_j`` with independent weights
whose variance is the lattice cell area.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .matern import MaternParams, as_points, matern_cov, pairwise_distances

__all__ = [
    "KernelSingular",
    "ConvolutionSpec",
    "kernel_params",
    "make_convolution",
    "regular_lattice",
    "convolution_basis",
    "convolution_cov",
]


class KernelSingular(ValueError):
    pass


@dataclass(frozen=True)
class ConvolutionSpec:
    target: MaternParams
    kernel: MaternParams
    nodes: np.ndarray
    weight_variance: float

    @property
    def n(self):
        return self.nodes.shape[0]


def kernel_params(target):
    nu_k = target.nu / 2 - target.d / 4
    if nu_k <= 0:
        raise KernelSingular(
            f"kernel shape nu/2 - d/4 = {nu_k:g} <= 0: the convolution kernel is singular"
        )
    return MaternParams(nu=nu_k, kappa=target.kappa, phi=sqrt(target.phi), d=target.d)


def regular_lattice(lower, upper, nodes_per_axis):
    """Cell-centred lattice; returns ``(nodes, cell_area)``."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    counts = np.broadcast_to(np.asarray(nodes_per_axis), lower.shape)
    step = (upper - lower) / counts
    axes = [lo + (np.arange(c) + 0.5) * s for lo, c, s in zip(lower, counts, step)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in grids]), float(np.prod(step))


def make_convolution(target, lattice):
    """``lattice`` is ``(nodes, cell_area)`` as returned by :func:`regular_lattice`."""
    nodes, area = lattice
    return ConvolutionSpec(
        target=target,
        kernel=kernel_params(target),
        nodes=as_points(nodes),
        weight_variance=float(area),
    )


def convolution_basis(spec, locations):
    """Dense ``B[i, j] = k(|s_i - u_j|)``."""
    return matern_cov(spec.kernel, pairwise_distances(locations, spec.nodes))


def convolution_cov(spec, locs_a, locs_b=None):
    Ba = convolution_basis(spec, locs_a)
    Bb = Ba if locs_b is None else convolution_basis(spec, locs_b)
    return spec.weight_variance * (Ba @ Bb.T)
