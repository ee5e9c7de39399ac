"""
Convolution kernels psi and their sampled matrices.

For one spatial axis with M centers and n grid points a `KernelBank` holds
three sparse (M, n) matrices:

    raw         psi(x_j - c_i) as specified, used for windowed costs
    quadrature  reading_i = quadrature @ y  (normalized kernel times weights)
    basis       f = basis.T @ u             (normalized kernel samples)

2D kernels are separable products of two axis banks.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import sparse

from src.core.errors import KernelSupportError
from src.core.grid import FloatArray

KernelShape = Literal["gaussian", "indicator", "dirac", "asymmetric"]
Normalization = Literal["none", "unit_integral"]
BoundaryMode = Literal["periodic", "truncate"]

# Relative position tolerance for half-open indicator cells.
EDGE_TOLERANCE = 1e-9


class KernelSpec(BaseModel):
    """Kernel shape and normalization."""

    model_config = ConfigDict(frozen=True)

    shape: KernelShape = "gaussian"
    sigma: float = Field(default=0.8, gt=0)
    width: float = Field(default=1.0, gt=0)
    weights: tuple[float, ...] = ()
    normalization: Normalization = "none"
    # Gaussian cut-off radius in units of sigma.
    truncation: float = Field(default=7.0, gt=0)

    @model_validator(mode="after")
    def _check_table(self) -> "KernelSpec":
        if self.shape == "asymmetric":
            if not self.weights:
                raise ValueError("asymmetric kernels need a non-empty weight table")
            if not all(math.isfinite(w) for w in self.weights):
                raise ValueError("asymmetric kernel weights must be finite")
        return self

    @property
    def radius(self) -> float:
        """Half-extent of the support around the center."""
        if self.shape == "gaussian":
            return self.truncation * self.sigma
        if self.shape == "dirac":
            return 0.0
        return 0.5 * self.width


def kernel_profile(spec: KernelSpec, offsets: FloatArray) -> FloatArray:
    """psi evaluated at signed displacements x - c (not defined for Dirac kernels)."""
    if spec.shape == "gaussian":
        values = np.exp(-0.5 * (offsets / spec.sigma) ** 2)
        return np.where(np.abs(offsets) <= spec.radius, values, 0.0)

    half = 0.5 * spec.width
    tol = EDGE_TOLERANCE * spec.width
    inside = (offsets >= -half - tol) & (offsets < half - tol)
    if spec.shape == "indicator":
        return inside.astype(np.float64)
    if spec.shape == "asymmetric":
        table = np.asarray(spec.weights, dtype=np.float64)
        cell = spec.width / table.size
        index = np.clip(np.floor((offsets + half + tol) / cell).astype(int), 0, table.size - 1)
        return np.where(inside, table[index], 0.0)
    raise ValueError(f"kernel shape {spec.shape!r} has no pointwise profile")


@dataclass(frozen=True)
class KernelBank:
    raw: sparse.csr_matrix
    quadrature: sparse.csr_matrix
    basis: sparse.csr_matrix

    @property
    def count(self) -> int:
        return int(self.raw.shape[0])


def _displacements(coords: FloatArray, center: float, length: float, periodic: bool) -> FloatArray:
    offsets = coords - center
    if periodic:
        offsets = (offsets + 0.5 * length) % length - 0.5 * length
    return offsets


def _check_support(spec: KernelSpec, centers: tuple[float, ...], length: float, dx: float) -> None:
    tol = EDGE_TOLERANCE * max(spec.width, dx)
    for center in centers:
        if center - spec.radius < -tol or center + spec.radius > length + tol:
            raise KernelSupportError(
                f"kernel support [{center - spec.radius:.4g}, {center + spec.radius:.4g}] "
                f"leaves the domain [0, {length:.4g}]"
            )


@lru_cache(maxsize=64)
def build_kernel_bank(
    spec: KernelSpec,
    centers: tuple[float, ...],
    length: float,
    n_points: int,
    periodic: bool,
    boundary: BoundaryMode,
) -> KernelBank:
    """Samples the kernel at every center on a uniform axis with `n_points` nodes."""
    dx = length / n_points if periodic else length / (n_points - 1)
    coords = np.arange(n_points, dtype=np.float64) * dx
    weights = np.full(n_points, dx)
    if not periodic:
        weights[0] *= 0.5
        weights[-1] *= 0.5
    wrap = periodic and boundary == "periodic"
    if boundary == "truncate":
        _check_support(spec, centers, length, dx)

    m = len(centers)
    if spec.shape == "dirac":
        nodes = np.rint(np.asarray(centers) / dx).astype(int)
        nodes = nodes % n_points if periodic else np.clip(nodes, 0, n_points - 1)
        rows = np.arange(m)
        onehot = sparse.csr_matrix((np.ones(m), (rows, nodes)), shape=(m, n_points))
        basis = sparse.csr_matrix((1.0 / weights[nodes], (rows, nodes)), shape=(m, n_points))
        return KernelBank(raw=onehot, quadrature=onehot.copy(), basis=basis)

    raw = np.zeros((m, n_points))
    for i, center in enumerate(centers):
        raw[i] = kernel_profile(spec, _displacements(coords, center, length, wrap))
        if not periodic and spec.shape != "gaussian" and center + 0.5 * spec.width >= length - EDGE_TOLERANCE:
            # Closed right edge so the end node belongs to the last cell.
            inner_offset = length - center - 2.0 * EDGE_TOLERANCE * spec.width
            raw[i, -1] = kernel_profile(spec, np.array([inner_offset]))[0]

    shape = raw
    if spec.normalization == "unit_integral":
        mass = raw @ weights
        if np.any(mass <= 0.0):
            raise KernelSupportError("kernel has no mass on the grid; refine the grid or widen the kernel")
        shape = raw / mass[:, None]
    return KernelBank(
        raw=sparse.csr_matrix(raw),
        quadrature=sparse.csr_matrix(shape * weights[None, :]),
        basis=sparse.csr_matrix(shape),
    )


def equidistant_centers(length: float, count: int) -> tuple[float, ...]:
    """c_i = (i + 1/2) L / M."""
    spacing = length / count
    return tuple((i + 0.5) * spacing for i in range(count))
