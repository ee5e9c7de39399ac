"""
Convolutional sensing and actuation.

Sensor i reads y~_i = int psi(x - c_i) y(x) dx for every state component,
agent i sees the readings of its local index set I_i, and the actions of
the acting agents scale kernels into the control field
f(x, u) = sum_i u_i psi(x - c_i). 2D arrays are regular m x m lattices
with separable kernels; lattice index i = a * m + b (a along x, b along y).
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField, model_validator
from scipy import sparse

from src.core.errors import ShapeMismatchError
from src.core.grid import Field, FloatArray, Grid
from src.core.kernels import BoundaryMode, KernelBank, KernelSpec, build_kernel_bank, equidistant_centers

logger = logging.getLogger(__name__)

Objective = Literal["tracking", "dissipation"]


class SensorArray(BaseModel):
    """M sensor centers sharing one kernel, plus the local neighborhood size S."""

    model_config = ConfigDict(frozen=True)

    axis_centers: tuple[float, ...]
    length: float = PydanticField(gt=0)
    kernel: KernelSpec = KernelSpec()
    neighborhood: int = PydanticField(default=1, ge=1)
    boundary: BoundaryMode = "periodic"
    ndim: Literal[1, 2] = 1

    @model_validator(mode="after")
    def _check_geometry(self) -> "SensorArray":
        if not self.axis_centers:
            raise ValueError("a sensor array needs at least one center")
        if list(self.axis_centers) != sorted(self.axis_centers):
            raise ValueError("sensor centers must be sorted")
        side = self.side
        if side * side != self.neighborhood and self.ndim == 2:
            raise ValueError(f"2D neighborhood S={self.neighborhood} must be a square s x s")
        if side % 2 == 0:
            raise ValueError(f"neighborhood size S={self.neighborhood} must be odd")
        if side > self.axis_count:
            raise ValueError(f"neighborhood S={self.neighborhood} exceeds the number of sensors")
        return self

    @classmethod
    def equidistant(
        cls,
        length: float,
        count: int,
        kernel: KernelSpec,
        neighborhood: int = 1,
        boundary: BoundaryMode = "periodic",
        ndim: Literal[1, 2] = 1,
    ) -> "SensorArray":
        """Centers at (i + 1/2) L / m along every axis; `count` is the total M (m*m in 2D)."""
        axis_count = count if ndim == 1 else math.isqrt(count)
        if ndim == 2 and axis_count * axis_count != count:
            raise ValueError(f"2D sensor count M={count} must be a square m x m")
        return cls(
            axis_centers=equidistant_centers(length, axis_count),
            length=length,
            kernel=kernel,
            neighborhood=neighborhood,
            boundary=boundary,
            ndim=ndim,
        )

    @property
    def axis_count(self) -> int:
        return len(self.axis_centers)

    @property
    def count(self) -> int:
        """Total number of sensors M."""
        return self.axis_count**self.ndim

    @property
    def side(self) -> int:
        """Neighborhood extent along one axis."""
        return self.neighborhood if self.ndim == 1 else math.isqrt(self.neighborhood)

    @property
    def spacing(self) -> float:
        return self.length / self.axis_count

    def neighbor_indices(self) -> np.ndarray:
        """(M, S) sensor indices of every I_i; -1 marks a neighbor outside a truncated domain."""
        m = self.axis_count
        radius = (self.side - 1) // 2
        offsets = np.arange(-radius, radius + 1)
        axis = np.arange(m)[:, None] + offsets[None, :]
        if self.boundary == "periodic":
            axis = axis % m
        else:
            axis = np.where((axis >= 0) & (axis < m), axis, -1)
        if self.ndim == 1:
            return axis
        rows = axis[:, None, :, None]
        cols = axis[None, :, None, :]
        lattice = np.where((rows < 0) | (cols < 0), -1, rows * m + cols)
        return lattice.reshape(m * m, self.neighborhood)


class ActuatorArray(BaseModel):
    """P actuators at the centers of the acting sensors, with action bound u_max."""

    model_config = ConfigDict(frozen=True)

    axis_centers: tuple[float, ...]
    length: float = PydanticField(gt=0)
    kernel: KernelSpec = KernelSpec()
    u_max: float = PydanticField(default=1.0, gt=0)
    boundary: BoundaryMode = "periodic"
    ndim: Literal[1, 2] = 1
    offset: int = PydanticField(default=0, ge=0)

    @classmethod
    def aligned(
        cls, sensors: SensorArray, count: int, kernel: KernelSpec, u_max: float = 1.0
    ) -> "ActuatorArray":
        """Centers the P actuators on the middle P sensors (the acting agents)."""
        if count > sensors.count:
            raise ValueError(f"P={count} actuators exceed M={sensors.count} sensors")
        if sensors.ndim == 2 and count != sensors.count:
            raise ValueError("2D lattices need one actuator per sensor")
        offset = (sensors.count - count) // 2 if sensors.ndim == 1 else 0
        centers = sensors.axis_centers[offset : offset + count] if sensors.ndim == 1 else sensors.axis_centers
        return cls(
            axis_centers=centers,
            length=sensors.length,
            kernel=kernel,
            u_max=u_max,
            boundary=sensors.boundary,
            ndim=sensors.ndim,
            offset=offset,
        )

    @property
    def count(self) -> int:
        return len(self.axis_centers) ** self.ndim

    def acting_sensors(self) -> np.ndarray:
        """Sensor indices whose agents drive an actuator, in actuator order."""
        return np.arange(self.offset, self.offset + self.count)


class RewardSpec(BaseModel):
    """Stage-cost weights and target."""

    model_config = ConfigDict(frozen=True)

    alpha: float = PydanticField(default=0.01, ge=0)
    beta: float = PydanticField(default=0.0, ge=0)
    target: float = 0.0
    tracked_components: tuple[int, ...] = (0,)
    objective: Objective = "tracking"

    @model_validator(mode="after")
    def _check_weights(self) -> "RewardSpec":
        if not all(math.isfinite(v) for v in (self.alpha, self.beta, self.target)):
            raise ValueError("reward weights and target must be finite")
        if not self.tracked_components:
            raise ValueError("at least one tracked component is required")
        return self


@dataclass(frozen=True)
class RewardResult:
    local: FloatArray
    global_reward: float
    mse_to_ref: float
    windowed_costs: FloatArray


def _check_grid(length: float, ndim: int, grid: Grid) -> None:
    if abs(length - grid.length) > 1e-12 * grid.length or ndim != grid.ndim:
        raise ShapeMismatchError(f"array geometry (L={length}, {ndim}D) does not fit grid {grid}")


def _bank(array: SensorArray | ActuatorArray, grid: Grid) -> KernelBank:
    _check_grid(array.length, array.ndim, grid)
    return build_kernel_bank(
        array.kernel, array.axis_centers, grid.length, grid.n_points, grid.periodic, array.boundary
    )


def _separable(left: sparse.spmatrix, values: FloatArray, right: sparse.spmatrix) -> FloatArray:
    """A @ Y @ B.T for sparse A, B and dense Y."""
    partial = np.asarray(left @ values)
    return np.asarray(right @ partial.T).T


def sense(field: Field, array: SensorArray) -> FloatArray:
    """Observation matrix (M, n): row i holds the convolved components at sensor i."""
    bank = _bank(array, field.grid)
    if field.grid.ndim == 1:
        return np.asarray(bank.quadrature @ field.values.T)
    readings = [
        _separable(bank.quadrature, field.values[c], bank.quadrature).reshape(-1)
        for c in range(field.n_components)
    ]
    return np.stack(readings, axis=1)


def sense_control(control_field: Field, array: SensorArray) -> FloatArray:
    """Convolved control readings u~_i."""
    return sense(control_field, array)[:, 0]


def local_views(
    observations: FloatArray, array: SensorArray, delays: Sequence[FloatArray] = ()
) -> FloatArray:
    """
    Local state of every agent, shape (M, S * n * (1 + len(delays))).

    Ordering inside a view is [delay level][neighbor][component]; the current
    observation comes first, then the delayed copies in the given order.
    """
    if observations.shape[0] != array.count:
        raise ShapeMismatchError(f"expected {array.count} observation rows, got {observations.shape[0]}")
    indices = array.neighbor_indices()
    blocks = []
    for level in (observations, *delays):
        if level.shape != observations.shape:
            raise ShapeMismatchError(f"delayed observation of shape {level.shape} != {observations.shape}")
        padded = np.vstack([level, np.zeros((1, level.shape[1]))])
        blocks.append(padded[indices].reshape(array.count, -1))
    return np.concatenate(blocks, axis=1)


def clamp_actions(actions: FloatArray, u_max: float) -> FloatArray:
    """Clips to [-u_max, u_max], logging how many entries were out of bounds."""
    clipped = int(np.count_nonzero(np.abs(actions) > u_max))
    if clipped:
        logger.warning("Clamped %d of %d actions to |u| <= %g", clipped, actions.size, u_max)
    return np.clip(actions, -u_max, u_max)


def actuate(actions: FloatArray, array: ActuatorArray, grid: Grid) -> Field:
    """Control field f = sum_i u_i psi(x - c_i) sampled on the grid."""
    actions = np.asarray(actions, dtype=np.float64).reshape(-1)
    if actions.size != array.count:
        raise ShapeMismatchError(f"expected {array.count} actions, got {actions.size}")
    actions = clamp_actions(actions, array.u_max)
    basis = _bank(array, grid).basis
    if grid.ndim == 1:
        values = np.asarray(basis.T @ actions)
    else:
        m = len(array.axis_centers)
        values = _separable(basis.T, actions.reshape(m, m), basis.T)
    return Field(values[np.newaxis], grid)


def _windowed_means(bank: KernelBank, density: FloatArray, grid: Grid) -> FloatArray:
    """<psi_i^2 * density> for every kernel of the bank."""
    squared = bank.raw.multiply(bank.raw).tocsr()
    weights = grid.weights()
    if grid.ndim == 1:
        return np.asarray(squared @ (weights * density)) / grid.measure
    weighted = density * weights[:, None] * weights[None, :]
    return _separable(squared, weighted, squared).reshape(-1) / grid.measure


def partition_factor(array: SensorArray, grid: Grid) -> FloatArray:
    """sum_i psi_i(x)^2 on the grid; identically 1 for disjoint unit indicators tiling the domain."""
    bank = _bank(array, grid)
    column_sums = np.asarray(bank.raw.multiply(bank.raw).sum(axis=0)).reshape(-1)
    if grid.ndim == 1:
        return column_sums
    return np.outer(column_sums, column_sums)


def _spectral_derivatives(values: FloatArray, length: float) -> tuple[FloatArray, FloatArray]:
    n = values.size
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    v_hat = np.fft.rfft(values)
    first = 1j * k * v_hat
    first[-1] = 0.0
    return np.fft.irfft(first, n=n), np.fft.irfft(-(k**2) * v_hat, n=n)


def _cost_density(field: Field, control: FloatArray, spec: RewardSpec) -> tuple[FloatArray, FloatArray]:
    """Pointwise state cost and its tracking part."""
    tracked = field.values[list(spec.tracked_components)]
    deviation = np.sum((tracked - spec.target) ** 2, axis=0)
    if spec.objective == "tracking":
        return deviation, deviation
    if field.grid.ndim != 1 or not field.grid.periodic:
        raise ShapeMismatchError("the dissipation objective is defined for periodic 1D fields only")
    y = field.values[0]
    y_x, y_xx = _spectral_derivatives(y, field.grid.length)
    return y_xx**2 + y_x**2 + y * control, deviation


def compute_rewards(
    field: Field, actions: FloatArray, sensors: SensorArray, actuators: ActuatorArray, spec: RewardSpec
) -> RewardResult:
    """
    Local rewards r_i = -sum_{j in I_i} l^_j - beta * l and the global reward r = -l.

    l^_j is the stage cost windowed by psi_j^2. For the tracking objective
    l = <(y - y_ref)^2> + alpha * sum_i u_i^2 <phi_i^2>; the dissipation
    objective l = <y_xx^2> + <y_x^2> + <y f> carries no separate action penalty.
    """
    grid = field.grid
    actions = np.clip(np.asarray(actions, dtype=np.float64).reshape(-1), -actuators.u_max, actuators.u_max)
    control = actuate(actions, actuators, grid).values[0]
    state_density, deviation = _cost_density(field, control, spec)

    alpha = spec.alpha if spec.objective == "tracking" else 0.0
    windowed = _windowed_means(_bank(sensors, grid), state_density + alpha * control**2, grid)

    basis = _bank(actuators, grid).basis
    axis_integrals = np.asarray(basis.multiply(basis).tocsr() @ grid.weights()).reshape(-1)
    if grid.ndim == 2:
        axis_integrals = np.outer(axis_integrals, axis_integrals).reshape(-1)
    mean_sq = axis_integrals / grid.measure
    stage_cost = grid.mean(state_density) + alpha * float(np.sum(actions**2 * mean_sq))

    indices = sensors.neighbor_indices()
    padded = np.append(windowed, 0.0)
    local = -padded[indices].sum(axis=1) - spec.beta * stage_cost
    return RewardResult(
        local=local,
        global_reward=-stage_cost,
        mse_to_ref=grid.mean(deviation),
        windowed_costs=windowed,
    )
