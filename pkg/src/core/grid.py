"""
Uniform grids and discretized fields.

A `Field` always stores its values as `(components, *grid.shape)` so that
1D and 2D states flow through the same sensing and reward code.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field as PydanticField

from src.core.errors import ShapeMismatchError

FloatArray = npt.NDArray[np.float64]


class Grid1D(BaseModel):
    """Uniform 1D grid on [0, length]; periodic or with Neumann end points."""

    model_config = ConfigDict(frozen=True)

    length: float = PydanticField(gt=0)
    n_points: int = PydanticField(ge=16)
    periodic: bool = True

    @property
    def ndim(self) -> int:
        return 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_points,)

    @property
    def dx(self) -> float:
        """Spacing: L/n on a periodic grid, L/(n-1) when both end points are nodes."""
        if self.periodic:
            return self.length / self.n_points
        return self.length / (self.n_points - 1)

    @property
    def measure(self) -> float:
        return self.length

    def coordinates(self) -> FloatArray:
        return np.arange(self.n_points, dtype=np.float64) * self.dx

    def weights(self) -> FloatArray:
        """Quadrature weights: rectangle rule (periodic) or trapezoidal rule (Neumann)."""
        w = np.full(self.n_points, self.dx)
        if not self.periodic:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w

    def integrate(self, values: FloatArray) -> float:
        return float(np.dot(self.weights(), values))

    def mean(self, values: FloatArray) -> float:
        """Spatial average <.> over the domain."""
        return self.integrate(values) / self.measure


class Grid2D(BaseModel):
    """Doubly periodic square grid on [0, length)^2."""

    model_config = ConfigDict(frozen=True)

    length: float = PydanticField(default=2.0 * math.pi, gt=0)
    n_points: int = PydanticField(ge=16)

    @property
    def ndim(self) -> int:
        return 2

    @property
    def periodic(self) -> bool:
        return True

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_points, self.n_points)

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def measure(self) -> float:
        return self.length**2

    def coordinates(self) -> FloatArray:
        """Coordinates along one axis (both axes are identical)."""
        return np.arange(self.n_points, dtype=np.float64) * self.dx

    def weights(self) -> FloatArray:
        return np.full(self.n_points, self.dx)

    def integrate(self, values: FloatArray) -> float:
        return float(values.sum() * self.dx * self.dx)

    def mean(self, values: FloatArray) -> float:
        return float(values.mean())


Grid = Union[Grid1D, Grid2D]


@dataclass(frozen=True)
class Field:
    """Discretized PDE state (or control field) with `n` components on a grid."""

    values: FloatArray
    grid: Grid

    def __post_init__(self) -> None:
        expected = self.grid.shape
        if self.values.ndim != len(expected) + 1 or self.values.shape[1:] != expected:
            raise ShapeMismatchError(
                f"field of shape {self.values.shape} does not match grid shape (n, {expected})"
            )

    @classmethod
    def zeros(cls, grid: Grid, n_components: int = 1) -> "Field":
        return cls(np.zeros((n_components, *grid.shape)), grid)

    @classmethod
    def from_array(cls, values: npt.ArrayLike, grid: Grid) -> "Field":
        """Wraps a single-component array (grid-shaped) or a stacked one."""
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape == grid.shape:
            arr = arr[np.newaxis]
        return cls(arr, grid)

    @property
    def n_components(self) -> int:
        return int(self.values.shape[0])

    def component(self, index: int) -> FloatArray:
        return self.values[index]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def shifted(self, cells: Union[int, tuple[int, int]]) -> "Field":
        """Cyclic shift by whole grid cells (periodic grids only)."""
        if not self.grid.periodic:
            raise ShapeMismatchError("cyclic shifts are only defined on periodic grids")
        if isinstance(cells, int):
            cells = (cells,) * self.grid.ndim
        axes = tuple(range(1, self.grid.ndim + 1))
        return Field(np.roll(self.values, cells, axis=axes), self.grid)

    def scaled(self, factor: float) -> "Field":
        return Field(self.values * factor, self.grid)

    def __add__(self, other: "Field") -> "Field":
        if other.grid != self.grid:
            raise ShapeMismatchError("cannot add fields on different grids")
        return Field(self.values + other.values, self.grid)


def ensure_same_grid(state: Field, control: Field) -> None:
    """Checks that a control field lives on the state's grid."""
    if state.grid != control.grid:
        raise ShapeMismatchError(f"control grid {control.grid} differs from state grid {state.grid}")
