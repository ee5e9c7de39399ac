"""Physical and integrator parameters of the three controlled PDEs."""

import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.grid import Grid1D, Grid2D

# Imaginary-axis stability limit of classical RK4 (and of the ETDRK4 nonlinear stages).
RK4_IMAGINARY_LIMIT = 2.0 * math.sqrt(2.0)

# Velocity scales assumed when checking the advective step limit at construction time.
KS_AMPLITUDE_BOUND = 4.0
VORTICITY_VELOCITY_BOUND = 10.0

BLOW_UP_THRESHOLD = 1e6


def default_ks_resolution(length: float) -> int:
    """Grid points for a KS domain: roughly 2.56 points per unit length, at least 64."""
    return max(64, 2 * math.ceil(1.28 * length))


class KsParams(BaseModel):
    """Kuramoto–Sivashinsky parameters; `dt` is the control interval."""

    model_config = ConfigDict(frozen=True)

    L: float = Field(default=22.0, gt=0)
    n_points: int = Field(default=64, ge=16)
    mu: float = Field(default=0.0, ge=0)
    dt: float = Field(default=0.05, gt=0)
    substeps: int = Field(default=2, ge=1)

    @property
    def inner_dt(self) -> float:
        return self.dt / self.substeps

    @property
    def grid(self) -> Grid1D:
        return Grid1D(length=self.L, n_points=self.n_points, periodic=True)

    @model_validator(mode="after")
    def _check_stability(self) -> "KsParams":
        if self.n_points % 2:
            raise ValueError("n_points must be even for the spectral discretization")
        k_max = math.pi * self.n_points / self.L
        limit = RK4_IMAGINARY_LIMIT / (KS_AMPLITUDE_BOUND * k_max)
        if self.inner_dt > limit:
            raise ValueError(
                f"inner step dt/substeps={self.inner_dt:.4g} exceeds the advective limit {limit:.4g}; "
                "increase substeps"
            )
        return self


class KellerSegelParams(BaseModel):
    """Keller–Segel chemotaxis parameters on [0, L] with homogeneous Neumann ends."""

    model_config = ConfigDict(frozen=True)

    L: float = Field(default=10.0, gt=0)
    n_points: int = Field(default=200, ge=16)
    D: float = Field(default=1.0, gt=0)
    chi: float = Field(default=5.6, ge=0)
    q: float = Field(default=1.0, gt=0)
    dt: float = Field(default=0.05, gt=0)
    substeps: int = Field(default=5, ge=1)

    @property
    def inner_dt(self) -> float:
        return self.dt / self.substeps

    @property
    def grid(self) -> Grid1D:
        return Grid1D(length=self.L, n_points=self.n_points, periodic=False)

    @model_validator(mode="after")
    def _check_stability(self) -> "KellerSegelParams":
        # Diffusion is implicit; the explicit logistic source and the y-z coupling bound the step.
        limit = 1.0 / (self.q + 1.0 + self.chi)
        if self.inner_dt > limit:
            raise ValueError(
                f"inner step dt/substeps={self.inner_dt:.4g} exceeds the explicit-source limit {limit:.4g}"
            )
        return self


class Vorticity2dParams(BaseModel):
    """2D vorticity transport on the doubly periodic box [0, 2*pi)^2."""

    model_config = ConfigDict(frozen=True)

    n_grid: int = Field(default=128, ge=32)
    Re: float = Field(default=500.0, gt=0)
    dt: float = Field(default=0.01, gt=0)
    substeps: int = Field(default=4, ge=1)
    peak_wavenumber: float = Field(default=4.0, gt=0)

    @property
    def inner_dt(self) -> float:
        return self.dt / self.substeps

    @property
    def grid(self) -> Grid2D:
        return Grid2D(n_points=self.n_grid)

    @model_validator(mode="after")
    def _check_resolution(self) -> "Vorticity2dParams":
        if self.n_grid & (self.n_grid - 1):
            raise ValueError(f"n_grid must be a power of two, got {self.n_grid}")
        k_max = self.n_grid / 3.0
        limit = RK4_IMAGINARY_LIMIT / (VORTICITY_VELOCITY_BOUND * k_max)
        if self.inner_dt > limit:
            raise ValueError(
                f"inner step dt/substeps={self.inner_dt:.4g} exceeds the advective limit {limit:.4g}"
            )
        return self
