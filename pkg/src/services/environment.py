"""
Controlled PDE environments behind one interface.

The orchestrator only sees `IPdeEnvironment`: a grid, a reference state, an
initial-condition generator and a zero-order-hold flow map.
"""

import logging
from abc import ABC, abstractmethod
from typing import Union

import numpy as np

from src.core.grid import Field, Grid
from src.core.params import KellerSegelParams, KsParams, Vorticity2dParams
from src.services.keller_segel import keller_segel_initial_condition, keller_segel_step
from src.services.kuramoto_sivashinsky import ks_initial_condition, ks_step
from src.services.vorticity2d import decaying_turbulence_ic, vorticity2d_step

logger = logging.getLogger(__name__)

EnvParams = Union[KsParams, KellerSegelParams, Vorticity2dParams]


class IPdeEnvironment(ABC):
    """
    Abstract interface of a controlled PDE.
    Implementations are stateless: the state is passed in and returned.
    """

    kind: str

    @property
    @abstractmethod
    def grid(self) -> Grid:
        """Simulation grid."""

    @property
    @abstractmethod
    def n_components(self) -> int:
        """Number of state components."""

    @property
    @abstractmethod
    def dt(self) -> float:
        """Control interval."""

    @property
    @abstractmethod
    def default_warmup(self) -> float:
        """Uncontrolled evolution time before the agents activate."""

    @abstractmethod
    def reference(self) -> Field:
        """Target state y_ref."""

    @abstractmethod
    def initial_state(self, rng: np.random.Generator) -> Field:
        """Random initial condition drawn from `rng`."""

    @abstractmethod
    def step(self, state: Field, control_field: Field) -> Field:
        """Advances `state` by one control interval."""

    @property
    def periodic(self) -> bool:
        return self.grid.periodic


class KsEnvironment(IPdeEnvironment):
    """Kuramoto–Sivashinsky, stabilized towards y = 0."""

    kind = "ks"

    def __init__(self, params: KsParams):
        self.params = params
        self._grid = params.grid

    @property
    def grid(self) -> Grid:
        return self._grid

    @property
    def n_components(self) -> int:
        return 1

    @property
    def dt(self) -> float:
        return self.params.dt

    @property
    def default_warmup(self) -> float:
        return 100.0

    def reference(self) -> Field:
        return Field.zeros(self._grid, 1)

    def initial_state(self, rng: np.random.Generator) -> Field:
        return ks_initial_condition(self._grid, rng)

    def step(self, state: Field, control_field: Field) -> Field:
        return ks_step(state, control_field, self.params)


class KellerSegelEnvironment(IPdeEnvironment):
    """Keller–Segel chemotaxis, stabilized towards the homogeneous state y = z = 1."""

    kind = "keller_segel"

    def __init__(self, params: KellerSegelParams):
        self.params = params
        self._grid = params.grid

    @property
    def grid(self) -> Grid:
        return self._grid

    @property
    def n_components(self) -> int:
        return 2

    @property
    def dt(self) -> float:
        return self.params.dt

    @property
    def default_warmup(self) -> float:
        return 21.0

    def reference(self) -> Field:
        return Field(np.ones((2, *self._grid.shape)), self._grid)

    def initial_state(self, rng: np.random.Generator) -> Field:
        return keller_segel_initial_condition(self.params, rng)

    def step(self, state: Field, control_field: Field) -> Field:
        return keller_segel_step(state, control_field, self.params)


class Vorticity2dEnvironment(IPdeEnvironment):
    """Decaying 2D turbulence, driven towards rest."""

    kind = "vorticity2d"

    def __init__(self, params: Vorticity2dParams):
        self.params = params
        self._grid = params.grid

    @property
    def grid(self) -> Grid:
        return self._grid

    @property
    def n_components(self) -> int:
        return 1

    @property
    def dt(self) -> float:
        return self.params.dt

    @property
    def default_warmup(self) -> float:
        return 1.0

    def reference(self) -> Field:
        return Field.zeros(self._grid, 1)

    def initial_state(self, rng: np.random.Generator) -> Field:
        return decaying_turbulence_ic(self.params, rng)

    def step(self, state: Field, control_field: Field) -> Field:
        return vorticity2d_step(state, control_field, self.params)


def create_environment(params: EnvParams) -> IPdeEnvironment:
    """Builds the environment matching the parameter model."""
    if isinstance(params, KsParams):
        env: IPdeEnvironment = KsEnvironment(params)
    elif isinstance(params, KellerSegelParams):
        env = KellerSegelEnvironment(params)
    elif isinstance(params, Vorticity2dParams):
        env = Vorticity2dEnvironment(params)
    else:
        raise TypeError(f"unsupported environment parameters: {type(params).__name__}")
    logger.debug("Created %s environment on %s", env.kind, env.grid)
    return env
