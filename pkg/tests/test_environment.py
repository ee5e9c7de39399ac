"""Unit tests for the environment factory and wrappers."""

import numpy as np
import pytest

from src.core.grid import Field
from src.core.params import KellerSegelParams, KsParams, Vorticity2dParams
from src.services.environment import (
    KellerSegelEnvironment,
    KsEnvironment,
    Vorticity2dEnvironment,
    create_environment,
)


@pytest.mark.parametrize(
    "params, expected_type, components, warmup",
    [
        (KsParams(), KsEnvironment, 1, 100.0),
        (KellerSegelParams(), KellerSegelEnvironment, 2, 21.0),
        (Vorticity2dParams(n_grid=32), Vorticity2dEnvironment, 1, 1.0),
    ],
)
def test_factory_builds_matching_environment(params, expected_type, components, warmup):
    """Each parameter model maps to its environment."""
    env = create_environment(params)

    assert isinstance(env, expected_type)
    assert env.n_components == components
    assert env.default_warmup == warmup
    assert env.dt == params.dt
    assert env.reference().n_components == components


def test_factory_rejects_unknown_parameters():
    """Anything but the three parameter models is refused."""
    with pytest.raises(TypeError):
        create_environment(object())  # type: ignore[arg-type]


def test_keller_segel_reference_is_homogeneous_state():
    """The target of the chemotaxis environment is y = z = 1."""
    env = create_environment(KellerSegelParams())
    assert np.array_equal(env.reference().values, np.ones((2, 200)))
    assert not env.periodic


def test_environment_step_matches_initial_state_grid():
    """Stepping a fresh initial condition keeps the grid."""
    env = create_environment(KsParams())
    state = env.initial_state(np.random.default_rng(0))
    result = env.step(state, Field.zeros(env.grid))
    assert result.grid == env.grid
    assert result.is_finite()
