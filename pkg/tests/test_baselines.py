"""Unit tests for opposition control and the global agent."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.services import baselines
from src.services.baselines import (
    GLOBAL_BUDGET_FACTOR,
    GLOBAL_HIDDEN,
    OppositionParams,
    opposition_act,
    sweep_opposition_gain,
    train_global,
)
from src.services.checks import small_ks_config
from src.services.storage import RunStore
from src.services.trainer import TrainResult


def test_zero_observation_gives_zero_action():
    """At the target there is nothing to oppose."""
    actions = opposition_act(np.zeros((8, 1)), OppositionParams(gain=3.0))
    assert np.array_equal(actions, np.zeros(8))


def test_zero_gain_gives_zero_action():
    """Gain zero switches the controller off."""
    readings = np.random.default_rng(0).standard_normal((6, 2))
    assert np.array_equal(opposition_act(readings, OppositionParams(gain=0.0)), np.zeros(6))


def test_opposition_tracks_component_and_clamps():
    """u = -gain (y~ - target) on the chosen component, clamped to u_max."""
    readings = np.array([[0.0, 1.5], [0.0, 0.5], [0.0, 4.0]])
    params = OppositionParams(gain=2.0, component=1, target=1.0, u_max=1.5)

    assert np.allclose(opposition_act(readings, params), [-1.0, 1.0, -1.5])


def test_negative_gain_is_rejected():
    """Opposition means pushing against the deviation."""
    with pytest.raises(ValidationError):
        OppositionParams(gain=-1.0)


def test_gain_sweep_writes_baseline_table(tmp_path):
    """One row per gain under a `# baseline=opposition` line; gain zero never actuates."""
    config = small_ks_config(steps=4)
    store = RunStore(tmp_path)

    results = sweep_opposition_gain(config, gains=(0.0, 0.5), horizon=0.1, store=store)

    lines = (tmp_path / "baseline.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# baseline=opposition"
    assert lines[1] == "gain,mean_return,final_mse,horizon_mse"
    assert len(lines) == 4
    assert [r.gain for r in results] == [0.0, 0.5]
    assert all(np.isfinite(r.mean_return) for r in results)


def test_global_agent_sees_everything_and_pushes_one_transition_per_step(tmp_path):
    """Input M * n, output P, one buffer entry per control step."""
    config = small_ks_config(seed=2, episodes=1, steps=5)
    store = RunStore(tmp_path)

    result = train_global(config, store)

    agent = result.agent
    assert (agent.state_dim, agent.action_dim) == (8, 8)
    assert agent.config.actor_hidden == GLOBAL_HIDDEN
    assert len(agent.buffer) == 5
    assert (tmp_path / "baseline.csv").read_text(encoding="utf-8").startswith("# baseline=global")


def test_global_agent_gets_a_larger_wall_budget(monkeypatch):
    """A configured wall-clock budget is scaled for the global agent."""
    seen = {}

    def fake_train(config, controller, store=None):
        seen["budget"] = config.training.max_wall_seconds
        return TrainResult(agent=controller.agent, episodes_run=0)

    monkeypatch.setattr(baselines, "train_controller", fake_train)
    config = small_ks_config()
    spec = config.training.model_copy(update={"max_wall_seconds": 3.0})

    train_global(config.model_copy(update={"training": spec}))

    assert seen["budget"] == pytest.approx(3.0 * GLOBAL_BUDGET_FACTOR)
