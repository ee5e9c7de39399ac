"""Unit tests for the run directory store."""

# Disabling pylint warning as it is a false positive due to pytest fixtures.
# pylint: disable=redefined-outer-name
import json

import numpy as np
import pytest

from src.core.episode import EpisodeLog, StepRecord
from src.core.grid import Field, Grid1D, Grid2D
from src.core.kernels import KernelSpec
from src.services.ddpg import DdpgAgent, DdpgConfig, PolicyGeometry, load_checkpoint
from src.services.storage import RunStore, read_snapshot, write_snapshot


@pytest.fixture
def store(tmp_path):
    """
    A store rooted in a temporary directory.
    tmp_path is a built-in pytest fixture that provides a temporary directory
    """
    return RunStore(tmp_path / "run")


def test_manifest_is_deterministic(store):
    """Writing the same manifest twice gives identical bytes with sorted keys."""
    config = {"training": {"seed": 7, "episodes": 2}, "env": {"kind": "ks", "L": 22.0}}

    first = store.write_manifest("train", 7, config).read_bytes()
    second = store.write_manifest("train", 7, config).read_bytes()

    assert first == second
    manifest = store.read_manifest()
    assert manifest["command"] == "train"
    assert manifest["seed"] == 7
    assert manifest["config"] == config
    assert {"numpy", "scipy", "pydantic"} <= set(manifest["versions"])
    assert list(json.loads(first)) == sorted(json.loads(first))


def test_curve_rows_are_flushed_as_written(store):
    """Each row is on disk before the writer closes."""
    with store.curve_writer() as write:
        write(StepRecord(0, 0, 0.05, -1.0, -0.5, 0.1, 0.2))
        lines = store.curve_path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        write(StepRecord(0, 1, 0.1, -0.5, -0.25, 0.1, 0.1))

    lines = store.curve_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "episode,step,t,r_global,r_local_mean,action_rms,mse_to_ref"
    assert lines[2] == "0,1,0.1,-0.5,-0.25,0.1,0.1"


def test_eval_header_is_written_once(store):
    """Appending evaluations keeps a single header."""
    store.append_eval(0, -3.5, 0.25)
    store.append_eval(1, -2.0, 0.125)

    lines = store.eval_path.read_text(encoding="utf-8").splitlines()
    assert lines == ["episode,mean_return,final_mse", "0,-3.5,0.25", "1,-2.0,0.125"]


def test_policy_round_trip(store):
    """A saved policy loads back into an identical actor."""
    agent = DdpgAgent(3, 1, DdpgConfig(actor_hidden=(4,), critic_hidden=(5,)), np.random.default_rng(0))
    geometry = PolicyGeometry(neighborhood=3, n_components=1, spacing=2.75, kernel=KernelSpec())

    path = store.save_policy("best", agent.checkpoint(geometry))
    restored = DdpgAgent.from_checkpoint(load_checkpoint(path))

    states = np.random.default_rng(1).standard_normal((10, 3))
    assert np.array_equal(restored.act(states), agent.act(states))


def test_snapshots_round_trip(tmp_path):
    """Snapshots keep row-major values behind a metadata header."""
    grid = Grid2D(n_points=32)
    values = np.random.default_rng(2).standard_normal((1, 32, 32))

    path = write_snapshot(tmp_path / "w.txt", Field(values, grid))

    assert path.read_text(encoding="utf-8").startswith("# ndim=2")
    assert np.array_equal(read_snapshot(path), values.reshape(32, 32))


def test_episode_snapshots_are_labelled_by_time(store):
    """One file per recorded time; no snapshots, no files."""
    grid = Grid1D(length=22.0, n_points=64)
    log = EpisodeLog(episode=0, mode="eval", activation_time=0.0)
    assert not store.save_snapshots(log, "eval0")

    log.snapshots["100"] = Field.zeros(grid)
    paths = store.save_snapshots(log, "eval0")

    assert [p.name for p in paths] == ["eval0_t100.txt"]


def test_baseline_table_starts_with_note(store):
    """The baseline type precedes the header."""
    path = store.write_table("baseline.csv", ("gain", "mean_return"), [(0.5, -1.25)], "baseline=opposition")

    assert path.read_text(encoding="utf-8").splitlines() == [
        "# baseline=opposition",
        "gain,mean_return",
        "0.5,-1.25",
    ]


def test_reset_clears_earlier_outputs(store):
    """Appended files from a previous run in the same directory are removed."""
    store.append_eval(0, -1.0, 1.0)
    with store.curve_writer() as write:
        write(StepRecord(0, 0, 0.05, -1.0, -1.0, 0.0, 1.0))

    store.reset()

    assert not store.eval_path.exists()
    assert not store.curve_path.exists()
