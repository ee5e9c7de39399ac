"""
Deterministic property suite run by the `check` subcommand.

Every check returns a measured error and the tolerance it must stay
within; exact checks use a tolerance of zero.
"""

import logging
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from src.config.settings import settings
from src.core.grid import Field, Grid1D
from src.core.kernels import KernelSpec
from src.core.mlp import Mlp, grad_check
from src.core.params import KellerSegelParams, KsParams, Vorticity2dParams
from src.core.replay import TransitionBatch
from src.services.controllers import ActionRecorder, ConvolutionalController
from src.services.ddpg import DdpgAgent, DdpgConfig, load_checkpoint
from src.services.keller_segel import keller_segel_step
from src.services.kuramoto_sivashinsky import ks_initial_condition, ks_step
from src.services.sensing import ActuatorArray, RewardSpec, SensorArray, compute_rewards, partition_factor
from src.services.trainer import TrainConfig, TrainingSpec, run_episode, train
from src.services.vorticity2d import vorticity2d_step

logger = logging.getLogger(__name__)

# (input, hidden..., output) of every published actor/critic pair.
PUBLISHED_ARCHITECTURES = (
    ((1, 6, 1), "tanh"),
    ((2, 140, 1), "identity"),
    ((12, 20, 20, 1), "tanh"),
    ((13, 20, 20, 1), "identity"),
    ((9, 4, 1), "tanh"),
    ((10, 4, 1), "identity"),
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error)) and self.error <= self.tolerance


CheckFn = Callable[[], tuple[float, float]]
_CHECKS: list[tuple[str, CheckFn]] = []


def _check(name: str) -> Callable[[CheckFn], CheckFn]:
    def register(fn: CheckFn) -> CheckFn:
        _CHECKS.append((name, fn))
        return fn

    return register


def small_ks_config(seed: int = 0, episodes: int = 0, steps: int = 20) -> TrainConfig:
    """KS L=22 with eight Gaussian agents, no warm-up and a tiny replay warm fill."""
    params = KsParams()
    kernel = KernelSpec(sigma=0.8)
    sensors = SensorArray.equidistant(params.L, 8, kernel)
    return TrainConfig(
        env=params,
        sensors=sensors,
        actuators=ActuatorArray.aligned(sensors, 8, kernel),
        agent=DdpgConfig(warm_fill=8, batch_size=4),
        training=TrainingSpec(episodes=episodes, episode_steps=steps, warmup=0.0, seed=seed, eval_episodes=1),
    )


@_check("partition identity")
def _partition_identity() -> tuple[float, float]:
    grid = Grid1D(length=22.0, n_points=64)
    kernel = KernelSpec(shape="indicator", width=22.0 / 8)
    sensors = SensorArray.equidistant(22.0, 8, kernel)
    actuators = ActuatorArray.aligned(sensors, 8, kernel)
    rng = np.random.default_rng(0)
    field = Field.from_array(rng.standard_normal(64), grid)
    result = compute_rewards(field, rng.uniform(-1, 1, 8), sensors, actuators, RewardSpec(alpha=0.3))
    error = abs(result.windowed_costs.sum() + result.global_reward)
    error = max(error, float(np.max(np.abs(partition_factor(sensors, grid) - 1.0))))
    return error, 1e-10


@_check("equivariance chain")
def _equivariance_chain() -> tuple[float, float]:
    config = small_ks_config(steps=12)
    config = config.model_copy(
        update={"training": config.training.model_copy(update={"snapshot_times": (0.6,)})}
    )
    agent = DdpgAgent(config.state_dim, 1, config.agent, np.random.default_rng(1))
    initial = ks_initial_condition(config.env.grid, 2)
    spacing = config.env.n_points // config.sensors.count

    base = ActionRecorder(ConvolutionalController(agent))
    moved = ActionRecorder(ConvolutionalController(agent))
    base_log = run_episode(config, base, "eval", np.random.default_rng(0), initial_state=initial)
    moved_log = run_episode(
        config, moved, "eval", np.random.default_rng(0), initial_state=initial.shifted(spacing)
    )

    # One sensor spacing relabels agent i as agent i + 1.
    action_error = max(float(np.max(np.abs(np.roll(a, 1) - b))) for a, b in zip(base.actions, moved.actions))
    expected = base_log.snapshots["0.6"].shifted(spacing).values
    field_error = float(np.max(np.abs(moved_log.snapshots["0.6"].values - expected)))
    rewards = np.array([r.r_global for r in base_log.records])
    shifted_rewards = np.array([r.r_global for r in moved_log.records])
    reward_error = float(np.max(np.abs(rewards - shifted_rewards)))
    return max(action_error, field_error / float(np.max(np.abs(expected))), reward_error), 1e-8


@_check("gradient check")
def _gradient_check() -> tuple[float, float]:
    worst = 0.0
    for sizes, activation in PUBLISHED_ARCHITECTURES:
        rng = np.random.default_rng(sum(sizes))
        net = Mlp.initialize(sizes, rng, output_activation=activation)  # type: ignore[arg-type]
        inputs = rng.standard_normal((5, sizes[0]))
        target = rng.standard_normal((5, sizes[-1]))

        def loss(output: np.ndarray, target: np.ndarray = target) -> tuple[float, np.ndarray]:
            diff = output - target
            return 0.5 * float(np.sum(diff**2)) / len(diff), diff / len(diff)

        worst = max(worst, grad_check(net, loss, inputs))
    return worst, 1e-5


@_check("KS linear dispersion")
def _ks_dispersion() -> tuple[float, float]:
    params = KsParams()
    grid = params.grid
    k = 2.0 * np.pi / grid.length
    profile = np.sin(k * grid.coordinates())
    state = Field.from_array(1e-6 * profile, grid)
    zero = Field.zeros(grid)
    for _ in range(round(1.0 / params.dt)):
        state = ks_step(state, zero, params)
    expected = 1e-6 * np.exp(k**2 - k**4) * profile
    return float(np.max(np.abs(state.values[0] - expected)) / np.max(np.abs(expected))), 1e-3


@_check("Taylor-Green decay")
def _taylor_green() -> tuple[float, float]:
    params = Vorticity2dParams(n_grid=32, Re=10.0)
    grid = params.grid
    x = grid.coordinates()
    initial = np.cos(x)[:, None] * np.cos(x)[None, :]
    state = Field.from_array(initial, grid)
    zero = Field.zeros(grid)
    for _ in range(round(1.0 / params.dt)):
        state = vorticity2d_step(state, zero, params)
    expected = initial * np.exp(-2.0 / params.Re)
    return float(np.max(np.abs(state.values[0] - expected)) / np.max(np.abs(expected))), 1e-3


@_check("Keller-Segel steady state")
def _keller_segel_steady() -> tuple[float, float]:
    params = KellerSegelParams()
    state = Field(np.ones((2, params.n_points)), params.grid)
    zero = Field.zeros(params.grid)
    for _ in range(5):
        state = keller_segel_step(state, zero, params)
    return float(np.max(np.abs(state.values - 1.0))), 0.0


@_check("buffer growth per step")
def _buffer_growth() -> tuple[float, float]:
    config = small_ks_config(steps=1)
    agent = DdpgAgent(config.state_dim, 1, config.agent, np.random.default_rng(3))
    run_episode(config, ConvolutionalController(agent), "train", np.random.default_rng(4))
    return float(abs(len(agent.buffer) - config.sensors.count)), 0.0


@_check("target copy at tau = 1")
def _target_copy() -> tuple[float, float]:
    agent = DdpgAgent(3, 1, DdpgConfig(tau=1.0, warm_fill=0), np.random.default_rng(5))
    rng = np.random.default_rng(6)
    batch = TransitionBatch(
        states=rng.standard_normal((4, 3)),
        actions=rng.uniform(-1, 1, (4, 1)),
        rewards=rng.standard_normal(4),
        next_states=rng.standard_normal((4, 3)),
        terminals=np.zeros(4),
    )
    agent.update(batch)
    pairs = zip(
        agent.actor.parameters() + agent.critic.parameters(),
        agent.target_actor.parameters() + agent.target_critic.parameters(),
    )
    return max(float(np.max(np.abs(p - q))) for p, q in pairs), 0.0


@_check("checkpoint round trip")
def _checkpoint_round_trip() -> tuple[float, float]:
    config = small_ks_config()
    agent = DdpgAgent(config.state_dim, 1, config.agent, np.random.default_rng(7))
    with tempfile.TemporaryDirectory() as folder:
        path = Path(folder) / "check.policy"
        agent.save(path, config.geometry())
        restored = DdpgAgent.from_checkpoint(load_checkpoint(path))
    states = np.random.default_rng(8).standard_normal((50, config.state_dim))
    return float(np.max(np.abs(restored.act(states) - agent.act(states)))), 0.0


@_check("seed determinism")
def _seed_determinism() -> tuple[float, float]:
    config = small_ks_config(seed=11, episodes=2, steps=6)
    first = train(config).agent
    second = train(config).agent
    pairs = zip(first.actor.parameters(), second.actor.parameters())
    return max(float(np.max(np.abs(p - q))) for p, q in pairs), 0.0


def check_names() -> list[str]:
    return [name for name, _ in _CHECKS]


def run_checks(scale: float | None = None) -> list[CheckResult]:
    """Runs the whole suite; tolerances are multiplied by `scale`."""
    scale = settings.check_tolerance_scale if scale is None else scale
    results = []
    for name, fn in _CHECKS:
        error, tolerance = fn()
        result = CheckResult(name, error, tolerance * scale)
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, "Check %-28s error %.3e (tolerance %.1e)", name, error, result.tolerance)
        results.append(result)
    return results
