"""
Multi-agent training loop.

Every control step the environment is sensed once per sensor, the acting
agents each pick one action from their local view, the actions become one
control field, and after the PDE step every acting agent contributes one
transition to the shared replay buffer. The single shared learner is then
updated once.
"""

import logging
import math
import time
from collections import deque
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField, model_validator

from src.core.episode import EpisodeLog, EpisodeMode, StepRecord
from src.core.errors import BlowUpError, GeometryMismatchError, ShapeMismatchError
from src.core.grid import Field, FloatArray
from src.core.params import KellerSegelParams, KsParams, Vorticity2dParams
from src.core.seeding import SeedStreams
from src.services.controllers import ConvolutionalController, GlobalController, IController, Observation
from src.services.ddpg import DdpgAgent, DdpgConfig, PolicyCheckpoint, PolicyGeometry
from src.services.environment import IPdeEnvironment, create_environment
from src.services.sensing import ActuatorArray, RewardSpec, SensorArray, actuate, compute_rewards, local_views
from src.services.sensing import sense, sense_control
from src.services.storage import RunStore

logger = logging.getLogger(__name__)

BLOW_UP_REWARD = -1e3


class TrainingSpec(BaseModel):
    """Episode structure, evaluation cadence and budget."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    episodes: int = PydanticField(default=200, ge=0)
    episode_steps: int = PydanticField(default=400, ge=1)
    warmup: Optional[float] = PydanticField(default=None, ge=0)
    delays: int = PydanticField(default=0, ge=0)
    delay_interval: float = PydanticField(default=1.0, gt=0)
    eval_every: int = PydanticField(default=25, ge=1)
    eval_episodes: int = PydanticField(default=3, ge=1)
    checkpoint_every: int = PydanticField(default=0, ge=0)
    seed: int = PydanticField(default=0, ge=0)
    max_wall_seconds: Optional[float] = PydanticField(default=None, gt=0)
    snapshot_times: tuple[float, ...] = ()


class TrainConfig(BaseModel):
    """Everything one training or evaluation run needs."""

    model_config = ConfigDict(frozen=True)

    env: Union[KsParams, KellerSegelParams, Vorticity2dParams]
    sensors: SensorArray
    actuators: ActuatorArray
    reward: RewardSpec = RewardSpec()
    agent: DdpgConfig = DdpgConfig()
    training: TrainingSpec = TrainingSpec()

    @model_validator(mode="after")
    def _check_consistency(self) -> "TrainConfig":
        grid = self.env.grid
        if abs(self.sensors.length - grid.length) > 1e-9 * grid.length:
            raise ValueError(f"sensor domain length {self.sensors.length} != PDE domain {grid.length}")
        if self.sensors.ndim != grid.ndim:
            raise ValueError(f"{self.sensors.ndim}D sensors on a {grid.ndim}D grid")
        if self.actuators.count > self.sensors.count:
            raise ValueError(f"P={self.actuators.count} exceeds M={self.sensors.count}")
        if self.actuators.u_max != self.agent.u_max:
            raise ValueError(f"actuator bound {self.actuators.u_max} != agent bound {self.agent.u_max}")
        if grid.periodic != (self.sensors.boundary == "periodic"):
            raise ValueError(f"boundary mode {self.sensors.boundary!r} does not match the grid")
        n_components = create_environment(self.env).n_components
        if any(c >= n_components for c in self.reward.tracked_components):
            raise ValueError(f"tracked components {self.reward.tracked_components} exceed {n_components}")
        return self

    def environment(self) -> IPdeEnvironment:
        return create_environment(self.env)

    @property
    def delay_steps(self) -> int:
        if self.training.delays == 0:
            return 0
        return max(1, round(self.training.delay_interval / self.env.dt))

    @property
    def state_dim(self) -> int:
        n_components = self.environment().n_components
        return self.sensors.neighborhood * n_components * (1 + self.training.delays)

    @property
    def warmup_time(self) -> float:
        if self.training.warmup is not None:
            return self.training.warmup
        return self.environment().default_warmup

    def geometry(self) -> PolicyGeometry:
        return PolicyGeometry(
            neighborhood=self.sensors.neighborhood,
            n_components=self.environment().n_components,
            delays=self.training.delays,
            delay_steps=self.delay_steps,
            spacing=self.sensors.spacing,
            kernel=self.sensors.kernel,
            ndim=self.sensors.ndim,
        )


@dataclass(frozen=True)
class EvalSummary:
    mean_return: float
    final_mse: float
    logs: list[EpisodeLog]


@dataclass
class TrainResult:
    agent: DdpgAgent
    episodes_run: int
    best_return: float = -math.inf
    best_checkpoint: Optional[PolicyCheckpoint] = None
    evaluations: list[tuple[int, EvalSummary]] = field(default_factory=list)


def _check_dimensions(config: TrainConfig, controller: IController) -> None:
    agent = controller.learner
    if agent is None:
        return
    if isinstance(controller, GlobalController):
        expected = (config.sensors.count * config.environment().n_components, config.actuators.count)
    else:
        expected = (config.state_dim, 1)
    if (agent.state_dim, agent.action_dim) != expected:
        raise ShapeMismatchError(
            f"agent I/O ({agent.state_dim}, {agent.action_dim}) does not match the geometry {expected}"
        )


class _Sensing:
    """Sensor readings with the delay history kept across steps."""

    def __init__(self, config: TrainConfig):
        self.sensors = config.sensors
        self.delays = config.training.delays
        self.delay_steps = config.delay_steps
        self.acting = config.actuators.acting_sensors()
        self.history: deque[FloatArray] = deque(maxlen=self.delays * self.delay_steps + 1)

    def record(self, state: Field) -> FloatArray:
        readings = sense(state, self.sensors)
        if self.delays:
            self.history.append(readings)
        return readings

    def observe(self, state: Field) -> Observation:
        readings = self.record(state)
        delayed = []
        for level in range(1, self.delays + 1):
            back = min(level * self.delay_steps, len(self.history) - 1)
            delayed.append(self.history[-1 - back])
        return Observation(readings, local_views(readings, self.sensors, delayed), self.acting)


def _record(log: EpisodeLog, record: StepRecord, on_step: Optional[Callable[[StepRecord], None]]) -> None:
    log.append(record)
    if on_step is not None:
        on_step(record)


def _take_snapshots(log: EpisodeLog, pending: list[float], t: float, dt: float, state: Field) -> None:
    while pending and t >= pending[0] - 0.5 * dt:
        log.snapshots[f"{pending.pop(0):g}"] = Field(state.values.copy(), state.grid)


def run_episode(
    config: TrainConfig,
    controller: IController,
    mode: EpisodeMode,
    rng: np.random.Generator,
    *,
    episode: int = 0,
    initial_state: Optional[Field] = None,
    on_step: Optional[Callable[[StepRecord], None]] = None,
) -> EpisodeLog:
    """
    Simulates one episode: uncontrolled warm-up, then `episode_steps` control steps.

    In train mode every step pushes the acting agents' transitions and runs
    one learner update. A blow-up ends the episode with a terminal
    transition rewarded BLOW_UP_REWARD.
    """
    learner = controller.learner
    if mode == "train" and learner is None:
        raise ValueError(f"the {controller.name} controller cannot be trained")
    _check_dimensions(config, controller)

    env = config.environment()
    grid = env.grid
    dt = env.dt
    state = env.initial_state(rng) if initial_state is None else initial_state
    sensing = _Sensing(config)
    zero_control = actuate(np.zeros(config.actuators.count), config.actuators, grid)
    warmup_steps = round(config.warmup_time / dt)
    pending = sorted(config.training.snapshot_times)
    log = EpisodeLog(episode=episode, mode=mode, activation_time=warmup_steps * dt)
    _take_snapshots(log, pending, 0.0, dt, state)

    for k in range(warmup_steps):
        if sensing.delays:
            sensing.record(state)
        state = env.step(state, zero_control)
        _take_snapshots(log, pending, (k + 1) * dt, dt, state)

    explore = mode == "train"
    observation = sensing.observe(state)
    for k in range(config.training.episode_steps):
        t = (warmup_steps + k + 1) * dt
        actions = controller.act(observation, explore, rng)
        control = actuate(actions, config.actuators, grid)
        action_rms = float(np.sqrt(np.mean(actions**2)))
        try:
            next_state = env.step(state, control)
        except BlowUpError as exc:
            error = exc.at_step(k, t)
            logger.warning("Episode %d terminated: %s", episode, error)
            log.blow_up_time = t
            if learner is not None and mode == "train":
                penalty = np.full(config.sensors.count, BLOW_UP_REWARD)
                learner.buffer.push(
                    controller.transitions(observation, actions, penalty, BLOW_UP_REWARD, observation, True)
                )
                learner.train_step(rng)
            terminal = StepRecord(episode, k, t, BLOW_UP_REWARD, BLOW_UP_REWARD, action_rms, math.inf)
            _record(log, terminal, on_step)
            break

        result = compute_rewards(next_state, actions, config.sensors, config.actuators, config.reward)
        next_observation = sensing.observe(next_state)
        if learner is not None and mode == "train":
            learner.buffer.push(
                controller.transitions(
                    observation, actions, result.local, result.global_reward, next_observation, False
                )
            )
            learner.train_step(rng)
        if logger.isEnabledFor(logging.DEBUG):
            control_rms = float(np.sqrt(np.mean(sense_control(control, config.sensors) ** 2)))
            logger.debug("Step %d: r=%.4g control rms %.4g", k, result.global_reward, control_rms)

        local_mean = float(np.mean(result.local[observation.acting]))
        record = StepRecord(episode, k, t, result.global_reward, local_mean, action_rms, result.mse_to_ref)
        _record(log, record, on_step)
        _take_snapshots(log, pending, t, dt, next_state)
        state, observation = next_state, next_observation
    return log


def evaluate(config: TrainConfig, controller: IController, episodes: Optional[int] = None) -> EvalSummary:
    """Noise-free episodes on a fixed set of evaluation initial conditions."""
    streams = SeedStreams(config.training.seed)
    count = config.training.eval_episodes if episodes is None else episodes
    logs = [
        run_episode(config, controller, "eval", streams.generator("evaluation", j), episode=j)
        for j in range(count)
    ]
    return EvalSummary(
        mean_return=float(np.mean([log.total_return() for log in logs])),
        final_mse=float(np.mean([log.final_mse() for log in logs])),
        logs=logs,
    )


def train_controller(
    config: TrainConfig,
    controller: Union[ConvolutionalController, GlobalController],
    store: Optional[RunStore] = None,
) -> TrainResult:
    """Runs training episodes, evaluating periodically and keeping the best policy."""
    spec = config.training
    agent = controller.agent
    streams = SeedStreams(spec.seed)
    result = TrainResult(agent=agent, episodes_run=0)
    started = time.monotonic()
    logger.info(
        "Training %s controller: %d episodes of %d steps, M=%d P=%d",
        controller.name,
        spec.episodes,
        spec.episode_steps,
        config.sensors.count,
        config.actuators.count,
    )

    with (store.curve_writer() if store is not None else nullcontext(None)) as on_step:
        for episode in range(spec.episodes):
            if spec.max_wall_seconds is not None and time.monotonic() - started > spec.max_wall_seconds:
                logger.info(
                    "Wall-clock budget of %gs reached after %d episodes", spec.max_wall_seconds, episode
                )
                break
            controller.noise_scale = agent.config.noise_scale(episode / max(spec.episodes - 1, 1))
            log = run_episode(
                config,
                controller,
                "train",
                streams.generator("episode", episode),
                episode=episode,
                on_step=on_step,
            )
            result.episodes_run = episode + 1
            if store is not None:
                store.save_snapshots(log, f"train{episode}")
            logger.info(
                "Episode %d: return %.4g, final mse %.4g, buffer %d, updates %d",
                episode,
                log.total_return(),
                log.final_mse(),
                len(agent.buffer),
                agent.updates,
            )

            if (episode + 1) % spec.eval_every == 0 or episode == spec.episodes - 1:
                _evaluate_and_keep_best(config, controller, episode, result, store)
            if spec.checkpoint_every and (episode + 1) % spec.checkpoint_every == 0 and store is not None:
                store.save_policy(f"policy_{episode + 1}", agent.checkpoint(config.geometry()))
    return result


def _evaluate_and_keep_best(
    config: TrainConfig,
    controller: Union[ConvolutionalController, GlobalController],
    episode: int,
    result: TrainResult,
    store: Optional[RunStore],
) -> None:
    summary = evaluate(config, controller)
    result.evaluations.append((episode, summary))
    logger.info(
        "Evaluation after episode %d: return %.4g, final mse %.4g",
        episode,
        summary.mean_return,
        summary.final_mse,
    )
    if store is not None:
        store.append_eval(episode, summary.mean_return, summary.final_mse)
    if summary.mean_return > result.best_return:
        result.best_return = summary.mean_return
        result.best_checkpoint = controller.agent.checkpoint(config.geometry())
        if store is not None:
            store.save_policy("best", result.best_checkpoint)


def train(config: TrainConfig, store: Optional[RunStore] = None) -> TrainResult:
    """Trains the shared convolutional agent from a fresh initialization."""
    agent = DdpgAgent(config.state_dim, 1, config.agent, SeedStreams(config.training.seed).generator("agent"))
    return train_controller(config, ConvolutionalController(agent), store)


def check_transfer(checkpoint: PolicyCheckpoint, config: TrainConfig) -> None:
    """Refuses a policy whose sensing geometry differs from the config's."""
    requested = config.geometry()
    reasons = checkpoint.geometry.mismatches(requested)
    if reasons:
        raise GeometryMismatchError(checkpoint.geometry.summary(), requested.summary(), reasons)


def transfer(checkpoint: PolicyCheckpoint, config: TrainConfig) -> EpisodeLog:
    """Evaluates a trained policy, unchanged, on a new domain with compatible local geometry."""
    check_transfer(checkpoint, config)
    agent = DdpgAgent.from_checkpoint(checkpoint)
    logger.info("Transferring policy to M=%d, P=%d", config.sensors.count, config.actuators.count)
    return run_episode(
        config,
        ConvolutionalController(agent),
        "eval",
        SeedStreams(config.training.seed).generator("evaluation", 0),
    )
