"""
Reference controllers: opposition control and one global DDPG agent.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.grid import FloatArray
from src.core.seeding import SeedStreams
from src.services.controllers import GlobalController, IController, Observation
from src.services.ddpg import DdpgAgent, DdpgConfig
from src.services.storage import BASELINE_NAME, RunStore
from src.services.trainer import EvalSummary, TrainConfig, TrainResult, evaluate, train_controller

logger = logging.getLogger(__name__)

DEFAULT_GAINS = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
GLOBAL_HIDDEN = (256, 256)
GLOBAL_BUDGET_FACTOR = 10.0
SWEEP_HORIZON = 20.0


class OppositionParams(BaseModel):
    """Gain of the opposition law u_i = -gain * (y~_i - target)."""

    model_config = ConfigDict(frozen=True)

    gain: float = Field(default=1.0, ge=0, allow_inf_nan=False)
    component: int = Field(default=0, ge=0)
    target: float = 0.0
    u_max: float = Field(default=1.0, gt=0)

    @classmethod
    def for_config(cls, config: TrainConfig, gain: float) -> "OppositionParams":
        return cls(
            gain=gain,
            component=config.reward.tracked_components[0],
            target=config.reward.target,
            u_max=config.actuators.u_max,
        )


def opposition_act(observations: FloatArray, params: OppositionParams) -> FloatArray:
    """Memoryless opposition control on the readings (P, n) of the acting sensors."""
    deviation = np.asarray(observations, dtype=np.float64)[:, params.component] - params.target
    return np.clip(-params.gain * deviation, -params.u_max, params.u_max)


class OppositionController(IController):
    name = "opposition"

    def __init__(self, params: OppositionParams):
        self.params = params

    def act(self, observation: Observation, explore: bool, rng: np.random.Generator) -> FloatArray:
        return opposition_act(observation.acting_readings, self.params)


@dataclass(frozen=True)
class GainResult:
    gain: float
    mean_return: float
    final_mse: float
    horizon_mse: float


def evaluate_opposition(config: TrainConfig, gain: float, episodes: Optional[int] = None) -> EvalSummary:
    return evaluate(config, OppositionController(OppositionParams.for_config(config, gain)), episodes)


def sweep_opposition_gain(
    config: TrainConfig,
    gains: Sequence[float] = DEFAULT_GAINS,
    horizon: float = SWEEP_HORIZON,
    store: Optional[RunStore] = None,
) -> list[GainResult]:
    """
    Evaluates the opposition controller for every gain.

    `horizon_mse` is the deviation from the reference `horizon` time units
    after control activation, averaged over the evaluation episodes.
    """
    results = []
    for gain in gains:
        summary = evaluate_opposition(config, gain)
        horizon_mse = float(np.mean([log.mse_at(log.activation_time + horizon) for log in summary.logs]))
        results.append(GainResult(gain, summary.mean_return, summary.final_mse, horizon_mse))
        logger.info(
            "Opposition gain %g: return %.4g, mse at +%g %.4g",
            gain,
            summary.mean_return,
            horizon,
            horizon_mse,
        )

    best = max(results, key=lambda r: r.mean_return)
    logger.info("Best opposition gain %g (return %.4g)", best.gain, best.mean_return)
    if store is not None:
        store.write_table(
            BASELINE_NAME,
            ("gain", "mean_return", "final_mse", "horizon_mse"),
            [(r.gain, r.mean_return, r.final_mse, r.horizon_mse) for r in results],
            "baseline=opposition",
        )
    return results


def global_agent_config(config: TrainConfig) -> DdpgConfig:
    return config.agent.model_copy(update={"actor_hidden": GLOBAL_HIDDEN, "critic_hidden": GLOBAL_HIDDEN})


def train_global(config: TrainConfig, store: Optional[RunStore] = None) -> TrainResult:
    """
    Single DDPG agent on the concatenated readings (M * n inputs, P outputs).

    One transition per step enters the buffer. A configured wall-clock budget
    is multiplied by GLOBAL_BUDGET_FACTOR.
    """
    spec = config.training
    if spec.max_wall_seconds is not None:
        budget = spec.max_wall_seconds * GLOBAL_BUDGET_FACTOR
        config = config.model_copy(update={"training": spec.model_copy(update={"max_wall_seconds": budget})})
    n_components = config.environment().n_components
    agent = DdpgAgent(
        config.sensors.count * n_components,
        config.actuators.count,
        global_agent_config(config),
        SeedStreams(spec.seed).generator("global_agent"),
    )
    result = train_controller(config, GlobalController(agent), store)
    if store is not None:
        store.write_table(
            BASELINE_NAME,
            ("episode", "mean_return", "final_mse"),
            [(episode, s.mean_return, s.final_mse) for episode, s in result.evaluations],
            "baseline=global",
        )
    return result
