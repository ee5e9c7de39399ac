"""
Controllers driving the actuators.

A controller turns the sensor readings of one control step into the P
actions and, when it learns, into the transitions pushed to its replay
buffer.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.grid import FloatArray
from src.core.replay import TransitionBatch
from src.services.ddpg import DdpgAgent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Observation:
    """Readings (M, n), local views (M, d) and the sensor indices of the acting agents."""

    readings: FloatArray
    views: FloatArray
    acting: np.ndarray

    @property
    def acting_views(self) -> FloatArray:
        return self.views[self.acting]

    @property
    def acting_readings(self) -> FloatArray:
        return self.readings[self.acting]


class IController(ABC):
    """Abstract interface of a controller."""

    name: str

    @abstractmethod
    def act(self, observation: Observation, explore: bool, rng: np.random.Generator) -> FloatArray:
        """Returns the P actions for this step."""

    @property
    def learner(self) -> Optional[DdpgAgent]:
        """The agent trained from this controller's transitions, if any."""
        return None

    def transitions(
        self,
        observation: Observation,
        actions: FloatArray,
        local_rewards: FloatArray,
        global_reward: float,
        next_observation: Observation,
        terminal: bool,
    ) -> TransitionBatch:
        raise NotImplementedError(f"{self.name} controller does not learn")


class ConvolutionalController(IController):
    """
    One DDPG agent applied at every acting sensor to that sensor's local view.

    The acting agents share a single set of parameters, so one batched
    forward pass over the stacked views equals agent i acting on view i.
    """

    name = "convolutional"

    def __init__(self, agent: DdpgAgent, noise_scale: float = 0.0):
        self.agent = agent
        self.noise_scale = noise_scale

    @property
    def learner(self) -> DdpgAgent:
        return self.agent

    def act(self, observation: Observation, explore: bool, rng: np.random.Generator) -> FloatArray:
        actions = self.agent.act(
            observation.acting_views, explore=explore, rng=rng, noise_scale=self.noise_scale
        )
        return actions[:, 0]

    def transitions(
        self,
        observation: Observation,
        actions: FloatArray,
        local_rewards: FloatArray,
        global_reward: float,
        next_observation: Observation,
        terminal: bool,
    ) -> TransitionBatch:
        count = len(observation.acting)
        return TransitionBatch(
            states=observation.acting_views,
            actions=actions.reshape(count, 1),
            rewards=local_rewards[observation.acting],
            next_states=next_observation.acting_views,
            terminals=np.full(count, float(terminal)),
        )


class GlobalController(IController):
    """One DDPG agent seeing all M readings and emitting all P actions."""

    name = "global"

    def __init__(self, agent: DdpgAgent, noise_scale: float = 0.0):
        self.agent = agent
        self.noise_scale = noise_scale

    @property
    def learner(self) -> DdpgAgent:
        return self.agent

    def act(self, observation: Observation, explore: bool, rng: np.random.Generator) -> FloatArray:
        state = observation.readings.reshape(-1)
        return self.agent.act(state, explore=explore, rng=rng, noise_scale=self.noise_scale)

    def transitions(
        self,
        observation: Observation,
        actions: FloatArray,
        local_rewards: FloatArray,
        global_reward: float,
        next_observation: Observation,
        terminal: bool,
    ) -> TransitionBatch:
        return TransitionBatch(
            states=observation.readings.reshape(1, -1),
            actions=actions.reshape(1, -1),
            rewards=np.array([global_reward]),
            next_states=next_observation.readings.reshape(1, -1),
            terminals=np.array([float(terminal)]),
        )


class ActionRecorder(IController):
    """Forwards to `inner` and keeps a copy of every step's actions."""

    name = "recorder"

    def __init__(self, inner: IController):
        self.inner = inner
        self.actions: list[FloatArray] = []

    @property
    def learner(self) -> Optional[DdpgAgent]:
        return self.inner.learner

    def act(self, observation: Observation, explore: bool, rng: np.random.Generator) -> FloatArray:
        actions = self.inner.act(observation, explore, rng)
        self.actions.append(np.array(actions, copy=True))
        return actions

    def transitions(
        self,
        observation: Observation,
        actions: FloatArray,
        local_rewards: FloatArray,
        global_reward: float,
        next_observation: Observation,
        terminal: bool,
    ) -> TransitionBatch:
        return self.inner.transitions(
            observation, actions, local_rewards, global_reward, next_observation, terminal
        )
