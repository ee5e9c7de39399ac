"""
Deep deterministic policy gradient learner shared by all agents.

One actor/critic pair (plus target copies) is trained from a single replay
buffer; every agent clone reads the same parameters when it acts.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.core.errors import ConfigError, ShapeMismatchError, TrainingDivergedError
from src.core.grid import FloatArray
from src.core.kernels import KernelSpec
from src.core.mlp import Adam, Mlp, OutputActivation
from src.core.replay import ReplayBuffer, TransitionBatch

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
ACTOR_FINAL_BOUND = 3e-3


class DdpgConfig(BaseModel):
    """Network sizes and learning hyperparameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    actor_hidden: tuple[int, ...] = (6,)
    critic_hidden: tuple[int, ...] = (140,)
    gamma: float = Field(default=0.99, ge=0.0, le=1.0)
    tau: float = Field(default=0.005, gt=0.0, le=1.0)
    actor_lr: float = Field(default=1e-4, gt=0.0)
    critic_lr: float = Field(default=1e-3, gt=0.0)
    batch_size: int = Field(default=64, ge=1)
    buffer_capacity: int = Field(default=100_000, ge=1)
    warm_fill: int = Field(default=1000, ge=0)
    noise_start: float = Field(default=0.1, ge=0.0)
    noise_end: float = Field(default=0.01, ge=0.0)
    u_max: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _check_layers(self) -> "DdpgConfig":
        if any(size < 1 for size in (*self.actor_hidden, *self.critic_hidden)):
            raise ValueError("hidden layer sizes must be positive")
        return self

    def noise_scale(self, progress: float) -> float:
        """Exploration std in action units, decaying linearly over training progress in [0, 1]."""
        progress = min(max(progress, 0.0), 1.0)
        fraction = self.noise_start + (self.noise_end - self.noise_start) * progress
        return fraction * self.u_max


@dataclass(frozen=True)
class UpdateDiagnostics:
    critic_loss: float
    actor_objective: float


class PolicyGeometry(BaseModel):
    """Sensor geometry a policy was trained with; transfer requires it to match."""

    model_config = ConfigDict(frozen=True)

    neighborhood: int
    n_components: int
    delays: int = 0
    delay_steps: int = 0
    spacing: float
    kernel: KernelSpec
    ndim: int = 1

    def mismatches(self, other: "PolicyGeometry") -> list[str]:
        reasons = []
        for name in ("neighborhood", "n_components", "delays", "delay_steps", "ndim"):
            if getattr(self, name) != getattr(other, name):
                reasons.append(f"{name} {getattr(self, name)} != {getattr(other, name)}")
        if abs(self.spacing - other.spacing) > 1e-9 * max(self.spacing, other.spacing):
            reasons.append(f"L/M ratio {self.spacing:.6g} != {other.spacing:.6g}")
        if self.kernel != other.kernel:
            reasons.append("convolution kernels differ")
        return reasons

    def summary(self) -> dict[str, Any]:
        data = self.model_dump(exclude={"kernel"})
        data["kernel"] = self.kernel.shape
        data["sigma/width"] = self.kernel.sigma if self.kernel.shape == "gaussian" else self.kernel.width
        return data


class NetworkBlob(BaseModel):
    sizes: list[int]
    output_activation: OutputActivation
    output_scale: float
    parameters: list[list[float]]

    @classmethod
    def of(cls, net: Mlp) -> "NetworkBlob":
        return cls(
            sizes=list(net.sizes),
            output_activation=net.output_activation,
            output_scale=net.output_scale,
            parameters=net.flat_parameters(),
        )

    def build(self) -> Mlp:
        return Mlp.from_flat(self.sizes, self.parameters, self.output_activation, self.output_scale)


class PolicyCheckpoint(BaseModel):
    """Self-describing policy file (JSON text)."""

    version: int = CHECKPOINT_VERSION
    kind: str = "ddpg"
    u_max: float
    geometry: PolicyGeometry
    config: DdpgConfig
    actor: NetworkBlob
    critic: Optional[NetworkBlob] = None


class DdpgAgent:
    """Actor, critic, their targets, optimizers and the shared replay buffer."""

    def __init__(self, state_dim: int, action_dim: int, config: DdpgConfig, rng: np.random.Generator):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.config = config
        self.actor = Mlp.initialize(
            (state_dim, *config.actor_hidden, action_dim),
            rng,
            output_activation="tanh",
            output_scale=config.u_max,
            final_layer_bound=ACTOR_FINAL_BOUND,
        )
        self.critic = Mlp.initialize((state_dim + action_dim, *config.critic_hidden, 1), rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self._reset_optimizers()
        self.buffer = ReplayBuffer(config.buffer_capacity, state_dim, action_dim)
        self.updates = 0

    def _reset_optimizers(self) -> None:
        self.actor_optimizer = Adam(self.actor.parameters(), lr=self.config.actor_lr)
        self.critic_optimizer = Adam(self.critic.parameters(), lr=self.config.critic_lr)

    @property
    def u_max(self) -> float:
        return self.config.u_max

    def act(
        self,
        states: FloatArray,
        explore: bool = False,
        rng: Optional[np.random.Generator] = None,
        noise_scale: float = 0.0,
    ) -> FloatArray:
        """
        Deterministic actor output for one state or a batch of states.

        With `explore` set, Gaussian noise of std `noise_scale` is added and
        the result is clamped to [-u_max, u_max].
        """
        states = np.asarray(states, dtype=np.float64)
        if states.shape[-1] != self.state_dim:
            raise ShapeMismatchError(
                f"agent expects states of length {self.state_dim}, got {states.shape[-1]}"
            )
        actions = self.actor.forward(states)
        if explore and noise_scale > 0.0:
            if rng is None:
                raise ValueError("exploration needs a random generator")
            actions = actions + rng.normal(0.0, noise_scale, size=actions.shape)
        return np.clip(actions, -self.u_max, self.u_max)

    def q_values(self, states: FloatArray, actions: FloatArray) -> FloatArray:
        return self.critic.forward(np.concatenate([states, actions], axis=-1))[..., 0]

    def bellman_targets(self, batch: TransitionBatch) -> FloatArray:
        """y = r + gamma (1 - terminal) Q'(s', pi'(s'))."""
        next_actions = self.target_actor.forward(batch.next_states)
        next_q = self.target_critic.forward(np.concatenate([batch.next_states, next_actions], axis=1))[:, 0]
        return batch.rewards + self.config.gamma * (1.0 - batch.terminals) * next_q

    def update(self, batch: TransitionBatch) -> UpdateDiagnostics:
        """One critic step on the squared Bellman error, one actor step ascending Q, then soft update."""
        n = len(batch)
        if n < 1:
            raise ValueError("update needs at least one transition")
        targets = self.bellman_targets(batch)

        critic_in = np.concatenate([batch.states, batch.actions], axis=1)
        q, critic_cache = self.critic.forward_cache(critic_in)
        residual = q[:, 0] - targets
        critic_loss = float(np.mean(residual**2))
        if not np.isfinite(critic_loss):
            self._diverged("critic loss", critic_loss, batch, targets)
        critic_grads, _ = self.critic.backward(critic_cache, (2.0 / n) * residual[:, None])
        self.critic_optimizer.step(critic_grads)

        actions, actor_cache = self.actor.forward_cache(batch.states)
        q_pi, q_cache = self.critic.forward_cache(np.concatenate([batch.states, actions], axis=1))
        actor_objective = float(np.mean(q_pi))
        if not np.isfinite(actor_objective):
            self._diverged("actor objective", actor_objective, batch, targets)
        _, grad_input = self.critic.backward(q_cache, np.full((n, 1), 1.0 / n))
        grad_actions = grad_input[:, self.state_dim :]
        actor_grads, _ = self.actor.backward(actor_cache, -grad_actions)
        self.actor_optimizer.step(actor_grads)

        self.soft_update(self.config.tau)
        self.updates += 1
        return UpdateDiagnostics(critic_loss=critic_loss, actor_objective=actor_objective)

    def _diverged(self, what: str, value: float, batch: TransitionBatch, targets: FloatArray) -> None:
        diagnostics = {
            "update": self.updates,
            what: value,
            "reward_range": (float(np.min(batch.rewards)), float(np.max(batch.rewards))),
            "target_range": (float(np.nanmin(targets)), float(np.nanmax(targets))),
            "state_abs_max": float(np.max(np.abs(batch.states))),
            "actor_param_abs_max": max(float(np.max(np.abs(p))) for p in self.actor.parameters()),
            "critic_param_abs_max": max(float(np.max(np.abs(p))) for p in self.critic.parameters()),
        }
        logger.error("Training diverged at update %d: %s", self.updates, diagnostics)
        raise TrainingDivergedError(f"non-finite {what} at update {self.updates}", diagnostics)

    def soft_update(self, tau: float) -> None:
        """theta' <- tau * theta + (1 - tau) * theta' for both target networks."""
        for online, target in ((self.actor, self.target_actor), (self.critic, self.target_critic)):
            for p, p_target in zip(online.parameters(), target.parameters()):
                if tau == 1.0:
                    p_target[...] = p
                else:
                    p_target *= 1.0 - tau
                    p_target += tau * p

    def train_step(self, rng: np.random.Generator) -> Optional[UpdateDiagnostics]:
        """Samples a batch and updates once the buffer holds `warm_fill` transitions."""
        if len(self.buffer) < max(self.config.warm_fill, 1):
            return None
        return self.update(self.buffer.sample(self.config.batch_size, rng))

    def checkpoint(self, geometry: PolicyGeometry) -> PolicyCheckpoint:
        return PolicyCheckpoint(
            u_max=self.u_max,
            geometry=geometry,
            config=self.config,
            actor=NetworkBlob.of(self.actor),
            critic=NetworkBlob.of(self.critic),
        )

    def save(self, path: Path, geometry: PolicyGeometry) -> None:
        path.write_text(self.checkpoint(geometry).model_dump_json(indent=1), encoding="utf-8")
        logger.info("Policy checkpoint written to %s", path)

    @classmethod
    def from_checkpoint(cls, checkpoint: PolicyCheckpoint) -> "DdpgAgent":
        """Rebuilds an agent whose online and target networks equal the stored ones."""
        actor = checkpoint.actor.build()
        agent = cls(actor.input_size, actor.output_size, checkpoint.config, np.random.default_rng(0))
        agent.actor = actor
        agent.target_actor = actor.copy()
        if checkpoint.critic is not None:
            agent.critic = checkpoint.critic.build()
            agent.target_critic = agent.critic.copy()
        agent._reset_optimizers()
        return agent


def load_checkpoint(path: Path) -> PolicyCheckpoint:
    """Parses and validates a policy file."""
    try:
        checkpoint = PolicyCheckpoint.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        message = f"not a policy checkpoint ({exc.error_count()} validation errors)"
        raise ConfigError(message, None, str(path)) from exc
    if checkpoint.version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {checkpoint.version}", None, str(path))
    return checkpoint
