"""
Small fully connected networks with hand-written backpropagation.

Weights are stored as (fan_in, fan_out) matrices so a batch of row vectors
flows through as ``x @ W + b``. Hidden layers use ReLU; the output layer is
either ``u_max * tanh`` (actors) or the identity (critics).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from src.core.errors import ShapeMismatchError
from src.core.grid import FloatArray

logger = logging.getLogger(__name__)

OutputActivation = Literal["tanh", "identity"]

# loss(output) -> (value, d value / d output)
LossFn = Callable[[FloatArray], tuple[float, FloatArray]]

FINITE_DIFFERENCE_STEP = 1e-5


@dataclass
class ForwardCache:
    """Layer inputs and pre-activations of one forward pass."""

    inputs: list[FloatArray] = field(default_factory=list)
    pre_activations: list[FloatArray] = field(default_factory=list)


@dataclass
class Mlp:
    sizes: tuple[int, ...]
    weights: list[FloatArray]
    biases: list[FloatArray]
    output_activation: OutputActivation = "identity"
    output_scale: float = 1.0

    def __post_init__(self) -> None:
        if len(self.sizes) < 2:
            raise ShapeMismatchError("a network needs at least an input and an output size")
        for layer, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            if self.weights[layer].shape != (fan_in, fan_out) or self.biases[layer].shape != (fan_out,):
                raise ShapeMismatchError(f"layer {layer} parameters do not match sizes {self.sizes}")

    @classmethod
    def initialize(
        cls,
        sizes: Sequence[int],
        rng: np.random.Generator,
        output_activation: OutputActivation = "identity",
        output_scale: float = 1.0,
        final_layer_bound: Optional[float] = None,
    ) -> "Mlp":
        """Uniform fan-in initialization; the last layer optionally uses a fixed small bound."""
        sizes = tuple(int(s) for s in sizes)
        weights, biases = [], []
        n_layers = len(sizes) - 1
        for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            if layer == n_layers - 1 and final_layer_bound is not None:
                bound = final_layer_bound
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(sizes, weights, biases, output_activation, output_scale)

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    @property
    def output_size(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list[FloatArray]:
        """Parameter arrays in the order W0, b0, W1, b1, ..."""
        params: list[FloatArray] = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def copy(self) -> "Mlp":
        return Mlp(
            self.sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.output_activation,
            self.output_scale,
        )

    def _output(self, z: FloatArray) -> FloatArray:
        if self.output_activation == "tanh":
            return self.output_scale * np.tanh(z)
        return z

    def forward_cache(self, x: FloatArray) -> tuple[FloatArray, ForwardCache]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_size:
            raise ShapeMismatchError(f"network expects {self.input_size} inputs, got {x.shape[-1]}")
        cache = ForwardCache()
        activation = x
        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            cache.inputs.append(activation)
            z = activation @ w + b
            cache.pre_activations.append(z)
            activation = self._output(z) if layer == last else np.maximum(z, 0.0)
        return activation, cache

    def forward(self, x: FloatArray) -> FloatArray:
        """Output for a single input vector or a batch of row vectors."""
        return self.forward_cache(x)[0]

    def backward(self, cache: ForwardCache, grad_output: FloatArray) -> tuple[list[FloatArray], FloatArray]:
        """
        Backpropagates d loss / d output through the cached pass.

        Returns parameter gradients (same order as `parameters()`) and
        d loss / d input.
        """
        last = len(self.weights) - 1
        z_out = cache.pre_activations[last]
        if self.output_activation == "tanh":
            grad = grad_output * self.output_scale * (1.0 - np.tanh(z_out) ** 2)
        else:
            grad = np.asarray(grad_output, dtype=np.float64)

        grads: list[FloatArray] = [np.empty(0)] * (2 * len(self.weights))
        for layer in range(last, -1, -1):
            layer_input = cache.inputs[layer]
            if layer_input.ndim == 1:
                grads[2 * layer] = np.outer(layer_input, grad)
                grads[2 * layer + 1] = grad.copy()
            else:
                grads[2 * layer] = layer_input.T @ grad
                grads[2 * layer + 1] = grad.sum(axis=0)
            grad_input = grad @ self.weights[layer].T
            if layer > 0:
                grad = grad_input * (cache.pre_activations[layer - 1] > 0.0)
        return grads, grad_input

    def flat_parameters(self) -> list[list[float]]:
        """Row-major flattened copies of every parameter array."""
        return [p.reshape(-1).tolist() for p in self.parameters()]

    @classmethod
    def from_flat(
        cls,
        sizes: Sequence[int],
        flat: Sequence[Sequence[float]],
        output_activation: OutputActivation,
        output_scale: float,
    ) -> "Mlp":
        sizes = tuple(int(s) for s in sizes)
        if len(flat) != 2 * (len(sizes) - 1):
            raise ShapeMismatchError(f"expected {2 * (len(sizes) - 1)} parameter arrays, got {len(flat)}")
        weights, biases = [], []
        for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = np.asarray(flat[2 * layer], dtype=np.float64)
            b = np.asarray(flat[2 * layer + 1], dtype=np.float64)
            if w.size != fan_in * fan_out or b.size != fan_out:
                raise ShapeMismatchError(f"layer {layer} parameter count does not match sizes {sizes}")
            weights.append(w.reshape(fan_in, fan_out))
            biases.append(b)
        return cls(sizes, weights, biases, output_activation, output_scale)


class Adam:
    """Adam with bias-corrected moments, updating parameter arrays in place."""

    def __init__(
        self,
        params: list[FloatArray],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[FloatArray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g**2
            m_hat = self.m[i] / correction1
            v_hat = self.v[i] / correction2
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def analytic_gradient(net: Mlp, loss: LossFn, inputs: FloatArray) -> list[FloatArray]:
    output, cache = net.forward_cache(inputs)
    _, grad_output = loss(output)
    return net.backward(cache, grad_output)[0]


def _relu_pattern(net: Mlp, inputs: FloatArray) -> list[FloatArray]:
    _, cache = net.forward_cache(inputs)
    return [z > 0.0 for z in cache.pre_activations[:-1]]


def grad_check(net: Mlp, loss: LossFn, inputs: FloatArray, step: float = FINITE_DIFFERENCE_STEP) -> float:
    """
    Maximum relative error between backpropagated and central-difference gradients.

    Entries whose perturbation flips a ReLU (a kink of the loss) are skipped.
    The relative error uses max(|analytic|, |numeric|, 1e-3 * max |gradient|)
    as denominator, so near-zero entries are judged on an absolute scale.
    """
    analytic = analytic_gradient(net, loss, inputs)
    scale = max((float(np.max(np.abs(g))) for g in analytic if g.size), default=0.0)
    floor = 1e-3 * scale
    worst = 0.0
    skipped = 0
    for param, grad in zip(net.parameters(), analytic):
        flat_param = param.reshape(-1)
        flat_grad = grad.reshape(-1)
        for index in range(flat_param.size):
            original = flat_param[index]
            flat_param[index] = original + step
            plus, _ = loss(net.forward(inputs))
            pattern_plus = _relu_pattern(net, inputs)
            flat_param[index] = original - step
            minus, _ = loss(net.forward(inputs))
            pattern_minus = _relu_pattern(net, inputs)
            flat_param[index] = original
            if any(not np.array_equal(a, b) for a, b in zip(pattern_plus, pattern_minus)):
                skipped += 1
                continue
            numeric = (plus - minus) / (2.0 * step)
            denominator = max(abs(flat_grad[index]), abs(numeric), floor)
            if denominator > 0.0:
                worst = max(worst, abs(flat_grad[index] - numeric) / denominator)
    if skipped:
        logger.debug("grad_check skipped %d parameters at ReLU kinks", skipped)
    return worst
