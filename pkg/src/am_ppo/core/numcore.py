"""Dense networks with hand-written reverse mode, Adam and global norm clipping.

All arithmetic is float64. A network is a stack of affine layers with ``tanh`` between
them and a linear output. ``mlp_forward`` returns the output together with the layer
inputs it saw; ``mlp_backward`` walks the same layers in reverse and accumulates
parameter gradients into the ``ParamSet``.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass
class ParamSet:
    """Trainable arrays of one network with gradient and Adam moment slots.

    Layers are stored as ``layer{i}.weight`` (out x in) and ``layer{i}.bias`` (out).
    A policy additionally owns a state-independent ``log_std`` vector.
    """

    values: dict[str, np.ndarray]
    step: int = 0
    grads: dict[str, np.ndarray] = field(init=False, repr=False)
    exp_avg: dict[str, np.ndarray] = field(init=False, repr=False)
    exp_avg_sq: dict[str, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.values = {
            name: np.array(value, dtype=np.float64) for name, value in self.values.items()
        }
        self.grads = {name: np.zeros_like(v) for name, v in self.values.items()}
        self.exp_avg = {name: np.zeros_like(v) for name, v in self.values.items()}
        self.exp_avg_sq = {name: np.zeros_like(v) for name, v in self.values.items()}

    @property
    def n_layers(self) -> int:
        return sum(1 for name in self.values if name.endswith(".weight"))

    @property
    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [
            (self.values[f"layer{i}.weight"], self.values[f"layer{i}.bias"])
            for i in range(self.n_layers)
        ]

    @property
    def log_std(self) -> np.ndarray | None:
        return self.values.get("log_std")

    def zero_grad(self) -> None:
        for grad in self.grads.values():
            grad.fill(0.0)

    def grad_sq_sum(self) -> float:
        return float(sum(np.sum(g * g) for g in self.grads.values()))


@dataclass
class ForwardCache:
    """Layer inputs recorded by ``mlp_forward`` for the reverse pass."""

    layer_inputs: list[np.ndarray]
    batched: bool


@dataclass
class GaussianPolicyOutput:
    """Diagonal Gaussian with state-independent log standard deviation."""

    mean: np.ndarray
    log_std: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


def init_mlp(
    sizes: Sequence[int],
    rng: np.random.Generator,
    output_gain: float = 1.0,
    log_std_dim: int | None = None,
    log_std_init: float = 0.0,
) -> ParamSet:
    """Create a network with uniform fan-in initialisation and zero biases.

    Args:
        sizes: Layer widths from input to output, e.g. ``[obs_dim, 64, 64, 1]``.
        rng: Generator the weights are drawn from.
        output_gain: Extra scale on the final layer's bound.
        log_std_dim: When set, adds a ``log_std`` vector of this size.
        log_std_init: Initial value of every ``log_std`` entry.

    Returns:
        A fresh ``ParamSet``.
    """
    if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
        raise ConfigurationError(f"invalid layer sizes {list(sizes)}")

    values: dict[str, np.ndarray] = {}
    n_layers = len(sizes) - 1
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:], strict=True)):
        bound = 1.0 / math.sqrt(fan_in)
        if i == n_layers - 1:
            bound *= output_gain
        values[f"layer{i}.weight"] = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        values[f"layer{i}.bias"] = np.zeros(fan_out)

    if log_std_dim:
        values["log_std"] = np.full(log_std_dim, float(log_std_init))

    return ParamSet(values)


def mlp_forward(params: ParamSet, inputs: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on one input vector or a batch of rows.

    Returns:
        Tuple of (output, cache). The output has shape ``(out_dim,)`` for a single
        input and ``(n, out_dim)`` for a batch.

    Raises:
        ConfigurationError: If the input width does not match the first layer.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ConfigurationError(f"expected a vector or a batch, got shape {x.shape}")

    layers = params.layers
    if not layers:
        raise ConfigurationError("parameter set has no layers")

    h = np.atleast_2d(x)
    in_dim = layers[0][0].shape[1]
    if h.shape[1] != in_dim:
        raise ConfigurationError(
            f"input dimension {h.shape[1]} does not match first layer ({in_dim})"
        )

    seen: list[np.ndarray] = []
    last = len(layers) - 1
    for i, (weight, bias) in enumerate(layers):
        seen.append(h)
        h = h @ weight.T + bias
        if i < last:
            h = np.tanh(h)

    output = h if x.ndim == 2 else h[0]
    return output, ForwardCache(layer_inputs=seen, batched=x.ndim == 2)


def mlp_backward(
    params: ParamSet, cache: ForwardCache, grad_output: np.ndarray
) -> np.ndarray:
    """Accumulate parameter gradients for ``grad_output`` and return the input gradient."""
    d = np.atleast_2d(np.asarray(grad_output, dtype=np.float64))
    layers = params.layers
    for i in reversed(range(len(layers))):
        weight, _ = layers[i]
        a_in = cache.layer_inputs[i]
        params.grads[f"layer{i}.weight"] += d.T @ a_in
        params.grads[f"layer{i}.bias"] += d.sum(axis=0)
        d = d @ weight
        if i > 0:
            # a_in is tanh of the previous pre-activation
            d = d * (1.0 - a_in**2)
    return d if cache.batched else d[0]


def policy_forward(
    policy: ParamSet, observations: np.ndarray
) -> tuple[GaussianPolicyOutput, ForwardCache]:
    """Mean from the policy network plus its shared ``log_std``."""
    if policy.log_std is None:
        raise ConfigurationError("policy parameter set has no log_std")
    mean, cache = mlp_forward(policy, observations)
    return GaussianPolicyOutput(mean=mean, log_std=policy.log_std), cache


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NumericalError(f"non-finite values in {name}")


def gaussian_logprob(
    mean: np.ndarray, log_std: np.ndarray, action: np.ndarray
) -> float | np.ndarray:
    """Log density of a diagonal Gaussian, summed over the last axis."""
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    _check_finite("gaussian_logprob inputs", mean, log_std, action)

    z = (action - mean) / np.exp(log_std)
    per_dim = -0.5 * z**2 - log_std - 0.5 * LOG_2PI
    result = per_dim.sum(axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def gaussian_logprob_grads(
    mean: np.ndarray, log_std: np.ndarray, action: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension derivatives of ``gaussian_logprob`` w.r.t. mean and log_std."""
    std = np.exp(log_std)
    z = (action - mean) / std
    return z / std, z**2 - 1.0


def gaussian_entropy(log_std: np.ndarray) -> float:
    """Differential entropy of a diagonal Gaussian."""
    log_std = np.asarray(log_std, dtype=np.float64)
    return float(np.sum(0.5 * (1.0 + LOG_2PI) + log_std))


def adam_step(
    params: ParamSet,
    lr: float,
    betas: tuple[float, float] = ADAM_BETAS,
    eps: float = ADAM_EPS,
) -> None:
    """One bias-corrected Adam update using the gradients stored in ``params``.

    Raises:
        NumericalError: If a gradient or an updated parameter is not finite.
    """
    for name, grad in params.grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient in '{name}'")

    beta1, beta2 = betas
    params.step += 1
    bias_correction1 = 1.0 - beta1**params.step
    bias_correction2 = 1.0 - beta2**params.step

    for name, grad in params.grads.items():
        exp_avg = params.exp_avg[name]
        exp_avg_sq = params.exp_avg_sq[name]
        exp_avg *= beta1
        exp_avg += (1.0 - beta1) * grad
        exp_avg_sq *= beta2
        exp_avg_sq += (1.0 - beta2) * grad * grad

        m_hat = exp_avg / bias_correction1
        v_hat = exp_avg_sq / bias_correction2
        params.values[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)

        if not np.all(np.isfinite(params.values[name])):
            raise NumericalError(f"non-finite parameter '{name}' after optimizer step")


def clip_global_grad_norm(
    params: ParamSet | Sequence[ParamSet], max_norm: float
) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``.

    Returns:
        The global norm before clipping.
    """
    if max_norm <= 0:
        raise ConfigurationError("max_norm must be positive", field="max_grad_norm")

    param_sets = [params] if isinstance(params, ParamSet) else list(params)
    total_norm = math.sqrt(sum(p.grad_sq_sum() for p in param_sets))

    if total_norm > max_norm:
        scale = max_norm / total_norm
        for p in param_sets:
            for grad in p.grads.values():
                grad *= scale

    return total_norm
