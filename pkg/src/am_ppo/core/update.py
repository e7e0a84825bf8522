"""PPO / AM-PPO optimisation phase.

Losses are written with their gradients next to them: every loss function has a
matching ``*_grad`` that returns the derivative of the loss w.r.t. the network output it
consumes, and ``compute_losses`` chains those into the networks with ``mlp_backward``.
The total loss that is minimised is

    policy_loss + vf_coef * value_loss - ent_coef * entropy
"""

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import ConfigurationError, NumericalError
from .modulation import (
    ControllerState,
    ModulationConfig,
    modulate,
    saturation,
    value_targets,
)
from .numcore import (
    ParamSet,
    adam_step,
    clip_global_grad_norm,
    gaussian_entropy,
    gaussian_logprob,
    gaussian_logprob_grads,
    mlp_backward,
    mlp_forward,
    policy_forward,
)
from .rollout import AdvantageBatch, RolloutBuffer, flatten

logger = logging.getLogger(__name__)

ADV_NORM_EPS = 1e-8


class UpdateConfig(BaseModel):
    """Optimisation-phase hyperparameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    algo: Literal["ppo", "am_ppo"] = "am_ppo"
    clip_coef: float = Field(default=0.2, gt=0.0)
    vf_coef: float = Field(default=0.5, ge=0.0)
    ent_coef: float = Field(default=0.0, ge=0.0)
    update_epochs: int = Field(default=10, ge=1)
    num_minibatches: int = Field(default=32, ge=1)
    norm_adv: bool = True
    clip_vloss: bool = True
    max_grad_norm: float = Field(default=0.5, gt=0.0)
    learning_rate: float = Field(default=3e-4, ge=0.0)
    anneal_lr: bool = True


class MetricsRecord(BaseModel):
    """Diagnostics of one training iteration, one line of ``metrics.jsonl``."""

    iteration: int
    global_step: int
    mean_episodic_return: float | None
    policy_loss: float
    value_loss: float
    entropy: float
    alpha_ema: float
    sat_ema: float
    sat_current: float
    a_mod_abs_mean: float
    a_mod_std: float
    ratio_clip_fraction: float = Field(ge=0.0, le=1.0)
    grad_norm_preclip: float
    lr_current: float
    approx_kl: float
    explained_variance: float | None
    episodes_completed: int


@dataclass
class Minibatch:
    observations: np.ndarray
    actions: np.ndarray
    logprobs_old: np.ndarray
    values_old: np.ndarray
    advantages: np.ndarray
    value_targets: np.ndarray
    # advantages after the gate, before policy-side normalisation
    advantages_modulated: np.ndarray | None = None


@dataclass
class LossInfo:
    total: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float


@dataclass
class UpdateResult:
    """Aggregated diagnostics of one call to ``run_update``."""

    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    grad_norm_preclip: float
    explained_variance: float | None
    a_mod_abs_mean: float
    a_mod_std: float


def normalize_advantages(a: np.ndarray) -> np.ndarray:
    """Zero mean, unit sample std; fewer than two entries are returned unchanged."""
    a = np.asarray(a, dtype=np.float64)
    if a.size < 2:
        return a.copy()
    return (a - a.mean()) / (a.std(ddof=1) + ADV_NORM_EPS)


def _ratios(logp_new: np.ndarray, logp_old: np.ndarray) -> np.ndarray:
    ratio = np.exp(np.asarray(logp_new) - np.asarray(logp_old))
    if not np.all(np.isfinite(ratio)):
        raise NumericalError("non-finite probability ratio")
    return ratio


def policy_loss(
    logp_new: np.ndarray, logp_old: np.ndarray, adv: np.ndarray, clip_coef: float
) -> tuple[float, float]:
    """Negated clipped surrogate and the fraction of ratios outside the clip range."""
    ratio = _ratios(logp_new, logp_old)
    clipped = np.clip(ratio, 1.0 - clip_coef, 1.0 + clip_coef)
    surrogate = np.minimum(ratio * adv, clipped * adv)
    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > clip_coef))
    return -float(np.mean(surrogate)), clip_fraction


def policy_loss_grad(
    logp_new: np.ndarray, logp_old: np.ndarray, adv: np.ndarray, clip_coef: float
) -> np.ndarray:
    """d policy_loss / d logp_new."""
    ratio = _ratios(logp_new, logp_old)
    clipped = np.clip(ratio, 1.0 - clip_coef, 1.0 + clip_coef)
    inside = np.abs(ratio - 1.0) <= clip_coef
    unclipped_wins = ratio * adv <= clipped * adv
    d_surrogate_d_ratio = np.where(unclipped_wins | inside, adv, 0.0)
    return -d_surrogate_d_ratio * ratio / ratio.size


def value_loss(
    v_new: np.ndarray,
    v_old: np.ndarray,
    v_target: np.ndarray,
    clip_coef: float,
    clip_vloss: bool,
) -> float:
    """Half mean squared error, optionally the pessimistic max with a clipped update."""
    unclipped = (v_new - v_target) ** 2
    if not clip_vloss:
        return 0.5 * float(np.mean(unclipped))
    v_clipped = v_old + np.clip(v_new - v_old, -clip_coef, clip_coef)
    clipped = (v_clipped - v_target) ** 2
    return 0.5 * float(np.mean(np.maximum(unclipped, clipped)))


def value_loss_grad(
    v_new: np.ndarray,
    v_old: np.ndarray,
    v_target: np.ndarray,
    clip_coef: float,
    clip_vloss: bool,
) -> np.ndarray:
    """d value_loss / d v_new."""
    m = v_new.size
    d_unclipped = (v_new - v_target) / m
    if not clip_vloss:
        return d_unclipped
    delta = v_new - v_old
    v_clipped = v_old + np.clip(delta, -clip_coef, clip_coef)
    unclipped = (v_new - v_target) ** 2
    clipped = (v_clipped - v_target) ** 2
    inside = np.abs(delta) < clip_coef
    d_clipped = np.where(inside, (v_clipped - v_target) / m, 0.0)
    return np.where(unclipped >= clipped, d_unclipped, d_clipped)


def compute_losses(
    policy: ParamSet,
    value: ParamSet,
    mb: Minibatch,
    cfg: UpdateConfig,
    backward: bool = True,
) -> LossInfo:
    """Evaluate the total loss on ``mb`` and, with ``backward``, fill both grad slots.

    Raises:
        NumericalError: If the loss or a probability ratio is not finite.
    """
    dist, policy_cache = policy_forward(policy, mb.observations)
    logp_new = gaussian_logprob(dist.mean, dist.log_std, mb.actions)
    v_out, value_cache = mlp_forward(value, mb.observations)
    v_new = v_out[:, 0]

    pg_loss, clip_fraction = policy_loss(
        logp_new, mb.logprobs_old, mb.advantages, cfg.clip_coef
    )
    v_loss = value_loss(
        v_new, mb.values_old, mb.value_targets, cfg.clip_coef, cfg.clip_vloss
    )
    entropy = gaussian_entropy(dist.log_std)
    total = pg_loss + cfg.vf_coef * v_loss - cfg.ent_coef * entropy
    if not math.isfinite(total):
        raise NumericalError(
            f"non-finite loss (policy={pg_loss}, value={v_loss}, entropy={entropy})"
        )

    log_ratio = logp_new - mb.logprobs_old
    approx_kl = float(np.mean(np.expm1(log_ratio) - log_ratio))

    if backward:
        policy.zero_grad()
        value.zero_grad()

        d_logp = policy_loss_grad(
            logp_new, mb.logprobs_old, mb.advantages, cfg.clip_coef
        )
        d_mean, d_log_std = gaussian_logprob_grads(
            dist.mean, dist.log_std, mb.actions
        )
        mlp_backward(policy, policy_cache, d_logp[:, None] * d_mean)
        # entropy is log_std + const per dimension
        policy.grads["log_std"] += (d_logp[:, None] * d_log_std).sum(axis=0)
        policy.grads["log_std"] -= cfg.ent_coef

        d_v = cfg.vf_coef * value_loss_grad(
            v_new, mb.values_old, mb.value_targets, cfg.clip_coef, cfg.clip_vloss
        )
        mlp_backward(value, value_cache, d_v[:, None])

    return LossInfo(
        total=total,
        policy_loss=pg_loss,
        value_loss=v_loss,
        entropy=entropy,
        clip_fraction=clip_fraction,
        approx_kl=approx_kl,
    )


def build_minibatch(
    indices: np.ndarray,
    observations: np.ndarray,
    actions: np.ndarray,
    logprobs: np.ndarray,
    adv: AdvantageBatch,
    ctrl: ControllerState,
    cfg: UpdateConfig,
    mod_cfg: ModulationConfig,
) -> Minibatch:
    """Slice flat arrays and prepare advantages and value targets for one minibatch.

    Value targets are formed before the optional policy-side normalisation.
    """
    a_raw = adv.advantages_raw[indices]
    v_old = adv.old_values[indices]

    if cfg.algo == "am_ppo":
        modulated = modulate(a_raw, v_old, ctrl.frozen_alpha, mod_cfg)
        a_mod, targets = modulated.a_mod, modulated.value_targets
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(
                f"Minibatch saturation {saturation(modulated.z, mod_cfg.tau):.3f} "
                f"at alpha={modulated.alpha_used:.4g}"
            )
    else:
        a_mod = a_raw.copy()
        targets = value_targets(a_raw, v_old)

    policy_adv = normalize_advantages(a_mod) if cfg.norm_adv else a_mod

    return Minibatch(
        observations=observations[indices],
        actions=actions[indices],
        logprobs_old=logprobs[indices],
        values_old=v_old,
        advantages=policy_adv,
        value_targets=targets,
        advantages_modulated=a_mod,
    )


def explained_variance(predicted: np.ndarray, target: np.ndarray) -> float | None:
    """1 - Var(target - predicted) / Var(target); ``None`` when the target is constant."""
    var_target = float(np.var(target))
    if var_target == 0.0:
        return None
    return 1.0 - float(np.var(target - predicted)) / var_target


def run_update(
    buffer: RolloutBuffer,
    adv: AdvantageBatch,
    ctrl: ControllerState,
    policy: ParamSet,
    value: ParamSet,
    cfg: UpdateConfig,
    mod_cfg: ModulationConfig,
    rng: np.random.Generator,
    lr: float | None = None,
) -> UpdateResult:
    """Run the update epochs over shuffled minibatches.

    Losses and the pre-clip gradient norm are reported from the final minibatch; the
    clip fraction is averaged over every minibatch. ``approx_kl`` and the statistics
    of the modulated advantages (mean of ``|a_mod|``, population std) cover the final
    epoch, which visits every sample once.

    Args:
        buffer: Experience of this iteration.
        adv: Raw advantages and old values, flattened like the buffer.
        ctrl: Controller state; ``frozen_alpha`` is used for every minibatch.
        policy: Policy parameters, updated in place.
        value: Value parameters, updated in place.
        cfg: Update hyperparameters.
        mod_cfg: Modulation constants (used when ``cfg.algo == "am_ppo"``).
        rng: Generator for the per-epoch permutation.
        lr: Step size; defaults to ``cfg.learning_rate``.

    Returns:
        Aggregated diagnostics.

    Raises:
        ConfigurationError: If the minibatch count does not divide the batch.
        NumericalError: On a non-finite loss, ratio or gradient.
    """
    n = adv.advantages_raw.size
    if n != buffer.batch_size:
        raise ConfigurationError(
            f"advantage batch of {n} does not match buffer of {buffer.batch_size}"
        )
    if n % cfg.num_minibatches != 0:
        raise ConfigurationError(
            f"num_minibatches={cfg.num_minibatches} does not divide batch size {n}",
            field="num_minibatches",
        )

    lr = cfg.learning_rate if lr is None else lr
    minibatch_size = n // cfg.num_minibatches
    observations = flatten(buffer.observations)
    actions = flatten(buffer.actions)
    logprobs = flatten(buffer.logprobs)

    clip_fractions: list[float] = []
    last_epoch_kl: list[float] = []
    last_epoch_a_mod: list[np.ndarray] = []
    info: LossInfo | None = None
    grad_norm = 0.0

    for epoch in range(cfg.update_epochs):
        permutation = rng.permutation(n)
        last_epoch_kl = []
        last_epoch_a_mod = []
        for start in range(0, n, minibatch_size):
            indices = permutation[start : start + minibatch_size]
            mb = build_minibatch(
                indices, observations, actions, logprobs, adv, ctrl, cfg, mod_cfg
            )
            info = compute_losses(policy, value, mb, cfg)
            grad_norm = clip_global_grad_norm([policy, value], cfg.max_grad_norm)
            adam_step(policy, lr)
            adam_step(value, lr)

            clip_fractions.append(info.clip_fraction)
            last_epoch_kl.append(info.approx_kl)
            last_epoch_a_mod.append(mb.advantages_modulated)
        logger.debug(
            f"Epoch {epoch}: policy_loss={info.policy_loss:.5f} "
            f"value_loss={info.value_loss:.5f} grad_norm={grad_norm:.4f}"
        )

    returns = adv.advantages_raw + adv.old_values
    a_mod = np.concatenate(last_epoch_a_mod)

    return UpdateResult(
        policy_loss=info.policy_loss,
        value_loss=info.value_loss,
        entropy=info.entropy,
        clip_fraction=float(np.mean(clip_fractions)),
        approx_kl=float(np.mean(last_epoch_kl)),
        grad_norm_preclip=grad_norm,
        explained_variance=explained_variance(adv.old_values, returns),
        a_mod_abs_mean=float(np.mean(np.abs(a_mod))),
        a_mod_std=float(np.std(a_mod)),
    )
