"""Alpha modulation of advantages and its feedback controller.

Once per iteration ``update_controller`` looks at the whole batch of raw advantages and
moves the scaling state ``alpha_ema`` towards a target set by the batch's norm/std ratio
and by how far the smoothed saturation is from ``p_star``. The resulting alpha is then
frozen and ``modulate_minibatch`` uses it to reshape every minibatch:

    Z     = alpha * a / (||a|| + eps)
    a_mod = |a| * kappa * tanh(Z)
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)


class ModulationConfig(BaseModel):
    """Controller and gate constants."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kappa_shared: float = Field(default=2.0, gt=0.0)
    tau: float = Field(default=1.25, gt=0.0)
    p_star: float = Field(default=0.10, gt=0.0, lt=1.0)
    eta: float = Field(default=0.3, ge=0.0)
    rho_alpha: float = Field(default=0.1, gt=0.0, le=1.0)
    rho_sat: float = Field(default=0.98, gt=0.0, le=1.0)
    alpha_min: float = Field(default=1e-12, gt=0.0)
    alpha_max: float = Field(default=1e12, gt=0.0)
    eps: float = Field(default=1e-5, gt=0.0)
    alpha_init: float = 1.0
    sat_init: float = Field(default=0.10, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_alpha_range(self) -> "ModulationConfig":
        if self.alpha_max <= self.alpha_min:
            raise ValueError("alpha_max must be greater than alpha_min")
        if not self.alpha_min <= self.alpha_init <= self.alpha_max:
            raise ValueError("alpha_init must lie in [alpha_min, alpha_max]")
        return self


@dataclass(frozen=True)
class ControllerState:
    """Persistent controller state.

    ``frozen_alpha`` is the snapshot every minibatch of the current iteration uses;
    ``sat_current`` is the saturation observed by the most recent update.
    """

    alpha_ema: float
    sat_ema: float
    frozen_alpha: float
    sat_current: float

    @classmethod
    def initial(cls, cfg: ModulationConfig) -> "ControllerState":
        return cls(
            alpha_ema=cfg.alpha_init,
            sat_ema=cfg.sat_init,
            frozen_alpha=cfg.alpha_init,
            sat_current=cfg.sat_init,
        )


@dataclass
class ModulatedBatch:
    a_raw: np.ndarray
    a_mod: np.ndarray
    z: np.ndarray
    value_targets: np.ndarray
    alpha_used: float


def batch_std(a: np.ndarray, eps: float) -> float:
    """Sample (Bessel-corrected) standard deviation plus ``eps``; ``eps`` alone for n=1."""
    if a.size < 2:
        return eps
    return float(np.std(a, ddof=1)) + eps


def target_alpha(
    norm: float, sigma: float, sat_ema: float, cfg: ModulationConfig
) -> float:
    """Controller target from the batch norm/std ratio and saturation feedback."""
    feedback = (cfg.p_star / (sat_ema + cfg.eps)) ** cfg.eta
    return cfg.kappa_shared * ((norm + cfg.eps) / sigma) * feedback


def scaled_advantages(a: np.ndarray, alpha: float, eps: float) -> np.ndarray:
    """L2-normalise ``a`` and scale by ``alpha``."""
    return alpha * a / (float(np.linalg.norm(a)) + eps)


def saturation(z: np.ndarray, tau: float) -> float:
    """Fraction of entries with ``|z| > tau``."""
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        raise ConfigurationError("saturation of an empty batch is undefined")
    return float(np.mean(np.abs(z) > tau))


def update_controller(
    state: ControllerState, a_raw_full: np.ndarray, cfg: ModulationConfig
) -> ControllerState:
    """Advance the controller once using the iteration's full advantage batch.

    A batch whose norm is below ``eps`` leaves the state unchanged.

    Raises:
        ConfigurationError: If the batch is empty.
        NumericalError: If the batch holds non-finite values.
    """
    a = np.asarray(a_raw_full, dtype=np.float64).reshape(-1)
    if a.size == 0:
        raise ConfigurationError("update_controller needs at least one advantage")
    if not np.all(np.isfinite(a)):
        raise NumericalError("non-finite raw advantages passed to the controller")

    norm = float(np.linalg.norm(a))
    if norm < cfg.eps:
        logger.debug(f"Degenerate advantage batch (norm={norm:.3e}), controller held")
        return state

    sigma = batch_std(a, cfg.eps)
    alpha_hat = target_alpha(norm, sigma, state.sat_ema, cfg)
    blended = (1.0 - cfg.rho_alpha) * state.alpha_ema + cfg.rho_alpha * alpha_hat
    alpha_ema = min(max(blended, cfg.alpha_min), cfg.alpha_max)

    z = scaled_advantages(a, alpha_ema, cfg.eps)
    sat_current = saturation(z, cfg.tau)
    sat_ema = (1.0 - cfg.rho_sat) * state.sat_ema + cfg.rho_sat * sat_current

    return replace(
        state,
        alpha_ema=alpha_ema,
        sat_ema=sat_ema,
        frozen_alpha=alpha_ema,
        sat_current=sat_current,
    )


def modulate_minibatch(
    a_raw_mb: np.ndarray, frozen_alpha: float, cfg: ModulationConfig
) -> np.ndarray:
    """Gate ``|a|`` by ``kappa * tanh(Z)``; batches with norm below ``eps`` pass through."""
    a = np.asarray(a_raw_mb, dtype=np.float64)
    norm = float(np.linalg.norm(a))
    if norm < cfg.eps:
        return a.copy()
    z = frozen_alpha * a / (norm + cfg.eps)
    return np.abs(a) * (cfg.kappa_shared * np.tanh(z))


def value_targets(a_mod: np.ndarray, old_values: np.ndarray) -> np.ndarray:
    """Critic targets built from modulated advantages."""
    a_mod = np.asarray(a_mod, dtype=np.float64)
    old_values = np.asarray(old_values, dtype=np.float64)
    if a_mod.shape != old_values.shape:
        raise ConfigurationError(
            f"advantages {a_mod.shape} and values {old_values.shape} differ in shape"
        )
    return a_mod + old_values


def modulate(
    a_raw_mb: np.ndarray,
    old_values: np.ndarray,
    frozen_alpha: float,
    cfg: ModulationConfig,
) -> ModulatedBatch:
    """Modulate one minibatch and build its value targets."""
    a = np.asarray(a_raw_mb, dtype=np.float64)
    a_mod = modulate_minibatch(a, frozen_alpha, cfg)
    return ModulatedBatch(
        a_raw=a,
        a_mod=a_mod,
        z=scaled_advantages(a, frozen_alpha, cfg.eps),
        value_targets=value_targets(a_mod, old_values),
        alpha_used=frozen_alpha,
    )
