"""Seeded point-mass environments with a reset/step interface.

A point mass lives on a line (``pointmass1d``) or a plane (``pointmass2d``). The agent
pushes it with a bounded acceleration and is penalised for distance from the origin,
speed and effort. Episodes end only at the time limit.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

ENV_DIMS = {"pointmass1d": 1, "pointmass2d": 2}

DT = 0.05
HORIZON = 200
VELOCITY_COST = 0.1
ACTION_COST = 0.001


@dataclass
class EnvState:
    """Current observation, elapsed steps and the generator used for resets."""

    observation: np.ndarray
    steps_elapsed: int
    rng: np.random.Generator


@dataclass
class StepResult:
    next_observation: np.ndarray
    reward: float
    done: bool


def point_mass_dynamics(
    position: np.ndarray, velocity: np.ndarray, action: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Advance one step. Returns (position, velocity, reward)."""
    a = np.clip(action, -1.0, 1.0)
    next_position = position + velocity * DT
    next_velocity = velocity + a * DT
    reward = -(
        float(np.sum(next_position**2))
        + VELOCITY_COST * float(np.sum(next_velocity**2))
        + ACTION_COST * float(np.sum(a**2))
    )
    return next_position, next_velocity, reward


class PointMassEnv:
    """Point mass with observation ``[positions..., velocities...]``."""

    def __init__(self, env_id: str):
        if env_id not in ENV_DIMS:
            raise ConfigurationError(
                f"unknown env_id '{env_id}', expected one of {sorted(ENV_DIMS)}",
                field="env_id",
            )
        self.env_id = env_id
        self.dim = ENV_DIMS[env_id]
        self.horizon = HORIZON
        self.state: EnvState | None = None

    @property
    def obs_dim(self) -> int:
        return 2 * self.dim

    @property
    def action_dim(self) -> int:
        return self.dim

    @property
    def observation(self) -> np.ndarray:
        if self.state is None:
            raise ConfigurationError(f"{self.env_id}: reset() must be called first")
        return self.state.observation

    def reset(self, seed: int) -> np.ndarray:
        """Start an episode with positions ~ U(-1, 1) and zero velocity."""
        rng = np.random.default_rng(seed)
        position = rng.uniform(-1.0, 1.0, size=self.dim)
        observation = np.concatenate([position, np.zeros(self.dim)])
        self.state = EnvState(observation=observation, steps_elapsed=0, rng=rng)
        return observation.copy()

    def step(self, action: np.ndarray) -> StepResult:
        """Apply a clamped action and advance the dynamics by one step.

        Raises:
            ConfigurationError: On an action of the wrong size or stepping a finished
                episode.
            NumericalError: On a non-finite action.
        """
        state = self.state
        if state is None:
            raise ConfigurationError(f"{self.env_id}: reset() must be called first")
        if state.steps_elapsed >= self.horizon:
            raise ConfigurationError(f"{self.env_id}: episode finished, call reset()")

        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape[0] != self.action_dim:
            raise ConfigurationError(
                f"{self.env_id}: action dimension {action.shape[0]}, "
                f"expected {self.action_dim}"
            )
        if not np.all(np.isfinite(action)):
            raise NumericalError(f"{self.env_id}: non-finite action {action}")

        position = state.observation[: self.dim]
        velocity = state.observation[self.dim :]
        position, velocity, reward = point_mass_dynamics(position, velocity, action)

        state.observation = np.concatenate([position, velocity])
        state.steps_elapsed += 1
        done = state.steps_elapsed >= self.horizon

        return StepResult(
            next_observation=state.observation.copy(), reward=reward, done=done
        )


def make_env(env_id: str) -> PointMassEnv:
    return PointMassEnv(env_id)


def reset(env_id: str, seed: int) -> tuple[PointMassEnv, np.ndarray]:
    """Create ``env_id`` and reset it with ``seed``."""
    env = make_env(env_id)
    return env, env.reset(seed)
