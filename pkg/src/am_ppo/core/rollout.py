"""On-policy experience collection and generalized advantage estimation."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .envs import PointMassEnv
from .errors import ConfigurationError, NumericalError
from .numcore import ParamSet, gaussian_logprob, mlp_forward, policy_forward
from .seeding import draw_seed

logger = logging.getLogger(__name__)


@dataclass
class RolloutBuffer:
    """One iteration of experience, indexed ``[step][env]``.

    ``dones[t, e]`` is true when the episode of env ``e`` ended after step ``t``.
    ``bootstrap_value`` is V(s) of the observation following the final step.
    """

    observations: np.ndarray
    actions: np.ndarray
    logprobs: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    bootstrap_value: np.ndarray
    episode_returns: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        lead = self.rewards.shape
        for name in ("observations", "actions", "logprobs", "dones", "values"):
            if getattr(self, name).shape[:2] != lead:
                raise ConfigurationError(
                    f"buffer field '{name}' has leading shape "
                    f"{getattr(self, name).shape[:2]}, expected {lead}"
                )
        if self.bootstrap_value.shape != (lead[1],):
            raise ConfigurationError("bootstrap_value must have one entry per env")

    @property
    def n_steps(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_envs(self) -> int:
        return self.rewards.shape[1]

    @property
    def batch_size(self) -> int:
        return self.n_steps * self.n_envs


@dataclass
class AdvantageBatch:
    """Flattened (time-major, then env) raw advantages and the values behind them."""

    advantages_raw: np.ndarray
    old_values: np.ndarray


def flatten(x: np.ndarray) -> np.ndarray:
    """Merge the leading ``[step][env]`` axes, time-major."""
    return x.reshape((-1,) + x.shape[2:])


def unflatten(x: np.ndarray, n_steps: int, n_envs: int) -> np.ndarray:
    return x.reshape((n_steps, n_envs) + x.shape[1:])


def collect(
    policy: ParamSet,
    value: ParamSet,
    envs: Sequence[PointMassEnv],
    n_steps: int,
    rng: np.random.Generator,
    reset_rng: np.random.Generator | None = None,
    episode_returns: np.ndarray | None = None,
) -> RolloutBuffer:
    """Run the Gaussian policy for ``n_steps`` in every env.

    Envs continue from their current observation and are reset automatically when an
    episode ends, with a seed drawn from ``reset_rng`` (``rng`` when not given).

    Args:
        policy: Policy parameters (with ``log_std``).
        value: Value network parameters.
        envs: Environments, already reset.
        n_steps: Steps to take in each env.
        rng: Generator for action noise.
        reset_rng: Generator for auto-reset seeds.
        episode_returns: Running return of each env's unfinished episode; updated in
            place so partial episodes carry over between iterations.

    Returns:
        A fully populated ``RolloutBuffer``.

    Raises:
        NumericalError: On a non-finite observation or action.
    """
    if n_steps < 1 or not envs:
        raise ConfigurationError("collect needs at least one step and one env")

    reset_rng = rng if reset_rng is None else reset_rng
    n_envs = len(envs)
    obs_dim = envs[0].obs_dim
    act_dim = envs[0].action_dim
    running = np.zeros(n_envs) if episode_returns is None else episode_returns

    observations = np.zeros((n_steps, n_envs, obs_dim))
    actions = np.zeros((n_steps, n_envs, act_dim))
    logprobs = np.zeros((n_steps, n_envs))
    rewards = np.zeros((n_steps, n_envs))
    dones = np.zeros((n_steps, n_envs), dtype=bool)
    values = np.zeros((n_steps, n_envs))
    finished: list[float] = []

    obs = np.stack([env.observation for env in envs])
    for t in range(n_steps):
        if not np.all(np.isfinite(obs)):
            raise NumericalError(f"non-finite observation at step {t}: {obs}")

        dist, _ = policy_forward(policy, obs)
        noise = rng.standard_normal((n_envs, act_dim))
        action = dist.mean + dist.std * noise
        if not np.all(np.isfinite(action)):
            raise NumericalError(f"non-finite action at step {t}: {action}")

        v, _ = mlp_forward(value, obs)

        observations[t] = obs
        actions[t] = action
        logprobs[t] = gaussian_logprob(dist.mean, dist.log_std, action)
        values[t] = v[:, 0]

        next_obs = np.empty_like(obs)
        for e, env in enumerate(envs):
            result = env.step(action[e])
            rewards[t, e] = result.reward
            dones[t, e] = result.done
            running[e] += result.reward
            if result.done:
                finished.append(float(running[e]))
                running[e] = 0.0
                next_obs[e] = env.reset(draw_seed(reset_rng))
            else:
                next_obs[e] = result.next_observation
        obs = next_obs

    bootstrap, _ = mlp_forward(value, obs)

    return RolloutBuffer(
        observations=observations,
        actions=actions,
        logprobs=logprobs,
        rewards=rewards,
        dones=dones,
        values=values,
        bootstrap_value=bootstrap[:, 0],
        episode_returns=finished,
    )


def _next_values(buffer: RolloutBuffer) -> np.ndarray:
    return np.concatenate([buffer.values[1:], buffer.bootstrap_value[None, :]], axis=0)


def td_errors(buffer: RolloutBuffer, gamma: float) -> np.ndarray:
    """One-step TD residuals, masking the bootstrap after episode ends."""
    not_done = 1.0 - buffer.dones.astype(np.float64)
    return buffer.rewards + gamma * _next_values(buffer) * not_done - buffer.values


def gae(buffer: RolloutBuffer, gamma: float, lam: float) -> AdvantageBatch:
    """Generalized advantage estimates by backward recursion.

    An episode end at step ``t`` stops the accumulation, so each advantage is the
    discounted sum of TD errors up to its own episode's end or the rollout boundary.
    """
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ConfigurationError("gamma and lambda must lie in [0, 1]")

    deltas = td_errors(buffer, gamma)
    not_done = 1.0 - buffer.dones.astype(np.float64)
    advantages = np.zeros_like(deltas)
    last = np.zeros(buffer.n_envs)
    for t in reversed(range(buffer.n_steps)):
        last = deltas[t] + gamma * lam * not_done[t] * last
        advantages[t] = last

    return AdvantageBatch(
        advantages_raw=flatten(advantages), old_values=flatten(buffer.values)
    )
