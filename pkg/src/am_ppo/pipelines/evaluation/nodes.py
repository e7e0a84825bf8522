"""Nodes for the evaluation pipeline.

This module runs the deterministic policy (action = mean) of a checkpoint and the
uniform-random baseline that learning results are compared against.
"""

import logging
from typing import Any

import numpy as np

from am_ppo.cli.schemas import EvalSummary
from am_ppo.core.envs import make_env
from am_ppo.core.errors import ConfigurationError
from am_ppo.core.numcore import ParamSet, policy_forward
from am_ppo.pipelines.training.nodes import restore_checkpoint

logger = logging.getLogger(__name__)


def eval_reset_seeds(seed: int, episodes: int) -> list[int]:
    """Reset seeds of the evaluation episodes, derived from ``seed`` alone."""
    rng = np.random.default_rng(seed)
    return [int(s) for s in rng.integers(0, 2**31 - 1, size=episodes)]


def _check_episodes(episodes: int) -> None:
    if episodes < 1:
        raise ConfigurationError(
            f"episodes must be at least 1, got {episodes}", field="episodes"
        )


def run_deterministic_episode(policy: ParamSet, env_id: str, seed: int) -> float:
    """Return of one episode where every action is the policy mean."""
    env = make_env(env_id)
    obs = env.reset(seed)
    total = 0.0
    while True:
        dist, _ = policy_forward(policy, obs)
        result = env.step(dist.mean)
        total += result.reward
        if result.done:
            return total
        obs = result.next_observation


def evaluate_policy(checkpoint: dict, episodes: int, seed: int) -> dict[str, Any]:
    """Evaluate the deterministic policy of ``checkpoint``.

    Args:
        checkpoint: Checkpoint object written by the training pipeline.
        episodes: Number of episodes to run.
        seed: Seed the per-episode reset seeds are derived from.

    Returns:
        Evaluation summary as a dict.

    Raises:
        ConfigurationError: If ``episodes`` is below 1.
        CheckpointError: If ``checkpoint`` is not a valid checkpoint.
    """
    _check_episodes(episodes)
    config, state = restore_checkpoint(checkpoint)

    returns = [
        run_deterministic_episode(state.policy, config.env_id, reset_seed)
        for reset_seed in eval_reset_seeds(seed, episodes)
    ]
    summary = EvalSummary(
        env_id=config.env_id,
        algo=config.algo,
        iteration=state.iteration,
        episodes=episodes,
        seed=seed,
        mean_return=float(np.mean(returns)),
        std_return=float(np.std(returns)),
        returns=returns,
    )
    logger.info(
        f"Evaluated {episodes} episodes: mean_return={summary.mean_return:.3f} "
        f"std_return={summary.std_return:.3f}"
    )
    return summary.model_dump()


def random_policy_return(env_id: str, episodes: int, seed: int) -> float:
    """Mean return of actions drawn uniformly from [-1, 1].

    Reset seeds follow ``eval_reset_seeds``; action noise comes from a separate child
    of ``seed``.
    """
    _check_episodes(episodes)
    action_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    returns = []
    for reset_seed in eval_reset_seeds(seed, episodes):
        env = make_env(env_id)
        env.reset(reset_seed)
        total = 0.0
        done = False
        while not done:
            result = env.step(action_rng.uniform(-1.0, 1.0, size=env.action_dim))
            total += result.reward
            done = result.done
        returns.append(total)

    mean_return = float(np.mean(returns))
    logger.info(f"Random-policy baseline on {env_id}: {mean_return:.3f}")
    return mean_return
