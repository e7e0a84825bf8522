"""
This module contains unit tests for the evaluation pipeline nodes.
"""
import numpy as np
import pytest

from am_ppo.cli.schemas import RunConfig
from am_ppo.core.envs import reset
from am_ppo.core.errors import CheckpointError, ConfigurationError
from am_ppo.pipelines.evaluation.nodes import (
    eval_reset_seeds,
    evaluate_policy,
    random_policy_return,
)
from am_ppo.pipelines.training.nodes import initialize_run, make_checkpoint


@pytest.fixture
def config():
    return RunConfig(
        total_timesteps=32, num_steps=32, num_minibatches=4, hidden_sizes=(8,)
    )


@pytest.fixture
def zero_policy_checkpoint(config):
    state = initialize_run(config)
    for array in state.policy.values.values():
        array[...] = 0.0
    return make_checkpoint(config, state)


def zero_action_return(env_id, seed):
    env, _ = reset(env_id, seed)
    total, done = 0.0, False
    while not done:
        result = env.step(np.zeros(env.action_dim))
        total += result.reward
        done = result.done
    return total


class TestEvalResetSeeds:
    def test_derived_from_seed_only(self):
        assert eval_reset_seeds(4, 5) == eval_reset_seeds(4, 5)
        assert eval_reset_seeds(4, 5)[:3] == eval_reset_seeds(4, 3)
        assert eval_reset_seeds(4, 5) != eval_reset_seeds(5, 5)


class TestEvaluatePolicy:
    def test_zero_policy_equals_zero_action_rollouts(self, zero_policy_checkpoint):
        summary = evaluate_policy(zero_policy_checkpoint, episodes=4, seed=21)
        expected = [
            zero_action_return("pointmass1d", s) for s in eval_reset_seeds(21, 4)
        ]
        assert summary["returns"] == pytest.approx(expected, abs=1e-12)
        assert summary["mean_return"] == pytest.approx(np.mean(expected), abs=1e-12)
        assert summary["std_return"] == pytest.approx(np.std(expected), abs=1e-12)
        assert summary["episodes"] == 4
        assert summary["iteration"] == 0

    def test_same_checkpoint_and_seed_give_same_summary(self, config):
        checkpoint = make_checkpoint(config, initialize_run(config))
        assert evaluate_policy(checkpoint, 3, 1) == evaluate_policy(checkpoint, 3, 1)

    def test_zero_episodes(self, zero_policy_checkpoint):
        with pytest.raises(ConfigurationError) as info:
            evaluate_policy(zero_policy_checkpoint, episodes=0, seed=0)
        assert info.value.field == "episodes"

    def test_invalid_checkpoint(self):
        with pytest.raises(CheckpointError):
            evaluate_policy({"format": "unknown"}, episodes=1, seed=0)


class TestRandomPolicyReturn:
    def test_deterministic_and_negative(self):
        first = random_policy_return("pointmass1d", 3, seed=8)
        assert first == random_policy_return("pointmass1d", 3, seed=8)
        assert first < 0.0

    def test_zero_episodes(self):
        with pytest.raises(ConfigurationError):
            random_policy_return("pointmass1d", 0, seed=0)
