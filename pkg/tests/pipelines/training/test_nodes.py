"""
This module contains unit tests for the training pipeline nodes.
"""
import pickle

import numpy as np
import pytest
from pydantic import ValidationError

from am_ppo.cli.schemas import RunConfig
from am_ppo.core.errors import CheckpointError
from am_ppo.pipelines.training.nodes import (
    current_learning_rate,
    initialize_run,
    make_checkpoint,
    resolve_run_config,
    restore_checkpoint,
    run_iteration,
    run_training,
    summarize_training,
    train_agent,
)

SMALL_RUN = {
    "env_id": "pointmass1d",
    "seed": 3,
    "total_timesteps": 96,
    "num_steps": 32,
    "num_minibatches": 4,
    "update_epochs": 2,
    "hidden_sizes": [8],
}


@pytest.fixture
def small_config():
    return RunConfig.model_validate(SMALL_RUN)


class TestResolveRunConfig:
    def test_fills_defaults(self):
        resolved = resolve_run_config(SMALL_RUN)
        assert resolved["clip_coef"] == 0.2
        assert resolved["kappa_shared"] == 2.0
        assert resolved["hidden_sizes"] == [8]
        assert RunConfig.model_validate(resolved) == RunConfig.model_validate(SMALL_RUN)

    def test_rejects_non_dividing_minibatches(self):
        with pytest.raises(ValidationError):
            resolve_run_config({**SMALL_RUN, "num_minibatches": 5})

    def test_rejects_unknown_env(self):
        with pytest.raises(ValidationError) as info:
            resolve_run_config({**SMALL_RUN, "env_id": "hopper"})
        assert info.value.errors()[0]["loc"] == ("env_id",)


class TestLearningRate:
    def test_linear_anneal(self, small_config):
        assert current_learning_rate(small_config, 1) == small_config.learning_rate
        assert current_learning_rate(small_config, 3) == pytest.approx(
            small_config.learning_rate / 3
        )

    def test_constant_without_anneal(self):
        config = RunConfig.model_validate({**SMALL_RUN, "anneal_lr": False})
        assert current_learning_rate(config, 3) == config.learning_rate


class TestRunIteration:
    def test_initialize_is_seeded(self, small_config):
        a = initialize_run(small_config)
        b = initialize_run(small_config)
        for name in a.policy.values:
            np.testing.assert_array_equal(a.policy.values[name], b.policy.values[name])
        np.testing.assert_array_equal(a.envs[0].observation, b.envs[0].observation)

    def test_metrics_of_first_iteration(self, small_config):
        state = initialize_run(small_config)
        record = run_iteration(state, small_config)

        assert record.iteration == 1
        assert record.global_step == 32
        # 32 steps are shorter than one episode
        assert record.mean_episodic_return is None
        assert record.episodes_completed == 0
        assert record.lr_current == small_config.learning_rate
        assert small_config.alpha_min <= record.alpha_ema <= small_config.alpha_max
        assert 0.0 <= record.sat_current <= 1.0

    def test_ppo_keeps_initial_controller(self):
        config = RunConfig.model_validate({**SMALL_RUN, "algo": "ppo"})
        state = initialize_run(config)
        records = list(run_training(state, config))
        assert all(r.alpha_ema == config.alpha_init for r in records)
        assert all(r.sat_ema == config.sat_init for r in records)

    def test_am_ppo_moves_controller(self, small_config):
        state = initialize_run(small_config)
        record = run_iteration(state, small_config)
        assert record.alpha_ema != small_config.alpha_init

    def test_runs_every_iteration(self, small_config):
        state = initialize_run(small_config)
        records = list(run_training(state, small_config))
        assert [r.iteration for r in records] == [1, 2, 3]
        assert state.global_step == 96


class TestCheckpoint:
    def test_resume_matches_uninterrupted_run(self, small_config):
        uninterrupted = initialize_run(small_config)
        expected = [run_iteration(uninterrupted, small_config) for _ in range(2)]

        state = initialize_run(small_config)
        run_iteration(state, small_config)
        restored_bytes = pickle.dumps(make_checkpoint(small_config, state))
        config, resumed = restore_checkpoint(pickle.loads(restored_bytes))

        assert config == small_config
        assert run_iteration(resumed, config) == expected[1]

    def test_checkpoint_is_a_snapshot(self, small_config):
        state = initialize_run(small_config)
        checkpoint = make_checkpoint(small_config, state)
        run_iteration(state, small_config)
        assert checkpoint["state"].iteration == 0

    @pytest.mark.parametrize(
        "obj",
        [
            "not a checkpoint",
            {"format": "something-else", "version": 1},
            {"format": "am-ppo-checkpoint", "version": 99},
            {"format": "am-ppo-checkpoint", "version": 1, "state": None},
        ],
    )
    def test_rejects_invalid_objects(self, obj):
        with pytest.raises(CheckpointError):
            restore_checkpoint(obj)


class TestTrainAgent:
    def test_returns_metrics_and_checkpoint(self, small_config):
        metrics, checkpoint = train_agent(small_config.model_dump(mode="json"))
        assert len(metrics) == 3
        assert set(metrics[0]) >= {
            "alpha_ema",
            "sat_ema",
            "sat_current",
            "entropy",
            "ratio_clip_fraction",
            "a_mod_abs_mean",
            "a_mod_std",
        }
        assert checkpoint["state"].iteration == 3

    def test_is_deterministic(self, small_config):
        first, _ = train_agent(small_config.model_dump(mode="json"))
        second, _ = train_agent(small_config.model_dump(mode="json"))
        assert first == second


class TestSummarizeTraining:
    def test_summary(self):
        metrics = [
            {
                "iteration": i,
                "global_step": 10 * i,
                "mean_episodic_return": None if i < 3 else -float(i),
                "alpha_ema": 1.0 + i,
                "sat_ema": 0.1,
                "ratio_clip_fraction": 0.5,
            }
            for i in range(1, 15)
        ]
        summary = summarize_training(metrics)
        assert summary["iterations"] == 14
        assert summary["global_step"] == 140
        assert summary["final_mean_return"] == pytest.approx(-np.mean(range(5, 15)))
        assert summary["alpha_ema_min"] == 2.0
        assert summary["alpha_ema_max"] == 15.0

    def test_empty(self):
        assert summarize_training([])["iterations"] == 0
