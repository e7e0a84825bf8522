"""Nodes for the training pipeline.

This module owns the run state of one training run and the outer loop that drives the
core modules: collect, advantage estimation, controller update (AM-PPO only) and the
optimisation epochs.
"""

import copy
import logging
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import ValidationError

from am_ppo.cli.schemas import RunConfig
from am_ppo.core.envs import PointMassEnv, make_env
from am_ppo.core.errors import CheckpointError
from am_ppo.core.modulation import ControllerState, update_controller
from am_ppo.core.numcore import ParamSet, init_mlp
from am_ppo.core.rollout import collect, gae
from am_ppo.core.seeding import RunStreams, draw_seed
from am_ppo.core.update import MetricsRecord, run_update

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "am-ppo-checkpoint"
CHECKPOINT_VERSION = 1

POLICY_OUTPUT_GAIN = 0.01
SUMMARY_WINDOW = 10


@dataclass
class RunState:
    """Everything a run needs to continue bit-exactly from where it stopped."""

    policy: ParamSet
    value: ParamSet
    controller: ControllerState
    envs: list[PointMassEnv]
    streams: RunStreams
    episode_returns: np.ndarray
    iteration: int = 0
    global_step: int = 0


def resolve_run_config(run_params: dict[str, Any]) -> dict[str, Any]:
    """Validate the ``run`` parameter group.

    Args:
        run_params: Flat run parameters.

    Returns:
        The validated configuration with every default filled in.
    """
    config = RunConfig.model_validate(run_params)
    logger.info(
        f"Resolved run: algo={config.algo} env={config.env_id} seed={config.seed} "
        f"iterations={config.num_iterations} batch={config.batch_size}"
    )
    return config.model_dump(mode="json")


def initialize_run(config: RunConfig) -> RunState:
    """Build fresh networks, environments and controller state from ``config.seed``."""
    streams = RunStreams.from_seed(config.seed)
    envs = [make_env(config.env_id) for _ in range(config.num_envs)]
    for env in envs:
        env.reset(draw_seed(streams.reset))

    obs_dim, act_dim = envs[0].obs_dim, envs[0].action_dim
    hidden = list(config.hidden_sizes)
    policy = init_mlp(
        [obs_dim, *hidden, act_dim],
        streams.init,
        output_gain=POLICY_OUTPUT_GAIN,
        log_std_dim=act_dim,
    )
    value = init_mlp([obs_dim, *hidden, 1], streams.init)

    return RunState(
        policy=policy,
        value=value,
        controller=ControllerState.initial(config.modulation_config()),
        envs=envs,
        streams=streams,
        episode_returns=np.zeros(config.num_envs),
    )


def current_learning_rate(config: RunConfig, iteration: int) -> float:
    """Linear decay to zero over the run when ``anneal_lr`` is set."""
    if not config.anneal_lr:
        return config.learning_rate
    frac = 1.0 - (iteration - 1) / config.num_iterations
    return frac * config.learning_rate


def run_iteration(state: RunState, config: RunConfig) -> MetricsRecord:
    """Advance ``state`` by one iteration in place and return its diagnostics.

    Raises:
        NumericalError: If any stage produces a non-finite value. ``state`` is then
            partially updated and should be discarded.
    """
    iteration = state.iteration + 1
    lr = current_learning_rate(config, iteration)
    mod_cfg = config.modulation_config()

    buffer = collect(
        state.policy,
        state.value,
        state.envs,
        config.num_steps,
        state.streams.action,
        reset_rng=state.streams.reset,
        episode_returns=state.episode_returns,
    )
    advantages = gae(buffer, config.gamma, config.gae_lambda)
    if config.algo == "am_ppo":
        state.controller = update_controller(
            state.controller, advantages.advantages_raw, mod_cfg
        )

    result = run_update(
        buffer,
        advantages,
        state.controller,
        state.policy,
        state.value,
        config.update_config(),
        mod_cfg,
        state.streams.shuffle,
        lr=lr,
    )

    state.iteration = iteration
    state.global_step += buffer.batch_size
    finished = buffer.episode_returns

    record = MetricsRecord(
        iteration=iteration,
        global_step=state.global_step,
        mean_episodic_return=float(np.mean(finished)) if finished else None,
        policy_loss=result.policy_loss,
        value_loss=result.value_loss,
        entropy=result.entropy,
        alpha_ema=state.controller.alpha_ema,
        sat_ema=state.controller.sat_ema,
        sat_current=state.controller.sat_current,
        a_mod_abs_mean=result.a_mod_abs_mean,
        a_mod_std=result.a_mod_std,
        ratio_clip_fraction=result.clip_fraction,
        grad_norm_preclip=result.grad_norm_preclip,
        lr_current=lr,
        approx_kl=result.approx_kl,
        explained_variance=result.explained_variance,
        episodes_completed=len(finished),
    )
    mean_return = (
        f"{record.mean_episodic_return:.3f}"
        if record.mean_episodic_return is not None
        else "n/a"
    )
    logger.info(
        f"Iteration {iteration}/{config.num_iterations} step={state.global_step} "
        f"return={mean_return} alpha_ema={record.alpha_ema:.4g} "
        f"sat_ema={record.sat_ema:.3f} clip_frac={record.ratio_clip_fraction:.3f}"
    )
    return record


def run_training(state: RunState, config: RunConfig) -> Iterator[MetricsRecord]:
    """Yield one record per iteration until ``config.num_iterations`` is reached."""
    while state.iteration < config.num_iterations:
        yield run_iteration(state, config)


def make_checkpoint(config: RunConfig, state: RunState) -> dict[str, Any]:
    """Self-describing checkpoint object; the state is deep-copied."""
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config.model_dump(mode="json"),
        "state": copy.deepcopy(state),
    }


def restore_checkpoint(checkpoint: Any) -> tuple[RunConfig, RunState]:
    """Unpack a checkpoint object into its config and a private copy of its state.

    Raises:
        CheckpointError: If the object is not a checkpoint of a known version.
    """
    if not isinstance(checkpoint, dict) or checkpoint.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("object is not an am-ppo checkpoint")
    if checkpoint.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {checkpoint.get('version')!r}"
        )
    state = checkpoint.get("state")
    if not isinstance(state, RunState):
        raise CheckpointError("checkpoint carries no run state")
    try:
        config = RunConfig.model_validate(checkpoint.get("config"))
    except ValidationError as e:
        raise CheckpointError(f"checkpoint config is invalid: {e}") from e
    return config, copy.deepcopy(state)


def train_agent(run_config: dict[str, Any]) -> tuple[list[dict[str, Any]], dict]:
    """Train from scratch.

    Args:
        run_config: Resolved run configuration.

    Returns:
        Tuple of (metrics records as dicts, final checkpoint).
    """
    config = RunConfig.model_validate(run_config)
    state = initialize_run(config)
    logger.info(f"Training {config.algo} on {config.env_id} with seed {config.seed}")

    metrics = [record.model_dump() for record in run_training(state, config)]

    logger.info(f"Training finished after {state.iteration} iterations")
    return metrics, make_checkpoint(config, state)


def summarize_training(metrics: list[dict[str, Any]]) -> dict[str, Any]:
    """Condense the metrics log for reports.

    The final return is the mean over the last ``SUMMARY_WINDOW`` iterations that saw
    at least one finished episode.
    """
    if not metrics:
        return {"iterations": 0, "global_step": 0, "final_mean_return": None}

    returns = [
        m["mean_episodic_return"]
        for m in metrics
        if m["mean_episodic_return"] is not None
    ]
    tail = returns[-SUMMARY_WINDOW:]
    alphas = [m["alpha_ema"] for m in metrics]

    summary = {
        "iterations": len(metrics),
        "global_step": metrics[-1]["global_step"],
        "final_mean_return": float(np.mean(tail)) if tail else None,
        "alpha_ema_min": float(min(alphas)),
        "alpha_ema_max": float(max(alphas)),
        "final_alpha_ema": metrics[-1]["alpha_ema"],
        "final_sat_ema": metrics[-1]["sat_ema"],
        "mean_ratio_clip_fraction": float(
            np.mean([m["ratio_clip_fraction"] for m in metrics])
        ),
    }
    logger.info(f"Training summary: {summary}")
    return summary
