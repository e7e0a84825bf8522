"""Service layer between the command line and the training pipelines.

``RunService`` owns one output directory and everything written to it:

- ``config.resolved``: the validated run configuration as YAML.
- ``metrics.jsonl``: one ``MetricsRecord`` per iteration.
- ``checkpoint.final``: the last good run state.
- ``eval.json``: the evaluation summary.
- ``controller_trace.csv``: the output of a controller replay.

Every public method returns a result dict with ``status`` and ``exit_code``.
"""

import json
import logging
import pickle
import re
import time
from pathlib import Path
from typing import Any

import pandas as pd
from omegaconf import OmegaConf
from pydantic import ValidationError

from am_ppo.core.errors import CheckpointError, ConfigurationError, NumericalError
from am_ppo.pipelines.controller_replay.nodes import (
    replay_controller,
    validate_advantage_trace,
)
from am_ppo.pipelines.evaluation.nodes import evaluate_policy
from am_ppo.pipelines.training.nodes import (
    RunState,
    initialize_run,
    make_checkpoint,
    restore_checkpoint,
    run_iteration,
)

from .schemas import LOCAL_DEFAULTS, RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

CONFIG_FILE = "config.resolved"
METRICS_FILE = "metrics.jsonl"
CHECKPOINT_FILE = "checkpoint.final"
EVAL_FILE = "eval.json"
REPLAY_FILE = "controller_trace.csv"


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a YAML config holding flat run keys, either top-level or under ``run:``.

    Raises:
        ConfigurationError: If the file is missing or not a mapping.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}", field="config")
    try:
        loaded = OmegaConf.to_container(OmegaConf.load(path), resolve=True)
    except Exception as e:
        raise ConfigurationError(f"cannot parse {path}: {e}", field="config") from e

    if not isinstance(loaded, dict):
        raise ConfigurationError(f"{path} does not hold a mapping", field="config")
    run = loaded.get("run")
    return dict(run) if isinstance(run, dict) else loaded


def build_run_config(
    values: dict[str, Any], overrides: dict[str, Any] | None = None
) -> RunConfig:
    """Validate ``values`` with ``overrides`` on top.

    Raises:
        ConfigurationError: Naming the first offending field.
    """
    merged = {**values, **(overrides or {})}
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise ConfigurationError(
            f"invalid configuration{f' field {field!r}' if field else ''}: "
            f"{first['msg']}",
            field=field,
        ) from e


def dump_run_config(config: RunConfig) -> str:
    """YAML text of ``config`` with a header listing the locally chosen defaults."""
    header = [
        "# Resolved am-ppo run configuration.",
        "# Defaults not taken from the published hyperparameters:",
    ]
    header += [f"#   {name}: {why}" for name, why in LOCAL_DEFAULTS.items()]
    body = OmegaConf.to_yaml(OmegaConf.create(config.model_dump(mode="json")))
    return "\n".join(header) + "\n" + body


def save_checkpoint(checkpoint: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        pickle.dump(checkpoint, f)


def load_checkpoint(path: str | Path) -> dict:
    """Unpickle a checkpoint file.

    Raises:
        CheckpointError: If the file is missing or cannot be unpickled.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with open(path, "rb") as f:
            return pickle.load(f)
    except (
        pickle.UnpicklingError,
        EOFError,
        AttributeError,
        ImportError,
        TypeError,
        ValueError,
    ) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e


def read_advantage_trace(path: str | Path) -> pd.DataFrame:
    """Read a trace CSV keeping every cell as text.

    Raises:
        ConfigurationError: If the file is missing or not parseable as CSV; ``line``
            is set when the parser reports one.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"trace file not found: {path}", field="trace")
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise ConfigurationError(f"trace file {path} is empty", line=1) from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line = int(match.group(1)) if match else None
        raise ConfigurationError(f"malformed trace file {path}: {e}", line=line) from e


def _error_result(e: Exception, exit_code: int) -> dict[str, Any]:
    location = ""
    if isinstance(e, ConfigurationError):
        if e.field:
            location = f" (field: {e.field})"
        elif e.line:
            location = f" (line: {e.line})"
    message = f"{e}{location}"
    logger.error(message)
    return {"status": "error", "exit_code": exit_code, "message": message}


class RunService:
    """Runs training, evaluation and controller replay against one output directory."""

    def __init__(self, out_dir: str | Path):
        """Initialize the run service.

        Args:
            out_dir: Directory all artifacts are written to.
        """
        self.out_dir = Path(out_dir)

    @property
    def metrics_path(self) -> Path:
        return self.out_dir / METRICS_FILE

    @property
    def checkpoint_path(self) -> Path:
        return self.out_dir / CHECKPOINT_FILE

    def write_config(self, config: RunConfig) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / CONFIG_FILE
        path.write_text(dump_run_config(config), encoding="utf-8")
        return path

    def train(
        self, config: RunConfig, stop_after_iterations: int | None = None
    ) -> dict[str, Any]:
        """Train from scratch until ``config.total_timesteps`` and write every artifact.

        Args:
            config: Validated run configuration.
            stop_after_iterations: Checkpoint and stop after this many iterations.
                The learning-rate schedule still spans ``config.total_timesteps``,
                so resuming the checkpoint continues the uninterrupted run.

        Returns:
            Result dict; ``exit_code`` is 2 for configuration errors and 3 for a
            numeric abort, in which case the last good state is checkpointed.
        """
        try:
            state = initialize_run(config)
        except ConfigurationError as e:
            return _error_result(e, EXIT_CONFIG)
        return self._run(config, state, append=False, stop_after=stop_after_iterations)

    def resume(
        self,
        checkpoint_path: str | Path,
        total_timesteps: int | None = None,
        stop_after_iterations: int | None = None,
    ) -> dict[str, Any]:
        """Continue a run from a checkpoint.

        The stored config is authoritative except for ``total_timesteps`` and the
        output directory. Metrics are appended to ``metrics.jsonl``. Changing
        ``total_timesteps`` moves the end of the learning-rate schedule.
        """
        try:
            stored, state = restore_checkpoint(load_checkpoint(checkpoint_path))
            overrides: dict[str, Any] = {"out_dir": str(self.out_dir)}
            if total_timesteps is not None:
                overrides["total_timesteps"] = total_timesteps
            config = build_run_config(stored.model_dump(mode="json"), overrides)
        except (ConfigurationError, CheckpointError) as e:
            return _error_result(e, EXIT_CONFIG)

        if config.anneal_lr and config.num_iterations != stored.num_iterations:
            logger.warning(
                f"Annealing horizon changes from {stored.num_iterations} to "
                f"{config.num_iterations} iterations; the resumed run will not match "
                f"an uninterrupted run of either length"
            )
        logger.info(f"Resuming from {checkpoint_path} at iteration {state.iteration}")
        return self._run(config, state, append=True, stop_after=stop_after_iterations)

    def _run(
        self,
        config: RunConfig,
        state: RunState,
        append: bool,
        stop_after: int | None = None,
    ) -> dict[str, Any]:
        start_time = time.time()
        self.write_config(config)
        last_good = make_checkpoint(config, state)
        end = config.num_iterations
        if stop_after is not None:
            end = min(end, state.iteration + stop_after)

        mode = "a" if append else "w"
        try:
            with open(self.metrics_path, mode, encoding="utf-8", newline="\n") as f:
                while state.iteration < end:
                    record = run_iteration(state, config)
                    f.write(json.dumps(record.model_dump()) + "\n")
                    f.flush()
                    last_good = make_checkpoint(config, state)
        except NumericalError as e:
            save_checkpoint(last_good, self.checkpoint_path)
            result = _error_result(e, EXIT_NUMERIC)
            result["iterations"] = last_good["state"].iteration
            return result

        save_checkpoint(last_good, self.checkpoint_path)
        duration = time.time() - start_time
        logger.info(f"Run written to {self.out_dir} in {duration:.1f}s")
        return {
            "status": "success",
            "exit_code": EXIT_OK,
            "message": f"Trained {state.iteration} iterations",
            "iterations": state.iteration,
            "global_step": state.global_step,
            "duration_seconds": round(duration, 2),
        }

    def evaluate(
        self, checkpoint_path: str | Path, episodes: int, seed: int
    ) -> dict[str, Any]:
        """Evaluate a checkpoint and write ``eval.json``."""
        try:
            summary = evaluate_policy(load_checkpoint(checkpoint_path), episodes, seed)
        except (ConfigurationError, CheckpointError) as e:
            return _error_result(e, EXIT_CONFIG)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / EVAL_FILE).write_text(
            json.dumps(summary, indent=2) + "\n", encoding="utf-8"
        )
        return {"status": "success", "exit_code": EXIT_OK, "summary": summary}

    def replay(self, trace_path: str | Path, config: RunConfig) -> dict[str, Any]:
        """Replay a trace through the controller and write ``controller_trace.csv``."""
        try:
            trace = validate_advantage_trace(read_advantage_trace(trace_path))
        except ConfigurationError as e:
            return _error_result(e, EXIT_CONFIG)

        replayed = replay_controller(trace, config.model_dump(mode="json"))
        self.out_dir.mkdir(parents=True, exist_ok=True)
        output_path = self.out_dir / REPLAY_FILE
        replayed.to_csv(output_path, index=False, lineterminator="\n")
        return {
            "status": "success",
            "exit_code": EXIT_OK,
            "message": f"Replayed {len(replayed)} iterations to {output_path}",
            "output_path": str(output_path),
        }
