"""Nodes for the controller replay pipeline.

A trace is a CSV with header ``iteration,value``: one raw advantage per row, rows of the
same iteration contiguous. Each iteration's group goes through the controller update and
then through the gate as a single minibatch.
"""

import logging
from typing import Any

import numpy as np
import pandas as pd

from am_ppo.cli.schemas import RunConfig
from am_ppo.core.errors import ConfigurationError
from am_ppo.core.modulation import ControllerState, modulate_minibatch, update_controller

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["iteration", "value"]
REPLAY_COLUMNS = ["iteration", "alpha_ema", "sat_current", "sat_ema", "mean_abs_a_mod"]


def validate_advantage_trace(trace: pd.DataFrame) -> pd.DataFrame:
    """Check and type a raw advantage trace.

    Args:
        trace: Trace as read from CSV; cells may still be strings.

    Returns:
        Trace with an integer ``iteration`` and a float ``value`` column.

    Raises:
        ConfigurationError: On a wrong header, an unparsable or non-finite cell, or
            an iteration group that is not contiguous. ``line`` is the 1-based line in
            the CSV file (the header is line 1).
    """
    if list(trace.columns) != TRACE_COLUMNS:
        raise ConfigurationError(
            f"trace header must be {','.join(TRACE_COLUMNS)}, "
            f"got {','.join(map(str, trace.columns))}",
            line=1,
        )
    if trace.empty:
        raise ConfigurationError("trace holds no rows", line=2)

    iterations = pd.to_numeric(trace["iteration"], errors="coerce")
    values = pd.to_numeric(trace["value"], errors="coerce")

    bad_iteration = iterations.isna() | (iterations != np.floor(iterations))
    bad_value = ~np.isfinite(values.to_numpy(dtype=np.float64))
    bad = bad_iteration.to_numpy() | bad_value
    if bad.any():
        position = int(np.argmax(bad))
        row = trace.iloc[position]
        raise ConfigurationError(
            f"malformed trace row {row['iteration']!r},{row['value']!r}",
            line=position + 2,
        )

    iterations = iterations.astype(np.int64)
    seen: set[int] = set()
    previous = None
    for position, iteration in enumerate(iterations.to_numpy()):
        if iteration != previous:
            if iteration in seen:
                raise ConfigurationError(
                    f"rows of iteration {iteration} are not contiguous",
                    line=position + 2,
                )
            seen.add(iteration)
            previous = iteration

    logger.info(f"Validated trace with {len(trace)} rows in {len(seen)} iterations")
    return pd.DataFrame(
        {"iteration": iterations.to_numpy(), "value": values.to_numpy(np.float64)}
    )


def replay_controller(trace: pd.DataFrame, run_params: dict[str, Any]) -> pd.DataFrame:
    """Feed every iteration group of ``trace`` through the controller and the gate.

    Args:
        trace: Validated trace.
        run_params: Run parameters; only the modulation fields are used.

    Returns:
        One row per iteration in order of appearance.
    """
    cfg = RunConfig.model_validate(run_params).modulation_config()
    state = ControllerState.initial(cfg)

    rows = []
    for iteration, group in trace.groupby("iteration", sort=False):
        a = group["value"].to_numpy(dtype=np.float64)
        state = update_controller(state, a, cfg)
        a_mod = modulate_minibatch(a, state.frozen_alpha, cfg)
        rows.append(
            {
                "iteration": int(iteration),
                "alpha_ema": state.alpha_ema,
                "sat_current": state.sat_current,
                "sat_ema": state.sat_ema,
                "mean_abs_a_mod": float(np.mean(np.abs(a_mod))),
            }
        )

    logger.info(
        f"Replayed {len(rows)} iterations, final alpha_ema={state.alpha_ema:.6g}"
    )
    return pd.DataFrame(rows, columns=REPLAY_COLUMNS)
