"""
This module contains unit tests for the controller replay pipeline nodes.
"""
import math

import numpy as np
import pandas as pd
import pytest

from am_ppo.core.errors import ConfigurationError
from am_ppo.core.modulation import (
    ControllerState,
    ModulationConfig,
    modulate_minibatch,
    update_controller,
)
from am_ppo.pipelines.controller_replay.nodes import (
    REPLAY_COLUMNS,
    replay_controller,
    validate_advantage_trace,
)


def raw_trace(rows):
    """Trace as the CSV reader hands it over: every cell a string."""
    return pd.DataFrame(
        [[str(i), str(v)] for i, v in rows], columns=["iteration", "value"]
    )


def repeated_group(group, iterations):
    return raw_trace([(i, v) for i in range(iterations) for v in group])


class TestValidateAdvantageTrace:
    def test_types_columns(self):
        trace = validate_advantage_trace(raw_trace([(0, 1.5), (0, -2), (1, 0.25)]))
        assert trace["iteration"].tolist() == [0, 0, 1]
        assert trace["value"].tolist() == [1.5, -2.0, 0.25]

    @pytest.mark.parametrize(
        "rows, line",
        [
            ([(0, 1.0), (0, "abc")], 3),
            ([(0, 1.0), ("x", 2.0), (1, 1.0)], 3),
            ([(0, 1.0), (1, 1.0), (2, "nan")], 4),
            ([(0, 1.0), (0, "inf")], 3),
            ([(0.5, 1.0)], 2),
        ],
    )
    def test_malformed_rows_report_line(self, rows, line):
        with pytest.raises(ConfigurationError) as info:
            validate_advantage_trace(raw_trace(rows))
        assert info.value.line == line

    def test_non_contiguous_iteration(self):
        with pytest.raises(ConfigurationError) as info:
            validate_advantage_trace(raw_trace([(0, 1.0), (1, 1.0), (0, 2.0)]))
        assert info.value.line == 4

    def test_wrong_header(self):
        trace = pd.DataFrame({"step": ["0"], "value": ["1.0"]})
        with pytest.raises(ConfigurationError) as info:
            validate_advantage_trace(trace)
        assert info.value.line == 1


class TestReplayController:
    def test_zero_groups_keep_initial_state(self):
        trace = validate_advantage_trace(repeated_group([0.0, 0.0, 0.0], 5))
        replayed = replay_controller(trace, {})

        assert list(replayed.columns) == REPLAY_COLUMNS
        assert replayed["alpha_ema"].tolist() == [1.0] * 5
        assert replayed["sat_ema"].tolist() == [0.1] * 5
        assert replayed["mean_abs_a_mod"].tolist() == [0.0] * 5

    def test_single_group_matches_controller(self):
        group = [1.0, -1.0, 2.0, -2.0]
        trace = validate_advantage_trace(repeated_group(group, 1))
        row = replay_controller(trace, {}).iloc[0]

        cfg = ModulationConfig()
        a = np.array(group)
        state = update_controller(ControllerState.initial(cfg), a, cfg)
        a_mod = modulate_minibatch(a, state.frozen_alpha, cfg)
        assert row["iteration"] == 0
        assert row["alpha_ema"] == state.alpha_ema
        assert row["sat_current"] == state.sat_current
        assert row["sat_ema"] == state.sat_ema
        assert row["mean_abs_a_mod"] == pytest.approx(np.mean(np.abs(a_mod)))

    def test_repeated_group_reaches_fixed_point(self):
        group = [1.0, -1.0, 2.0, -2.0]
        replayed = replay_controller(
            validate_advantage_trace(repeated_group(group, 500)), {}
        )

        # the two larger entries saturate at the fixed point, so sat -> 0.5
        norm = math.sqrt(10.0)
        sigma = float(np.std(group, ddof=1)) + 1e-5
        fixed_point = 2.0 * (norm + 1e-5) / sigma * (0.1 / (0.5 + 1e-5)) ** 0.3
        assert replayed["alpha_ema"].iloc[-1] == pytest.approx(fixed_point, abs=1e-6)
        assert replayed["sat_current"].iloc[-1] == 0.5

    def test_modulation_parameters_are_used(self):
        trace = validate_advantage_trace(repeated_group([1.0, -3.0], 3))
        default = replay_controller(trace, {})
        tuned = replay_controller(trace, {"rho_alpha": 0.5})
        assert default["alpha_ema"].iloc[0] != tuned["alpha_ema"].iloc[0]
