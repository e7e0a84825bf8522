"""
This module contains an end-to-end test of the Kedro project.
"""
from pathlib import Path

from kedro.framework.session import KedroSession
from kedro.framework.startup import bootstrap_project


class TestKedroRun:
    def test_kedro_run_success(self):
        """Test that the default pipeline trains and evaluates a small run."""
        bootstrap_project(Path.cwd())

        # Two short iterations instead of the desk profile
        extra_params = {
            "run": {
                "total_timesteps": 64,
                "num_steps": 32,
                "num_minibatches": 4,
                "update_epochs": 1,
                "hidden_sizes": [8],
            },
            "evaluation": {"episodes": 2},
        }

        with KedroSession.create(
            project_path=Path.cwd(), runtime_params=extra_params
        ) as session:
            session.run()
