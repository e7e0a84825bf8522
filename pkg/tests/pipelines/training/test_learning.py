"""
Desk-scale learning checks on the point-mass task. Deselected by default; run with
``pytest -m slow``.
"""
from pathlib import Path

import pytest
from omegaconf import OmegaConf

from am_ppo.pipelines.evaluation.nodes import random_policy_return
from am_ppo.pipelines.training.nodes import summarize_training, train_agent

DESK_PARAMETERS = Path(__file__).parents[3] / "conf" / "base" / "parameters.yml"


@pytest.fixture(scope="module")
def random_baseline():
    return random_policy_return("pointmass1d", episodes=20, seed=0)


@pytest.mark.slow
class TestDeskProfileLearning:
    @pytest.mark.parametrize("algo", ["ppo", "am_ppo"])
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_closes_half_the_gap_to_zero(self, algo, seed, random_baseline):
        run = OmegaConf.to_container(OmegaConf.load(DESK_PARAMETERS))["run"]
        run.update(algo=algo, seed=seed)

        metrics, _ = train_agent(run)
        final_return = summarize_training(metrics)["final_mean_return"]

        assert random_baseline < 0.0
        assert final_return is not None
        assert final_return >= 0.5 * random_baseline
