"""
This module contains tests for the evaluation pipeline.
"""
from kedro.pipeline import Pipeline

from am_ppo.pipelines.evaluation.pipeline import create_pipeline


def test_evaluation_pipeline():
    pipeline = create_pipeline()
    assert isinstance(pipeline, Pipeline)
    assert [node.name for node in pipeline.nodes] == ["evaluate_policy_node"]
    assert "final_checkpoint" in pipeline.inputs()
