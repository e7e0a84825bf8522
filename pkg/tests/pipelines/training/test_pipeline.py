"""
This module contains tests for the training pipeline.
"""
from kedro.pipeline import Pipeline

from am_ppo.pipelines.training.pipeline import create_pipeline


def test_training_pipeline():
    pipeline = create_pipeline()
    assert isinstance(pipeline, Pipeline)
    assert len(pipeline.nodes) == 3

    node_names = [node.name for node in pipeline.nodes]
    assert "resolve_run_config_node" in node_names
    assert "train_agent_node" in node_names
    assert "summarize_training_node" in node_names
    assert pipeline.outputs() == {"training_summary", "final_checkpoint"}
