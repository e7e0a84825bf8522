"""Evaluation pipeline definition."""

from kedro.pipeline import Pipeline, node, pipeline

from .nodes import evaluate_policy


def create_pipeline(**kwargs) -> Pipeline:
    """Create the evaluation pipeline.

    This pipeline evaluates the deterministic policy of the final checkpoint.

    Returns:
        A Kedro Pipeline object.
    """
    return pipeline(
        [
            node(
                func=evaluate_policy,
                inputs={
                    "checkpoint": "final_checkpoint",
                    "episodes": "params:evaluation.episodes",
                    "seed": "params:evaluation.seed",
                },
                outputs="evaluation_summary",
                name="evaluate_policy_node",
                tags=["evaluation"],
            ),
        ],
    )
