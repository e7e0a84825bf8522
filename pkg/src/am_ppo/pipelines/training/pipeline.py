"""Training pipeline definition."""

from kedro.pipeline import Pipeline, node, pipeline

from .nodes import resolve_run_config, summarize_training, train_agent


def create_pipeline(**kwargs) -> Pipeline:
    """Create the training pipeline.

    This pipeline validates the run parameters, trains the agent and summarises the
    metrics log.

    Returns:
        A Kedro Pipeline object.
    """
    return pipeline(
        [
            node(
                func=resolve_run_config,
                inputs={"run_params": "params:run"},
                outputs="run_config",
                name="resolve_run_config_node",
                tags=["training"],
            ),
            node(
                func=train_agent,
                inputs={"run_config": "run_config"},
                outputs=["training_metrics", "final_checkpoint"],
                name="train_agent_node",
                tags=["training"],
            ),
            node(
                func=summarize_training,
                inputs={"metrics": "training_metrics"},
                outputs="training_summary",
                name="summarize_training_node",
                tags=["training", "reporting"],
            ),
        ],
    )
