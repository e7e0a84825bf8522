"""Controller replay pipeline definition."""

from kedro.pipeline import Pipeline, node, pipeline

from .nodes import replay_controller, validate_advantage_trace


def create_pipeline(**kwargs) -> Pipeline:
    """Create the controller replay pipeline.

    Returns:
        A Kedro Pipeline object.
    """
    return pipeline(
        [
            node(
                func=validate_advantage_trace,
                inputs={"trace": "advantage_trace"},
                outputs="validated_advantage_trace",
                name="validate_advantage_trace_node",
                tags=["replay"],
            ),
            node(
                func=replay_controller,
                inputs={
                    "trace": "validated_advantage_trace",
                    "run_params": "params:run",
                },
                outputs="controller_trace",
                name="replay_controller_node",
                tags=["replay"],
            ),
        ],
    )
