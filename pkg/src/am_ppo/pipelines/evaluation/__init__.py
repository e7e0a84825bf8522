"""Evaluation pipeline.

This pipeline runs the deterministic policy of the final checkpoint.
"""

from .pipeline import create_pipeline

__all__ = ["create_pipeline"]
