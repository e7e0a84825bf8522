"""Training pipeline.

This pipeline resolves the run configuration and trains a policy with PPO or AM-PPO.
"""

from .pipeline import create_pipeline

__all__ = ["create_pipeline"]
