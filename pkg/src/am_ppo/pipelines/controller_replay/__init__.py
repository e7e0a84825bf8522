"""Controller replay pipeline.

This pipeline feeds a recorded advantage trace through the alpha controller offline.
"""

from .pipeline import create_pipeline

__all__ = ["create_pipeline"]
