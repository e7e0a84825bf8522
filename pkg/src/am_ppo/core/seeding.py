"""Named random streams for one training run.

Every run owns one ``numpy.random.SeedSequence`` built from its seed. It is split into
independent child streams, one per consumer, so that adding draws to one consumer
never shifts the numbers another consumer sees.
"""

from dataclasses import dataclass

import numpy as np

STREAM_NAMES = ("init", "reset", "action", "shuffle")


@dataclass
class RunStreams:
    """Independent generators for parameter init, env resets, sampling and shuffling."""

    init: np.random.Generator
    reset: np.random.Generator
    action: np.random.Generator
    shuffle: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RunStreams":
        children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
        generators = {
            name: np.random.default_rng(child)
            for name, child in zip(STREAM_NAMES, children, strict=True)
        }
        return cls(**generators)


def draw_seed(rng: np.random.Generator) -> int:
    """Draw a reset seed for an environment from ``rng``."""
    return int(rng.integers(0, 2**31 - 1))
