"""
Deterministic random substreams.

Every stream is a Philox generator keyed by (master seed, *keys), so the
numbers drawn for one purpose never depend on how many were drawn for another
or on which worker thread asked first.
"""

from enum import IntEnum

import numpy as np


class StreamTag(IntEnum):
    """Purpose of a substream; part of its key."""

    TRUTH = 1
    PRIOR = 2
    CLUTTER = 3
    BOUNDS = 4
    POLICY = 5
    STATES = 6


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the given master seed and key path."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))
