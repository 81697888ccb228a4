"""Named random sub-streams derived from a master seed.

Every consumer of randomness asks for its own stream by name, e.g.
``substream(seed, "fen", "direction")``. Streams are independent of each
other, so adding draws to one never shifts the values seen by another.
"""

import zlib

import numpy as np


def _name_key(name):
    if isinstance(name, (int, np.integer)):
        return int(name)
    return zlib.crc32(str(name).encode("utf-8"))


def substream(seed, *names):
    """Return a ``numpy.random.Generator`` keyed by ``(seed, *names)``."""
    key = tuple(_name_key(n) for n in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
