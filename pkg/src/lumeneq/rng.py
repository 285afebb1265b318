"""Named, splittable random streams derived from one master seed.

Each stage of the pipeline (bit generation, receiver noise, weight init,
dropout, epoch shuffling, ...) draws from its own stream so that changing
one stage never perturbs the draws of another.
"""

import zlib

import numpy as np


def stream(seed, name, *indices):
    """Return an independent ``numpy.random.Generator`` for a named stage.

    The stream is a pure function of ``(seed, name, indices)``.  ``indices``
    lets callers split further, e.g. one stream per sweep point:
    ``stream(seed, "noise", snr_index)``.
    """
    if not isinstance(name, str) or not name:
        raise ValueError("stream name must be a non-empty string")
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    entropy.extend(int(i) & 0xFFFFFFFFFFFFFFFF for i in indices)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed, name, *indices):
    """Derive a 63-bit integer sub-seed for the named stage.

    Used where a whole new master seed is needed (e.g. the fresh test
    stream of a sweep point) rather than a Generator.
    """
    return int(stream(seed, name, *indices).integers(0, 2**63 - 1))
