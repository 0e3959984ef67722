"""Deterministic, splittable random number streams.

Every stochastic routine in the package draws from an ``RngHandle``, a thin
wrapper around a counter-based Philox generator keyed by ``(seed, stream)``.
Identical ``(seed, stream)`` pairs reproduce the same draw sequence on any
platform, and distinct streams are statistically independent, so replicates,
chains and path-sampling grid points can run concurrently from one top-level
seed.

Stream id derivation used by the orchestrator (documented contract):
``stream = replicate * 2**40 + chain * 2**20 + grid``.
"""

import numpy as np

_U64 = 1 << 64


class RngHandle:
    """A reproducible random stream keyed by (seed, stream).

    Wraps ``numpy.random.Generator`` on a Philox bit generator whose 128-bit
    key is ``seed * 2**64 + stream``. A handle is cheap to construct; build a
    fresh one per worker rather than sharing a handle across workers.
    """

    def __init__(self, seed, stream=0):
        seed = int(seed)
        stream = int(stream)
        if not (0 <= seed < _U64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not (0 <= stream < _U64):
            raise ValueError("stream must be a 64-bit unsigned integer")
        self.seed = seed
        self.stream = stream
        self._generator = np.random.Generator(
            np.random.Philox(key=(seed << 64) | stream)
        )

    @property
    def generator(self):
        """The underlying ``numpy.random.Generator``."""
        return self._generator

    def spawn(self, stream):
        """A fresh handle with the same seed but a different stream id."""
        return RngHandle(self.seed, stream)

    def __repr__(self):
        return f"RngHandle(seed={self.seed}, stream={self.stream})"


def derive_stream(replicate=0, chain=0, grid=0):
    """Stream id for (replicate, chain, grid point) per the documented layout."""
    if not (0 <= grid < 1 << 20 and 0 <= chain < 1 << 20 and 0 <= replicate < 1 << 24):
        raise ValueError("stream component out of range")
    return (replicate << 40) | (chain << 20) | grid


def as_generator(rng):
    """Accept an RngHandle or a bare numpy Generator."""
    if isinstance(rng, RngHandle):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngHandle or numpy Generator, got {type(rng)!r}")
