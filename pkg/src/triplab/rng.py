"""Seedable random streams with a documented splitting scheme.

Every source of randomness in the toolkit draws from a named substream of a
single master seed.  A substream is addressed by a scope path, e.g.
``substream(seed, "points")`` or ``substream(seed, "embed", restart_index)``.
Scope elements are hashed (CRC-32 of their string form) into a
``numpy.random.SeedSequence`` spawn key, so the same ``(seed, scope)`` always
yields the same PCG64 stream and distinct scopes yield independent streams.

Conventional scope names used across the package:

- ``"points"``    point-cloud sampling (oracle)
- ``"triplets"``  triplet subsampling (sampling)
- ``"noise"``     answer flips (oracle)
- ``"shuffle"``   presentation / session order (sampling, service)
- ``"embed"``     embedding initialization, one level deeper per restart
- ``"eval"``      test-triplet subsampling (evaluation)
- ``"run"``       per-run seeds of the experiment harness
"""

from __future__ import annotations

import zlib

import numpy as np


def _spawn_key(scope: tuple[str | int, ...]) -> tuple[int, ...]:
    return tuple(zlib.crc32(str(part).encode("utf-8")) for part in scope)


def substream(seed: int, *scope: str | int) -> np.random.Generator:
    """Return the generator for the given scope path under a master seed."""
    seq = np.random.SeedSequence(seed, spawn_key=_spawn_key(scope))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed: int, *scope: str | int) -> int:
    """Derive a child integer seed, for APIs that take a seed rather than a stream."""
    seq = np.random.SeedSequence(seed, spawn_key=_spawn_key(scope))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
