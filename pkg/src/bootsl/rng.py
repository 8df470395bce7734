"""Named, splittable random streams derived from one master seed.

Plan generation, simulators and samplers each own an independent stream so
that reusing a plan or rerunning a component reproduces its output exactly.
Streams are addressed by a path of names and integers, e.g.
``substream(seed, "mcmc", chain_index)``.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream", "spawn_seed"]


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream keys must be nonnegative")
        return int(key)
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"stream key must be int or str, got {type(key).__name__}")


def substream(master_seed: int, *path) -> np.random.Generator:
    """Return the generator for the stream addressed by ``path``.

    The same ``(master_seed, path)`` always yields an identical stream;
    distinct paths yield statistically independent streams.
    """
    spawn_key = tuple(_key_to_int(k) for k in path)
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=spawn_key))


def spawn_seed(master_seed: int, *path) -> int:
    """A 64-bit seed for the stream addressed by ``path``.

    Used where a component needs a plain integer seed (plan headers,
    numba kernels) rather than a Generator.
    """
    spawn_key = tuple(_key_to_int(k) for k in path)
    seq = np.random.SeedSequence(int(master_seed), spawn_key=spawn_key)
    return int(seq.generate_state(1, dtype=np.uint64)[0])
