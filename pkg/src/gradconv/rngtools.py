"""Named RNG substreams derived from a single root seed.

Every stochastic routine in the package receives either an explicit
``numpy.random.Generator`` or a ``(root_seed, name)`` pair resolved through
:func:`substream`.  Substreams are independent of one another and stable
across runs, so adding draws to one stream never perturbs any other.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "as_generator"]


def _name_key(name: str) -> tuple[int, ...]:
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def substream(root_seed: int, name: str) -> np.random.Generator:
    """Generator for the substream `name` under `root_seed`.

    Uses a hash of the name as the SeedSequence spawn key, so streams such
    as ``data/3`` and ``rc/17`` are decorrelated and reproducible.
    """
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=_name_key(name))
    return np.random.default_rng(ss)


def as_generator(seed_or_rng) -> np.random.Generator:
    """Accept an int seed, a Generator, or None (fresh entropy)."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
