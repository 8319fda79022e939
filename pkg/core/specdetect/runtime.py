"""Process-wide helpers for parallel stages and seeded random streams.

All randomness flows from one master seed. Each consumer asks for a named
sub-stream so that, for example, changing the k-means restart count never
perturbs the noise realisation of a synthesized matrix.
"""

from __future__ import annotations

import logging
import zlib
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

from specdetect.config import Config

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def seed_sequence(seed: int, name: str, *keys: int) -> np.random.SeedSequence:
    """Returns the SeedSequence of a named sub-stream.

    Args:
        seed: Master seed.
        name: Stream name, e.g. ``"noise.gaussian"``.
        *keys: Optional integer keys (trial index, restart index, ...).
    """
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(_name_key(name), *map(int, keys)))


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Returns an independent generator for a named sub-stream of ``seed``."""
    return np.random.default_rng(seed_sequence(seed, name, *keys))


def derive_seed(seed: int, name: str, *keys: int) -> int:
    """Returns a 32-bit integer seed for libraries that want a plain int."""
    return int(seed_sequence(seed, name, *keys).generate_state(1)[0])


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Applies ``fn`` to every item and returns results in input order.

    Args:
        fn: Pure function; it must not share mutable state between calls.
        items: Work items.
        threads: Worker cap; defaults to ``Config.THREADS``.
    """
    work: Sequence[T] = list(items)
    workers = min(threads or Config.THREADS, len(work))
    if workers <= 1:
        return [fn(item) for item in work]
    logger.debug("parallel_map: %d items on %d threads", len(work), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work))
