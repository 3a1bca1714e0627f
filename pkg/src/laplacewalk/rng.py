"""Reproducible random streams.

Every simulation splits its replicas into fixed-size blocks.  Block ``b`` of
suite ``name`` under master seed ``s`` always draws from the same Philox
(counter-based) stream, so results do not depend on how many worker threads
process the blocks or in which order they finish.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 1 << 16


def suite_id(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(master_seed: int, suite: str, index: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(master_seed, suite, index)``."""
    ss = np.random.SeedSequence([master_seed & (2**64 - 1), suite_id(suite), index])
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def block_sizes(replicas: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(int(replicas), block_size)
    return [block_size] * full + ([rest] if rest else [])


def run_blocks(
    fn: Callable[[np.random.Generator, int], object],
    replicas: int,
    seed: int,
    suite: str,
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> list:
    """Apply ``fn(rng, n)`` to each block; results come back in block order."""
    sizes = block_sizes(replicas, block_size)
    jobs = [(stream(seed, suite, b), n) for b, n in enumerate(sizes)]
    if threads <= 1 or len(jobs) <= 1:
        return [fn(g, n) for g, n in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def concat_fields(parts: Sequence[dict]) -> dict:
    """Concatenate per-block dicts of arrays along the replica axis."""
    if not parts:
        return {}
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
