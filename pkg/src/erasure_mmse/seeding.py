"""Deterministic seed derivation and block-parallel reductions.

Per-trial seeds come from a SplitMix64 counter mix: trial ``i`` of a run
seeded with ``seed`` gets ``derive_seed(seed, i)``, so any single trial is
reproducible in isolation and independent of how many trials surround it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

T = TypeVar("T")
R = TypeVar("R")

# Fixed block size for parallel enumeration. Partial results are combined
# in block order, so outputs are identical for every worker count.
BLOCK_SIZE = 256


def splitmix64(state: int) -> int:
    """One SplitMix64 output for the given 64-bit state."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Seed for sub-stream ``index`` of a run seeded with ``seed``."""
    if index < 0:
        raise ValueError(f"stream index must be >= 0, got {index}")
    return splitmix64((seed & _MASK64) ^ splitmix64(index + 1))


def map_blocks(
    func: Callable[[Sequence[T]], R],
    items: Iterable[T],
    combine: Callable[[R, R], R],
    init: R,
    threads: int = 1,
) -> R:
    """Apply ``func`` to fixed-size blocks of ``items`` and fold the results.

    Blocks have a constant size independent of ``threads`` and are combined
    strictly in block order, so the folded value is bit-identical for any
    worker count.
    """
    blocks: list[list[T]] = []
    block: list[T] = []
    for item in items:
        block.append(item)
        if len(block) == BLOCK_SIZE:
            blocks.append(block)
            block = []
    if block:
        blocks.append(block)

    if threads <= 1 or len(blocks) <= 1:
        result = init
        for blk in blocks:
            result = combine(result, func(blk))
        return result

    with ThreadPoolExecutor(max_workers=threads) as pool:
        partials = list(pool.map(func, blocks))
    result = init
    for part in partials:
        result = combine(result, part)
    return result
