"""
Deterministic random streams.

All randomness flows from one master seed. Monte Carlo work is cut into
fixed-size blocks and every block draws from its own substream

    SeedSequence([master_seed, stream_slot, block_index])

so the values a sample sees depend only on its position, never on how
blocks are distributed over shards or worker processes.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np


logger = logging.getLogger(__name__)


def resolve_seed(seed: Optional[int]) -> int:
    """Return `seed`, or a fresh entropy seed that the caller must record."""
    if seed is not None:
        return int(seed)
    fresh = int(np.random.SeedSequence().entropy) % (2 ** 63)
    logger.info(f"No seed given, drawing entropy seed {fresh}")
    return fresh


def block_generator(master_seed: int, stream_slot: int, block_index: int) -> np.random.Generator:
    """Generator for one Monte Carlo block."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, stream_slot, block_index]))


def document_generator(master_seed: int, document_index: int) -> np.random.Generator:
    """Generator for corrupting one document of a corpus."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, 0xC0, document_index]))


def block_sizes(n_samples: int, block_size: int) -> List[int]:
    full, rest = divmod(n_samples, block_size)
    return [block_size] * full + ([rest] if rest else [])


def shard_plan(n_blocks: int, n_shards: int) -> List[Tuple[int, int]]:
    """Split block indices into at most `n_shards` contiguous [start, stop) ranges."""
    n_shards = max(1, min(n_shards, n_blocks)) if n_blocks else 1
    bounds = np.linspace(0, n_blocks, n_shards + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
