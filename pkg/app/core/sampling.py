"""Counter-based random streams.

A stream is addressed by (seed, stream, block). Draws for a block never
depend on how many other blocks were drawn or in which order, so sweeps can
be split across workers and still reproduce bit-for-bit.
"""

from typing import Iterator, Tuple

import numpy as np

BLOCK_SIZE = 65536
_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


def stream_generator(seed: int, stream: int = 0, block: int = 0) -> np.random.Generator:
    key = (int(seed) & _MASK64) | ((int(stream) & _MASK32) << 64) | ((int(block) & _MASK32) << 96)
    return np.random.Generator(np.random.Philox(key=key))


def block_ranges(n: int, block_size: int = BLOCK_SIZE) -> Iterator[Tuple[int, int, int]]:
    """(block, start, stop) covering range(n)."""
    for block, start in enumerate(range(0, n, block_size)):
        yield block, start, min(start + block_size, n)


def uniform_draws(seed: int, stream: int, n: int, width: int = 1) -> np.ndarray:
    """n x width uniforms on [0, 1), assembled block by block in trial order."""
    out = np.empty((n, width))
    for block, start, stop in block_ranges(n):
        out[start:stop] = stream_generator(seed, stream, block).random((stop - start, width))
    return out
