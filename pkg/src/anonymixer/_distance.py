"""Blocked Euclidean distances.

Differences are formed explicitly (no ``|x|^2 + |y|^2 - 2xy`` expansion) so tiny
distances keep full relative precision. Blocks are visited in a fixed order, so
results do not depend on block size.
"""

import numpy as np

BLOCK_ROWS = 256


def row_blocks(n, block=BLOCK_ROWS):
    for start in range(0, n, block):
        yield start, min(start + block, n)


def pairwise_sq(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def pairwise(a, b):
    return np.sqrt(pairwise_sq(a, b))


def block_size_for(n_cols, m, budget=4_000_000):
    # keeps the (rows x n_cols x m) difference tensor around 32 MB
    return max(1, min(BLOCK_ROWS, budget // max(1, n_cols * m)))
