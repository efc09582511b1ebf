"""Input corruption for denoising: random swaps of contiguous words.

For a sequence of N elements exactly ⌊N/2⌋ sequential transpositions
are applied; each draws a position i uniformly from {0, ..., N−2}
(with replacement across draws) and swaps elements i and i+1. The
output is always a permutation of the input. Corruption is applied to
encoder inputs only, never to reconstruction targets, and the
structural end-of-sentence marker is excluded before corrupting.
"""

from __future__ import annotations

import numpy as np


def corrupt(tokens: list, rng: np.random.Generator) -> list:
    """Return a corrupted copy of ``tokens``; the input is not touched."""
    out = list(tokens)
    n = len(out)
    if n < 2:
        return out
    for _ in range(n // 2):
        i = int(rng.integers(0, n - 1))
        out[i], out[i + 1] = out[i + 1], out[i]
    return out


def corrupt_batch_ids(ids: np.ndarray, lengths: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Corrupt every row of a padded id grid in place of a copy.
    ``lengths`` includes the trailing EOS, which stays in place."""
    out = ids.copy()
    for r in range(out.shape[0]):
        n = int(lengths[r]) - 1  # exclude EOS
        if n < 2:
            continue
        row = out[r]
        for _ in range(n // 2):
            i = int(rng.integers(0, n - 1))
            row[i], row[i + 1] = row[i + 1], row[i]
    return out
