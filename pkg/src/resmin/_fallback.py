"""Pure-numpy versions of the assembly kernels.

Used when the compiled extension is unavailable or explicitly disabled
via RESMIN_BACKEND=python.  Batched matmul keeps this path vectorized.
"""

import numpy as np


def accumulate_blocks(test, trial, weights):
    """out[c, i, j] = sum_q weights[c, q] * test[c, q, i] * trial[c, q, j]."""
    scaled = test * weights[:, :, None]
    return np.matmul(scaled.transpose(0, 2, 1), trial)


def accumulate_vectors(test, weights):
    """out[c, i] = sum_q weights[c, q] * test[c, q, i]."""
    return (test * weights[:, :, None]).sum(axis=1)
