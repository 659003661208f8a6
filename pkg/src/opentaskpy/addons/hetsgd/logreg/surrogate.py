"""Gaussian-blob stand-in for a ten-class digit corpus."""

import numpy as np

from ..exceptions import ParameterRangeError
from ..rng import RngStream, StreamPurpose

DIGITS = 10
# blob spread relative to the spread of the class centres
_SPREAD = 2.0


def synth_digits(seed: int, n_per_digit: int = 200, dim: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Draw ten heavily overlapping Gaussian classes.

    Rows are shuffled so that every digit is spread through the array.

    Args:
        seed: Master seed
        n_per_digit: Rows per digit
        dim: Feature dimension

    Returns:
        tuple: (features n x dim, uint8 digit labels)
    """
    if n_per_digit < 1 or dim < 1:
        raise ParameterRangeError(f"need positive sizes, got n_per_digit={n_per_digit}, dim={dim}")
    blocks = []
    for digit in range(DIGITS):
        stream = RngStream(seed, 0, digit, 0, StreamPurpose.DATA)
        centre = stream.normals(1, dim)[0]
        noise = stream.normals(n_per_digit, dim, first_step=1)
        blocks.append(centre + _SPREAD * noise)
    features = np.concatenate(blocks)
    labels = np.repeat(np.arange(DIGITS, dtype=np.uint8), n_per_digit)
    order = RngStream(seed, 0, DIGITS, 0, StreamPurpose.DATA).permutation(len(labels))
    return features[order], labels[order]
