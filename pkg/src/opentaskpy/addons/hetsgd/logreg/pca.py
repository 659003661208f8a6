"""Principal component projection."""

import numpy as np
import scipy.linalg

from ..exceptions import ParameterRangeError


def pca_reduce(data: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Centre the columns and project onto the top-k covariance eigenvectors.

    The covariance uses 1/n. Each basis column is signed so that its largest
    magnitude entry is positive.

    Args:
        data: n x d0 matrix
        k: Number of components

    Returns:
        tuple: (n x k projection, d0 x k orthonormal basis)
    """
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2:
        raise ParameterRangeError(f"PCA needs a 2-D matrix, got {matrix.ndim}-D")
    n, width = matrix.shape
    if not 1 <= k <= min(n, width):
        raise ParameterRangeError(f"k must lie in 1..min(n, d) = 1..{min(n, width)}, got {k}")
    centred = matrix - matrix.mean(axis=0)
    covariance = centred.T @ centred / n
    _, vectors = scipy.linalg.eigh(covariance, subset_by_index=[width - k, width - 1])
    basis = vectors[:, ::-1]
    pivots = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivots, np.arange(k)])
    signs[signs == 0] = 1.0
    basis = basis * signs
    return centred @ basis, basis
