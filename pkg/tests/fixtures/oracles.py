import numpy as np


def finite_difference_gradient(function, x):
    """Central differences with step 1e-6 (1 + ||x||)."""
    x = np.asarray(x, dtype=np.float64)
    step = 1e-6 * (1 + np.linalg.norm(x))
    gradient = np.zeros_like(x)
    for i in range(x.size):
        offset = np.zeros_like(x)
        offset[i] = step
        gradient[i] = (function(x + offset) - function(x - offset)) / (2 * step)
    return gradient


def finite_difference_hessian(gradient, x):
    x = np.asarray(x, dtype=np.float64)
    step = 1e-6 * (1 + np.linalg.norm(x))
    columns = []
    for i in range(x.size):
        offset = np.zeros_like(x)
        offset[i] = step
        columns.append((gradient(x + offset) - gradient(x - offset)) / (2 * step))
    hessian = np.array(columns).T
    return 0.5 * (hessian + hessian.T)


def relative_error(actual, expected):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    return float(np.linalg.norm(actual - expected) / max(1.0, np.linalg.norm(expected)))
