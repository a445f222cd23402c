"""Dense kernels the cells and the trainer are built from, plus the finite-difference oracle.

Everything runs in 64-bit floats and is a pure function of its inputs, so
repeated evaluation is bitwise reproducible on one machine.
"""

import numpy as np

from .errors import DimensionError

__all__ = [
    "affine",
    "sigmoid",
    "tanh",
    "hadamard",
    "softmax",
    "central_difference_grad",
    "global_norm",
    "global_norm_clip",
]


def affine(m, x):
    """Matrix-vector product ``m @ x`` with explicit shape checking."""
    m = np.asarray(m, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if m.ndim != 2 or x.ndim != 1 or m.shape[1] != x.shape[0]:
        raise DimensionError(
            "affine: incompatible shapes %s and %s" % (m.shape, x.shape)
        )
    return m @ x


def sigmoid(x):
    """Elementwise logistic function, stable for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x):
    return np.tanh(np.asarray(x, dtype=np.float64))


def hadamard(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(
            "hadamard: incompatible shapes %s and %s" % (a.shape, b.shape)
        )
    return a * b


def softmax(scores):
    """Normalized exponentials, computed with max-subtraction for overflow safety."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 1:
        raise DimensionError("softmax: need at least one score")
    shifted = scores - scores.max()
    ex = np.exp(shifted)
    return ex / ex.sum()


def central_difference_grad(f, x, h=1e-5):
    """Numerical gradient of scalar ``f`` at ``x`` by central differences.

    The oracle against which every analytic backward pass is certified; it
    never shares code with the passes it checks.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    for i in range(x.size):
        xp = x.copy().reshape(-1)
        xm = x.copy().reshape(-1)
        xp[i] += h
        xm[i] -= h
        flat[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2.0 * h)
    return grad


def global_norm(tensors):
    """Euclidean norm over all entries of all tensors, in a fixed order."""
    total = 0.0
    for t in tensors:
        t = np.asarray(t, dtype=np.float64)
        total += float(np.sum(t * t))
    return float(np.sqrt(total))


def global_norm_clip(tensors, max_norm):
    """Jointly rescale ``tensors`` so their combined norm does not exceed ``max_norm``.

    The under-threshold test carries a relative slack of 1e-12 so a second
    application returns its input unchanged, bit for bit.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    g = global_norm(tensors)
    if g <= max_norm * (1.0 + 1e-12):
        return [np.asarray(t, dtype=np.float64) for t in tensors]
    scale = max_norm / g
    return [np.asarray(t, dtype=np.float64) * scale for t in tensors]
