"""Dense float64 kernels: initialization, activations, Adam, and a
central-difference gradient oracle.

Matrices are plain 2-d ``numpy.ndarray`` of float64 ("Dense" throughout the
package). Everything here is pure and deterministic; the finite-difference
oracle is the independent reference that all analytic gradients in the
package are tested against.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EvaluationFailure, NumericDomainError


def as_rng(rng):
    """Accept either a seed int or a numpy Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def xavier_init(rows, cols, rng):
    """Uniform Xavier/Glorot matrix on [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))]."""
    if rows < 1 or cols < 1:
        raise DimensionError(f"xavier_init needs positive dims, got {rows}x{cols}")
    limit = np.sqrt(6.0 / (rows + cols))
    return as_rng(rng).uniform(-limit, limit, size=(rows, cols))


def matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shapes incompatible: {a.shape} x {b.shape}")
    return a @ b


def transpose(a):
    return np.asarray(a, dtype=np.float64).T.copy()


def concat_rows(a, b):
    """Concatenate row-wise: row i of the result is row i of a followed by row i of b."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat_rows needs equal row counts: {a.shape} vs {b.shape}")
    return np.concatenate([a, b], axis=1)


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def tanh(x):
    return np.tanh(np.asarray(x, dtype=np.float64))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_vec(x):
    """Softmax of a 1-d vector with max subtraction for stability."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"softmax_vec expects a vector, got shape {x.shape}")
    shifted = np.exp(x - x.max())
    return shifted / shifted.sum()


def l2_norm_sq(a):
    a = np.asarray(a, dtype=np.float64)
    return float(np.sum(a * a))


@dataclass
class AdamState:
    """Per-parameter Adam moments; shapes mirror the parameter."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param):
        return cls(np.zeros_like(param), np.zeros_like(param))


def adam_step(param, grad, state, lr):
    """One bias-corrected Adam update. Mutates ``state``; returns the new param."""
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if param.shape != grad.shape:
        raise DimensionError(f"adam_step shapes differ: {param.shape} vs {grad.shape}")
    state.step_count += 1
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad * grad
    m_hat = state.first_moment / (1.0 - state.beta1 ** state.step_count)
    v_hat = state.second_moment / (1.0 - state.beta2 ** state.step_count)
    return param - lr * m_hat / (np.sqrt(v_hat) + state.eps)


def finite_difference_gradient(scalar_function, params, eps=1e-5):
    """Central-difference gradient of ``scalar_function`` at ``params``.

    The function must be deterministic; any frozen randomness (neighbor
    samples, triple batches) has to be captured in its closure. ``params``
    may have any shape; the result matches it.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise NumericDomainError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    flat = params.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = float(scalar_function(params))
        flat[i] = orig - eps
        down = float(scalar_function(params))
        flat[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise EvaluationFailure(f"non-finite objective near coordinate {i}")
        gflat[i] = (up - down) / (2.0 * eps)
    return grad


def relative_gradient_error(analytic, numeric, floor=1e-3):
    """Max per-coordinate relative discrepancy between two gradients.

    The denominator is floored so coordinates whose true gradient is tiny are
    compared absolutely instead of blowing up.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise DimensionError(f"gradient shapes differ: {analytic.shape} vs {numeric.shape}")
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
