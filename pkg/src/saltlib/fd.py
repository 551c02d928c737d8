"""Central finite-difference derivatives with per-coordinate step scaling.

Steps follow h_i = max(FD_STEP, FD_STEP * |x_i|), the usual cube-root-of-eps
scaling for second-order central differences on O(1) data.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

FD_STEP = 1e-6
FD_STEP_T = 1e-6


def _steps(x: np.ndarray) -> np.ndarray:
    return np.maximum(FD_STEP, FD_STEP * np.abs(x))


def jac_x(f: Callable[[float, np.ndarray], np.ndarray], t: float, x: np.ndarray) -> np.ndarray:
    """Jacobian of f(t, x) in x; shape (len(f), len(x))."""
    x = np.asarray(x, dtype=float)
    h = _steps(x)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        cols.append((np.asarray(f(t, x + e), dtype=float) - np.asarray(f(t, x - e), dtype=float)) / (2.0 * h[i]))
    return np.stack(cols, axis=-1)


def grad_x(g: Callable[[float, np.ndarray], float], t: float, x: np.ndarray) -> np.ndarray:
    """Row gradient of scalar g(t, x) in x; shape (len(x),)."""
    x = np.asarray(x, dtype=float)
    h = _steps(x)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        out[i] = (float(g(t, x + e)) - float(g(t, x - e))) / (2.0 * h[i])
    return out


def diff_t(f: Callable[[float, np.ndarray], np.ndarray], t: float, x: np.ndarray):
    """Partial derivative of f(t, x) in t (vector or scalar, matching f)."""
    hi = max(FD_STEP_T, FD_STEP_T * abs(t))
    fp = f(t + hi, x)
    fm = f(t - hi, x)
    return (np.asarray(fp, dtype=float) - np.asarray(fm, dtype=float)) / (2.0 * hi)


def jac_q(fn: Callable[[np.ndarray], np.ndarray], q: np.ndarray) -> np.ndarray:
    """Jacobian of a configuration-only map fn(q); shape (len(fn), len(q))."""
    q = np.asarray(q, dtype=float)
    h = _steps(q)
    cols = []
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = h[i]
        cols.append((np.asarray(fn(q + e), dtype=float) - np.asarray(fn(q - e), dtype=float)) / (2.0 * h[i]))
    return np.stack(cols, axis=-1)


def directional_matrix_derivative(J: Callable[[np.ndarray], np.ndarray], q: np.ndarray,
                                  qdot: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Time derivative of a configuration-dependent matrix along qdot.

    Jdot = sum_i dJ/dq_i qdot_i, evaluated as (J(q + h qdot) - J(q - h qdot)) / (2h).
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    return (np.asarray(J(q + h * qdot), dtype=float) - np.asarray(J(q - h * qdot), dtype=float)) / (2.0 * h)
