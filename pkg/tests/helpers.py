"""Independent oracles used across the suite.

Everything here recomputes expected values through a different code path
than the functions under test: golden-section line search, dense
Kronecker-assembled curvature matrices, closed-form least squares, and a
hand-rolled bootstrap enumeration.
"""

from __future__ import annotations

import numpy as np

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(fn, lo: float, hi: float, tol: float = 1e-12, max_iter: int
= 300) -> float:
    """Minimize a unimodal scalar function on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def linear_model_jacobian(x_row: np.ndarray, n_out: int) -> np.ndarray:
    """Per-example Jacobian of z = x W + b w.r.t. flat (W row-major, b)."""
    jw = np.kron(x_row[None, :], np.eye(n_out))  # (n_out, d*n_out)
    return np.hstack([jw, np.eye(n_out)])


def dense_linear_softmax_fisher(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(1/N) sum_i J_i^T (diag(p_i) - p_i p_i^T) J_i for a linear-softmax model."""
    n, _ = x.shape
    k = w.shape[1]
    probs = softmax_rows(x @ w + b)
    dim = w.size + k
    out = np.zeros((dim, dim))
    for i in range(n):
        j = linear_model_jacobian(x[i], k)
        h = np.diag(probs[i]) - np.outer(probs[i], probs[i])
        out += j.T @ h @ j
    return out / n


def dense_linear_mse_ggn(x: np.ndarray, n_out: int) -> np.ndarray:
    """(2/N) sum_i J_i^T J_i for a linear model under mean-reduced MSE."""
    n = x.shape[0]
    dim = x.shape[1] * n_out + n_out
    out = np.zeros((dim, dim))
    for i in range(n):
        j = linear_model_jacobian(x[i], n_out)
        out += j.T @ j
    return 2.0 * out / n


def least_squares_mse(x: np.ndarray, y: np.ndarray) -> float:
    """Optimal mean-reduced MSE of an affine model, by closed form."""
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(xa, y, rcond=None)
    resid = xa @ coef - y
    return float((resid * resid).sum() / x.shape[0])


def brute_force_bootstrap(runs, n_boot: int, seed: int):
    """Re-enumerate the documented resampling stream with plain Python.

    Mirrors the stream contract (one default_rng(seed); per bootstrap,
    len(runs) indices via integers(0, n_runs, size=n_runs)) but computes
    medians, mean and std by hand.
    """
    rng = np.random.default_rng(seed)
    n_runs = len(runs)
    length = min(len(r) for r in runs)
    medians = []
    for _ in range(n_boot):
        idx = [int(i) for i in rng.integers(0, n_runs, size=n_runs)]
        med = []
        for t in range(length):
            col = sorted(float(runs[i][t]) for i in idx)
            mid = len(col) // 2
            med.append(col[mid] if len(col) % 2 == 1 else 0.5 * (col[mid - 1] + col[mid]))
        medians.append(med)
    mean = [sum(m[t] for m in medians) / n_boot for t in range(length)]
    var = [sum((m[t] - mean[t]) ** 2 for m in medians) / n_boot for t in range(length)]
    return np.array(mean), np.sqrt(np.array(var))
