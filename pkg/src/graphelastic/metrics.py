"""Scaled errors, empirical CDFs and principal-stress comparisons."""
from __future__ import annotations

import numpy as np

from .tensors import from_voigt


class DegenerateSeriesError(ValueError):
    pass


def _minmax(true: np.ndarray):
    lo = np.min(true, axis=0)
    hi = np.max(true, axis=0)
    if np.any(hi == lo):
        raise DegenerateSeriesError("true series is constant; scaled error undefined")
    return lo, hi


def scaled_errors(pred, true) -> np.ndarray:
    """Per-sample squared error after min-max scaling with the true series' range.

    2-D inputs are scaled column by column and averaged over columns.
    """
    pred = np.asarray(pred, dtype=float)
    true = np.asarray(true, dtype=float)
    if pred.shape != true.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {true.shape}")
    if true.shape[0] < 2:
        raise ValueError("need at least two samples")
    lo, hi = _minmax(true)
    d = (pred - true) / (hi - lo)
    d2 = d * d
    return d2 if d2.ndim == 1 else d2.mean(axis=tuple(range(1, d2.ndim)))


def scaled_mse(pred, true) -> float:
    return float(np.mean(scaled_errors(pred, true)))


class ECDF:
    """Right-continuous step function F_N of a sample."""

    def __init__(self, values):
        v = np.sort(np.asarray(values, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("eCDF of an empty sample")
        self.x = v
        self.n = v.size

    def __call__(self, t):
        return np.searchsorted(self.x, t, side="right") / self.n

    def quantile(self, q):
        """Smallest sample value x with F(x) >= q."""
        q = np.asarray(q, dtype=float)
        idx = np.clip(np.ceil(q * self.n).astype(int) - 1, 0, self.n - 1)
        return self.x[idx]

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct jump locations and the value of F just after each."""
        ux = np.unique(self.x)
        return ux, self(ux)

    def median(self) -> float:
        return float(self.quantile(0.5))


def ecdf(mses) -> ECDF:
    return ECDF(mses)


def dominance_fraction(left: ECDF, right: ECDF, levels=None) -> float:
    """Fraction of quantile levels where ``left`` lies strictly left of ``right``."""
    if levels is None:
        levels = np.linspace(0.05, 0.95, 19)
    return float(np.mean(left.quantile(levels) < right.quantile(levels)))


def principal_decomposition(S_voigt):
    """Eigenvalues (descending) and matching eigenvectors (columns)."""
    w, V = np.linalg.eigh(from_voigt(S_voigt))
    return w[..., ::-1], V[..., :, ::-1]


def principal_metrics(S_pred, S_true, gap_tol: float = 1e-8):
    """Per-sample (value error, direction error).

    Value error: mean squared difference of sorted eigenvalues. Direction
    error: mean of 1 - |cos| between eigenvectors of equal rank, over the
    eigenvalues of ``S_true`` that are separated from their neighbours by more
    than ``gap_tol`` times the spectral scale. Fully degenerate tensors give 0.
    """
    wp, Vp = principal_decomposition(S_pred)
    wt, Vt = principal_decomposition(S_true)
    value_err = np.mean((wp - wt) ** 2, axis=-1)
    cos = np.abs(np.sum(Vp * Vt, axis=-2))  # (..., 3)
    scale = np.maximum(np.max(np.abs(wt), axis=-1, keepdims=True), np.finfo(float).tiny)
    gaps = np.abs(np.diff(wt, axis=-1)) > gap_tol * scale  # (..., 2)
    ok = np.zeros(wt.shape, dtype=bool)
    ok[..., 0] = gaps[..., 0]
    ok[..., 1] = gaps[..., 0] & gaps[..., 1]
    ok[..., 2] = gaps[..., 1]
    n_ok = ok.sum(axis=-1)
    dir_sum = np.sum(np.where(ok, 1.0 - np.minimum(cos, 1.0), 0.0), axis=-1)
    direction_err = np.where(n_ok > 0, dir_sum / np.maximum(n_ok, 1), 0.0)
    return value_err, direction_err


def principal_scaled_errors(S_pred, S_true):
    """Per-sample scaled errors of principal values and the direction error."""
    wp, _ = principal_decomposition(S_pred)
    wt, _ = principal_decomposition(S_true)
    _, direction = principal_metrics(S_pred, S_true)
    return scaled_errors(wp, wt), direction
