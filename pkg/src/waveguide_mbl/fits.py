"""Small least-squares helpers for growth-regime discrimination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class FitResult:
    offset: float
    slope: float
    ssr: float  # sum of squared residuals


def _fit(design: np.ndarray, y: np.ndarray) -> FitResult:
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coef
    return FitResult(offset=float(coef[0]), slope=float(coef[1]), ssr=float(residuals @ residuals))


def fit_log_time(t: np.ndarray, y: np.ndarray) -> FitResult:
    """Least squares y ~ a + b ln t (requires t > 0)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(t <= 0):
        raise DomainError("logarithmic fit needs t > 0")
    return _fit(np.column_stack([np.ones_like(t), np.log(t)]), y)


def fit_linear_time(t: np.ndarray, y: np.ndarray) -> FitResult:
    """Least squares y ~ a + b t."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    return _fit(np.column_stack([np.ones_like(t), t]), y)


def fit_power_law(x: np.ndarray, y: np.ndarray) -> FitResult:
    """Least squares ln y ~ ln a + b ln x; slope is the exponent."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("power-law fit needs positive data")
    return _fit(np.column_stack([np.ones_like(x), np.log(x)]), np.log(y))


def window(t: np.ndarray, y: np.ndarray, t_lo: float, t_hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Restrict a sampled curve to t in [t_lo, t_hi], dropping NaNs."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = (t >= t_lo) & (t <= t_hi) & np.isfinite(y)
    return t[sel], y[sel]
