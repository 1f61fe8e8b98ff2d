"""Critical exponents: the predicted table and log-log fits of solver output."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import AnnealedError, DomainError, WindowTooWideError
from .meanfield import DEFAULT_TOL, ModelSpec, pressure_rank2, solve_m, theta_c
from .weights import BOUNDARY, FINITE_MOMENT, POWER_LAW, TailRegime


@dataclass(frozen=True)
class PredictedExponents:
    beta: float
    delta: float
    log_correction: bool


def predicted_exponents(k: int, regime: TailRegime) -> PredictedExponents:
    """beta and delta for cumulant order k and the weight-tail regime."""
    if k < 4 or k % 2:
        raise DomainError(f"k must be an even integer >= 4, got {k}")
    if regime.kind == FINITE_MOMENT:
        return PredictedExponents(1.0 / (k - 2), k - 1.0, False)
    if regime.kind == POWER_LAW:
        tau = regime.tau
        return PredictedExponents(1.0 / (tau - 3.0), tau - 2.0, False)
    if regime.kind == BOUNDARY:
        return PredictedExponents(1.0 / (k - 2), k - 1.0, True)
    raise DomainError(f"unknown regime {regime.kind!r}")


@dataclass(frozen=True)
class ExponentFit:
    estimate: float
    stderr: float
    window: tuple
    n_points: int
    r_squared: float
    log_corrected: bool
    slope: float
    x: np.ndarray
    m: np.ndarray

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "window": list(self.window),
            "n_points": self.n_points,
            "r_squared": self.r_squared,
            "log_corrected": self.log_corrected,
        }


def _regressor(x: np.ndarray, log_corrected: bool) -> np.ndarray:
    if log_corrected:
        return np.log(x / np.log(1.0 / x))
    return np.log(x)


def _grid(window, n_points, upper):
    lo, hi = window
    if not (0 < lo < hi <= upper):
        raise DomainError(f"fit window must satisfy 0 < lo < hi <= {upper:g}, got {window}")
    if n_points < 5:
        raise DomainError("a fit needs at least 5 points")
    return np.geomspace(lo, hi, n_points)


def _regress(x, m, log_corrected):
    res = stats.linregress(_regressor(x, log_corrected), np.log(m))
    return res.slope, res.stderr, min(1.0, max(0.0, res.rvalue**2))


def fit_beta(
    model: ModelSpec,
    window=(1e-5, 1e-2),
    n_points: int = 12,
    log_corrected: bool = False,
    tol: float = DEFAULT_TOL,
) -> ExponentFit:
    """Slope of log m_plus against log(theta/theta_c - 1) at h = 0."""
    model = model.with_h(0.0)
    eps = _grid(window, n_points, 0.1)
    tc = theta_c(model)
    m = np.array([solve_m(model.with_theta(tc * (1.0 + e)), tol=tol).m_plus for e in eps])
    if np.any(m <= 0):
        raise WindowTooWideError(f"m_plus vanished at eps = {eps[np.argmin(m)]:g}")
    slope, se, r2 = _regress(eps, m, log_corrected)
    return ExponentFit(slope, se, tuple(window), n_points, r2, log_corrected, slope, eps, m)


def fit_delta(
    model: ModelSpec,
    window=(1e-5, 1e-2),
    n_points: int = 12,
    log_corrected: bool = False,
    tol: float = DEFAULT_TOL,
) -> ExponentFit:
    """Inverse slope of log m_plus against log h at theta = theta_c."""
    h = _grid(window, n_points, 0.1)
    at_c = model.with_theta(theta_c(model))
    m = np.array([solve_m(at_c.with_h(x), tol=tol).m_plus for x in h])
    if np.any(m <= 0):
        raise WindowTooWideError(f"m_plus vanished at h = {h[np.argmin(m)]:g}")
    slope, se, r2 = _regress(h, m, log_corrected)
    return ExponentFit(1.0 / slope, se / slope**2, tuple(window), n_points, r2, log_corrected, slope, h, m)


@dataclass(frozen=True)
class CurveRow:
    theta: float
    h: float
    m_plus: float
    pressure: float
    residual: float
    error: Optional[str] = None


def magnetization_curve(model: ModelSpec, control: str, grid: Sequence[float], tol: float = DEFAULT_TOL) -> list[CurveRow]:
    """Solve along a sorted grid of theta or h values; failures are kept per row."""
    grid = [float(v) for v in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("curve grid must be sorted ascending")
    if control not in ("theta", "h"):
        raise DomainError(f"control must be 'theta' or 'h', got {control!r}")
    rows = []
    for v in grid:
        theta, h = (v, model.h) if control == "theta" else (model.theta, v)
        try:
            # a grid point can leave the kernel's positivity range; keep it as a failed row
            point = model.with_theta(v) if control == "theta" else model.with_h(v)
            fp = solve_m(point, tol=tol)
            rows.append(CurveRow(theta, h, fp.m_plus, pressure_rank2(point, fp), fp.residual))
        except AnnealedError as exc:
            rows.append(CurveRow(theta, h, math.nan, math.nan, math.nan, str(exc)))
    return rows
