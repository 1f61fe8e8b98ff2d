"""Asymptotic vertex-weight laws W and the expectations the solvers need.

Four variants: a point mass, a finite discrete law, a pure Pareto law with
survival ``(w / w_min) ** -(tau - 1)``, and a tabulated piecewise-linear
density on ``(0, w_cap]``.  Diverging moments are reported as
:data:`INFINITE`, never produced by overflow.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate as sp_integrate

from .errors import DomainError, IntegrationError, OutOfScopeError, UnsupportedError

INFINITE = math.inf

QUAD_EPSABS = 1e-10
QUAD_LIMIT = 500

# composite Gauss-Legendre in log-scale used by the vectorized paths
_PANEL_WIDTH = 1.0
_PANEL_NODES = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_PANEL_NODES)


def _log_panels(lo: float, hi: float):
    """Composite Gauss-Legendre nodes/weights on [lo, hi]."""
    n_panels = max(1, int(math.ceil((hi - lo) / _PANEL_WIDTH)))
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    return x, w


def _quad(func, a, b, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("error", sp_integrate.IntegrationWarning)
        try:
            kwargs = {"points": points} if points is not None and np.isfinite(b) else {}
            val, _ = sp_integrate.quad(
                func, a, b, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=QUAD_LIMIT, **kwargs
            )
        except sp_integrate.IntegrationWarning as exc:
            raise IntegrationError(f"adaptive quadrature failed on [{a}, {b}]: {exc}") from exc
    if not math.isfinite(val):
        raise IntegrationError(f"adaptive quadrature returned {val!r} on [{a}, {b}]")
    return val


class WeightModel:
    """Common interface of the weight laws."""

    kind = "abstract"

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def second_moment(self) -> float:
        return self.moment(2)

    @property
    def sb_mean(self) -> float:
        """Size-biased mean E[W^2] / E[W]."""
        return self.moment(2) / self.moment(1)

    def _validate(self):
        if not self.moment(1) > 0:
            raise DomainError("E[W] must be positive")
        if not math.isfinite(self.moment(2)):
            raise OutOfScopeError("E[W^2] must be finite")

    # subclasses provide: moment, truncated_moment, expect, quantile, rule, describe

    def size_biased_expect(self, f: Callable) -> float:
        """E[W f(W)] / E[W]."""
        return self.expect(lambda w: w * np.asarray(f(w), dtype=float)) / self.mean

    def size_biased_scaled(self, F: Callable, m: float, linear: float = 0.0) -> float:
        """E^sb[F(W m)] for vectorized F with F(s) - linear * s bounded as s grows.

        Deterministic, discrete and tabulated laws evaluate this with their
        quadrature rule; :class:`Pareto` overrides it with a scale-adapted rule.
        """
        w, p = self.rule()
        return float(np.dot(p * w, F(w * m))) / self.mean

    def scaled_expect(self, F: Callable, m: float, linear: float = 0.0) -> float:
        """E[F(W m)] under the same growth condition on F."""
        w, p = self.rule()
        return float(np.dot(p, F(w * m)))


@dataclass(frozen=True)
class Deterministic(WeightModel):
    w: float = 1.0
    kind = "deterministic"

    def __post_init__(self):
        if not self.w > 0:
            raise DomainError(f"deterministic weight must be positive, got {self.w}")

    def moment(self, k):
        return float(self.w) ** k

    def truncated_moment(self, k, R):
        return float(self.w) ** k if self.w <= R else 0.0

    def expect(self, f):
        return float(np.asarray(f(np.array([self.w])), dtype=float)[0])

    def quantile(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.w)

    def rule(self):
        return np.array([self.w], dtype=float), np.array([1.0])

    def describe(self):
        return {"type": self.kind, "w": self.w}


@dataclass(frozen=True, eq=False)
class Discrete(WeightModel):
    values: np.ndarray
    probs: np.ndarray
    kind = "discrete"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.ndim != 1 or v.shape != p.shape or v.size == 0:
            raise DomainError("discrete weights need matching 1-d values/probs")
        if np.any(v <= 0) or np.any(p < 0):
            raise DomainError("discrete weights need w > 0 and p >= 0")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DomainError(f"discrete probabilities sum to {p.sum()!r}, not 1")
        order = np.argsort(v)
        object.__setattr__(self, "values", v[order])
        object.__setattr__(self, "probs", p[order])
        self._validate()

    def moment(self, k):
        return float(np.dot(self.probs, self.values**k))

    def truncated_moment(self, k, R):
        keep = self.values <= R
        return float(np.dot(self.probs[keep], self.values[keep] ** k))

    def expect(self, f):
        return float(np.dot(self.probs, np.asarray(f(self.values), dtype=float)))

    def quantile(self, u):
        cdf = np.cumsum(self.probs)
        idx = np.searchsorted(cdf, np.asarray(u, dtype=float), side="left")
        return self.values[np.minimum(idx, self.values.size - 1)]

    def rule(self):
        return self.values, self.probs

    def describe(self):
        return {"type": self.kind, "values": self.values.tolist(), "probs": self.probs.tolist()}


@dataclass(frozen=True)
class Pareto(WeightModel):
    """Pure power law: P(W > w) = (w / w_min)^-(tau - 1) for w >= w_min."""

    tau: float
    w_min: float = 1.0
    kind = "pareto"

    def __post_init__(self):
        if not self.w_min > 0:
            raise DomainError("Pareto w_min must be positive")
        if not self.tau > 3:
            raise OutOfScopeError(f"Pareto weights need tau > 3 (finite E[W^2]), got {self.tau}")

    def moment(self, k):
        a = self.tau - 1.0
        if k >= a:
            return INFINITE
        return a / (a - k) * self.w_min**k

    def truncated_moment(self, k, R):
        a = self.tau - 1.0
        if R <= self.w_min:
            return 0.0
        scale = a * self.w_min**a
        if k == a:
            return scale * math.log(R / self.w_min)
        e = k - a
        return scale / e * (R**e - self.w_min**e)

    def expect(self, f):
        # x = log(w / w_min); density (tau - 1) exp(-(tau - 1) x) on [0, inf)
        a = self.tau - 1.0

        def integrand(x):
            w = self.w_min * math.exp(x)
            return a * math.exp(-a * x) * float(np.asarray(f(np.array([w])), dtype=float)[0])

        # w**2 stays finite up to x = 300; integrands growing at most like w**2
        # have relative tail below exp(-(tau - 3) * 300) there
        head = _quad(integrand, 0.0, 30.0, points=[1.0, 5.0])
        return head + _quad(integrand, 30.0, 300.0, points=[60.0, 120.0])

    def quantile(self, u):
        return self.w_min * (1.0 - np.asarray(u, dtype=float)) ** (-1.0 / (self.tau - 1.0))

    def rule(self):
        """Composite rule in log w; the dropped tail has E[W; W > cut] below 1e-16."""
        x_max = 37.0 / (self.tau - 2.0)
        x, wx = _log_panels(0.0, x_max)
        a = self.tau - 1.0
        return self.w_min * np.exp(x), wx * a * np.exp(-a * x)

    def size_biased_scaled(self, F, m, linear=0.0):
        if m == 0.0:
            return float(np.asarray(F(np.array([0.0])))[0])
        a = self.tau - 1.0
        # s = w m:  E^sb[F(W m)] = a w_min^a m^(tau-2) / E[W] * int_{m w_min}^inf s^(1-tau) F(s) ds
        y0 = math.log(m * self.w_min)
        y1 = max(y0, 0.0) + 40.0 / (self.tau - 2.0)
        y, wy = _log_panels(y0, y1)
        s = np.exp(y)
        integral = float(np.dot(wy, s ** (2.0 - self.tau) * F(s)))
        if linear:
            # beyond y1 only the linear part of F still contributes
            integral += linear * math.exp((3.0 - self.tau) * y1) / (self.tau - 3.0)
        log_pref = math.log(a) + a * math.log(self.w_min) + (self.tau - 2.0) * math.log(m)
        return math.exp(log_pref) * integral / self.mean

    def scaled_expect(self, F, m, linear=0.0):
        if m == 0.0:
            return float(np.asarray(F(np.array([0.0])))[0])
        a = self.tau - 1.0
        # E[F(W m)] = a w_min^a m^(tau-1) * int_{m w_min}^inf s^(-tau) F(s) ds
        y0 = math.log(m * self.w_min)
        y1 = max(y0, 0.0) + 40.0 / (self.tau - 2.0)
        y, wy = _log_panels(y0, y1)
        s = np.exp(y)
        integral = float(np.dot(wy, s ** (1.0 - self.tau) * F(s)))
        if linear:
            integral += linear * math.exp((2.0 - self.tau) * y1) / (self.tau - 2.0)
        log_pref = math.log(a) + a * math.log(self.w_min) + a * math.log(m)
        return math.exp(log_pref) * integral

    def describe(self):
        return {"type": self.kind, "tau": self.tau, "w_min": self.w_min}


@dataclass(frozen=True, eq=False)
class TabulatedDensity(WeightModel):
    """Piecewise-linear density through (nodes, values) on (0, w_cap], normalized."""

    nodes: np.ndarray
    values: np.ndarray
    kind = "tabulated"
    _mass: float = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise DomainError("tabulated weights need matching 1-d nodes/values, length >= 2")
        if x[0] < 0 or np.any(np.diff(x) <= 0):
            raise DomainError("tabulated weight nodes must be increasing and nonnegative")
        if np.any(v < 0):
            raise DomainError("tabulated weight density must be nonnegative")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "values", v)
        mass = float(np.sum(0.5 * (v[:-1] + v[1:]) * np.diff(x)))
        if not mass > 0:
            raise DomainError("tabulated weight density has zero mass")
        object.__setattr__(self, "_mass", mass)
        self._validate()

    def _rule_upto(self, R=np.inf):
        xs, ws = [], []
        for lo, hi in zip(self.nodes[:-1], self.nodes[1:]):
            hi = min(hi, R)
            if hi <= lo:
                break
            half = 0.5 * (hi - lo)
            x = 0.5 * (lo + hi) + half * _GL_X
            xs.append(x)
            ws.append(half * _GL_W * np.interp(x, self.nodes, self.values) / self._mass)
        if not xs:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(xs), np.concatenate(ws)

    def rule(self):
        return self._rule_upto()

    def moment(self, k):
        w, p = self.rule()
        return float(np.dot(p, w**k))

    def truncated_moment(self, k, R):
        w, p = self._rule_upto(R)
        return float(np.dot(p, w**k))

    def expect(self, f):
        w, p = self.rule()
        return float(np.dot(p, np.asarray(f(w), dtype=float)))

    def quantile(self, u):
        v, x = self.values, self.nodes
        panel_mass = 0.5 * (v[:-1] + v[1:]) * np.diff(x) / self._mass
        if np.any(panel_mass <= 0):
            raise UnsupportedError("tabulated weight CDF has flat stretches; quantile is not invertible")
        knots = np.concatenate([[0.0], np.cumsum(panel_mass)])
        u = np.atleast_1d(np.asarray(u, dtype=float))
        idx = np.clip(np.searchsorted(knots, u, side="right") - 1, 0, x.size - 2)
        a = v[idx] / self._mass
        width = np.diff(x)[idx]
        slope = (v[idx + 1] - v[idx]) / self._mass / width
        r = u - knots[idx]
        disc = np.sqrt(np.maximum(a * a + 2.0 * slope * r, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = np.where(np.abs(slope) > 1e-14, (disc - a) / slope, r / a)
        return np.clip(x[idx] + dx, x[idx], x[idx + 1])

    def describe(self):
        return {"type": self.kind, "n_nodes": int(self.nodes.size), "w_cap": float(self.nodes[-1])}


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def moment(W: WeightModel, k: int) -> float:
    if k < 1:
        raise DomainError("moment order must be >= 1")
    return W.moment(k)


def truncated_moment(W: WeightModel, k: int, R: float) -> float:
    """E[W^k 1{W <= R}]."""
    if not R > 0:
        raise DomainError("truncation level must be positive")
    return W.truncated_moment(k, R)


def size_biased_expect(W: WeightModel, f: Callable) -> float:
    """E^sb[f(W)] = E[W f(W)] / E[W]."""
    return W.size_biased_expect(f)


def weight_sequence(W: WeightModel, N: int, mode: str = "quantile", seed: Optional[int] = None) -> np.ndarray:
    """Finite-N weights: the quantile grid at (i - 1/2)/N, or i.i.d. draws."""
    if N < 1:
        raise DomainError("N must be >= 1")
    if mode == "quantile":
        u = (np.arange(N) + 0.5) / N
    elif mode == "random":
        if seed is None:
            raise DomainError("random weight sequences need an explicit seed")
        u = np.random.Generator(np.random.Philox(seed)).random(N)
    else:
        raise DomainError(f"unknown weight_sequence mode {mode!r}")
    return np.asarray(W.quantile(u), dtype=float)


@dataclass(frozen=True)
class TailRegime:
    kind: str  # "finite_moment" | "power_law" | "boundary"
    tau: Optional[float] = None

    def __str__(self):
        return self.kind if self.tau is None else f"{self.kind}(tau={self.tau:g})"


FINITE_MOMENT = "finite_moment"
POWER_LAW = "power_law"
BOUNDARY = "boundary"


def classify_tail(W: WeightModel, k: int) -> TailRegime:
    """Which column of the exponent table applies to W for cumulant order k."""
    if isinstance(W, Pareto):
        if W.tau <= 3:
            raise OutOfScopeError("Pareto weights with tau <= 3 are out of scope")
        if W.tau < k + 1:
            return TailRegime(POWER_LAW, W.tau)
        if W.tau == k + 1:
            return TailRegime(BOUNDARY, W.tau)
    if math.isfinite(W.moment(k)):
        return TailRegime(FINITE_MOMENT)
    raise OutOfScopeError(f"E[W^{k}] is infinite but W is not a pure power law")


def make_weights(spec) -> WeightModel:
    """Build a weight law from ``{"type": ..., ...}``."""
    if isinstance(spec, WeightModel):
        return spec
    spec = dict(spec)
    kind = spec.pop("type", None)
    allowed = {
        "deterministic": {"w"},
        "discrete": {"values", "probs"},
        "pareto": {"tau", "w_min"},
        "tabulated": {"w", "density", "csv"},
    }
    if kind not in allowed:
        raise DomainError(f"unknown weight type {kind!r}; choose from {sorted(allowed)}")
    extra = set(spec) - allowed[kind]
    if extra:
        raise DomainError(f"unknown keys for weights {kind!r}: {sorted(extra)}")
    if kind == "deterministic":
        return Deterministic(float(spec.get("w", 1.0)))
    if kind == "discrete":
        return Discrete(spec["values"], spec["probs"])
    if kind == "pareto":
        if "tau" not in spec:
            raise DomainError("pareto weights require 'tau'")
        return Pareto(float(spec["tau"]), float(spec.get("w_min", 1.0)))
    if "csv" in spec:
        table = np.loadtxt(spec["csv"], delimiter=",", ndmin=2, comments="#")
        return TabulatedDensity(table[:, 0], table[:, 1])
    return TabulatedDensity(spec["w"], spec["density"])
