"""Mean-field fixed points and the annealed pressure.

Rank-2 kernels reduce the fixed point to the scalar equation m / theta = phi(m),
phi(m) = E^sb[ E_{W m + h}[g] ], the size-biased average of the tilted mean of g.
General grid kernels are handled by damped Picard iteration of the potential
map V -> T(V) on the spin nodes.

Near criticality phi(m) - m / theta_c is many orders of magnitude smaller than
either term, so the scalar solver works with the remainder
R(t) = E_t[g] - kappa_2 t of the tilted mean, evaluated from its cumulant
series for small t.  This keeps the root accurate down to m ~ 1e-300.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
from scipy import optimize

from .errors import DegenerateModelError, DomainError, NonConvergenceError, SolverError
from .kernels import GridKernel, Kernel, Rank2Kernel, grid_on_measure
from .measures import (
    IDENTITY,
    ConcavityReport,
    Observable,
    SpinMeasure,
    check_observable,
    concavity_scan,
    cumulants,
    integrate,
    log_mgf,
    log_mgfs,
    tilt_field,
    tilted_means,
)
from .weights import WeightModel

SERIES_ORDER = 16
DEFAULT_TOL = 1e-12
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Spin measure alpha_0, observable g, kernel, weight law and field h."""

    measure: SpinMeasure
    observable: Observable
    kernel: Kernel
    weights: WeightModel
    h: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.h):
            raise DomainError("field h must be finite")
        if not self.kernel.is_positive():
            raise DomainError("kernel is not strictly positive")

    @property
    def is_rank2(self) -> bool:
        return isinstance(self.kernel, Rank2Kernel)

    @property
    def theta(self) -> float:
        return self._rank2().theta

    @cached_property
    def alpha(self) -> SpinMeasure:
        """The field-tilted single-spin measure."""
        return tilt_field(self.measure, self.observable, self.h)

    @cached_property
    def certificate(self) -> ConcavityReport:
        return concavity_scan(self.measure, self.observable)

    @cached_property
    def _series(self):
        mu, g = self.measure, self.observable
        kappa = cumulants(mu, g, SERIES_ORDER)
        k2 = float(kappa[1])
        if not k2 > 0:
            raise DegenerateModelError("g has zero variance under the spin measure")
        orders = np.arange(4, SERIES_ORDER + 1, 2)
        coef = np.array([kappa[j - 1] / math.factorial(j - 1) for j in orders])
        last = abs(coef[-1])
        # the last kept term is below 4 eps of the linear term for |t| < t_s
        t_s = 1.0 if last == 0.0 else min(1.0, (4.0 * _EPS * k2 / last) ** (1.0 / (orders[-1] - 2)))
        return k2, orders - 1, coef, t_s

    def with_theta(self, theta: float) -> "ModelSpec":
        return replace(self, kernel=self._rank2().with_theta(theta))

    def with_h(self, h: float) -> "ModelSpec":
        return replace(self, h=float(h))

    def _rank2(self) -> Rank2Kernel:
        if not isinstance(self.kernel, Rank2Kernel):
            raise DomainError("this operation needs a rank-2 kernel")
        return self.kernel

    def check_rank2(self) -> Rank2Kernel:
        """Return the rank-2 kernel after checking the symmetric setup it needs."""
        K = self._rank2()
        if not self.measure.symmetric:
            raise DomainError("the scalar reduction needs a symmetric spin measure")
        if not (self.observable.odd and self.observable.sign_matched):
            raise DomainError("the scalar reduction needs an odd, sign-matched observable")
        check_observable(self.observable, self.measure.points)
        if K.g is not self.observable:
            raise DomainError("kernel observable differs from the model observable")
        return K

    def remainder(self, t) -> np.ndarray:
        """R(t) = E_t[g] - kappa_2 t under the untilted measure."""
        t = np.asarray(t, dtype=float)
        k2, powers, coef, t_s = self._series
        out = np.empty_like(t)
        small = np.abs(t) < t_s
        if small.any():
            ts = t[small]
            out[small] = np.power.outer(ts, powers) @ coef
        if (~small).any():
            tb = t[~small]
            out[~small] = tilted_means(self.measure, self.observable, tb) - k2 * tb
        return out

    def describe(self) -> dict:
        return {
            "measure": self.measure.describe(),
            "observable": self.observable.name,
            "kernel": self.kernel.describe(),
            "weights": self.weights.describe(),
            "h": self.h,
        }


def _sb_scaled(W: WeightModel, F, m: float, linear: float = 0.0) -> float:
    # E^sb[F(W m)] for either sign of m
    if m < 0:
        return W.size_biased_scaled(lambda s: F(-s), -m, -linear)
    return W.size_biased_scaled(F, m, linear)


def _scaled(W: WeightModel, F, m: float, linear: float = 0.0) -> float:
    if m < 0:
        return W.scaled_expect(lambda s: F(-s), -m, -linear)
    return W.scaled_expect(F, m, linear)


# ---------------------------------------------------------------------------
# scalar (rank-2) path
# ---------------------------------------------------------------------------


def phi(model: ModelSpec, m: float) -> float:
    """E^sb of the tilted mean of g at tilt W m + h."""
    model.check_rank2()
    mu, g, h = model.measure, model.observable, model.h
    return _sb_scaled(model.weights, lambda s: tilted_means(mu, g, s + h), m)


def theta_c(model: ModelSpec) -> float:
    """1 / (E^sb[W] alpha_0(g^2))."""
    g = model.observable
    var = integrate(model.measure, lambda s: g(s) ** 2)
    if not var > 0:
        raise DegenerateModelError("g^2 integrates to zero under the spin measure")
    return 1.0 / (model.weights.sb_mean * var)


def ising_beta_c(W: WeightModel) -> float:
    """Inverse temperature where the annealed Ising model orders: sinh(beta_c) = theta_c."""
    from .kernels import ising_to_rank2
    from .measures import ising

    return math.asinh(theta_c(ModelSpec(ising(), IDENTITY, ising_to_rank2(0.0), W)))


@dataclass(frozen=True)
class FixedPointResult:
    m_plus: float
    residual: float
    iterations: int
    bracket: tuple
    phi_at_solution: float
    theta: float
    h: float
    certified: bool
    method: str = "brentq"

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "h": self.h,
            "m_plus": self.m_plus,
            "residual": self.residual,
            "iterations": self.iterations,
            "certified": self.certified,
        }


def _excess_rate(model: ModelSpec, theta: float, tc: float):
    """q(x) = theta phi(e^x) / e^x - 1, assembled so that no large terms cancel."""
    k2 = model._series[0]
    W, h = model.weights, model.h
    lead = theta / tc - 1.0

    def q(x):
        m = math.exp(x)
        A = W.size_biased_scaled(lambda s: model.remainder(s + h), m, -k2)
        return lead + theta * (k2 * h + A) / m

    return q


def solve_m(
    model: ModelSpec,
    tol: float = DEFAULT_TOL,
    method: str = "brentq",
    max_iter: int = 500,
) -> FixedPointResult:
    """Nonnegative root of m / theta = phi(m) (negative for h < 0, by spin flip).

    The root is bracketed and refined in log m, so ``tol`` is a relative
    tolerance on m.  ``method`` is ``"brentq"`` or ``"bisect"``.
    """
    K = model.check_rank2()
    theta, h = K.theta, model.h
    if h < 0:
        res = solve_m(model.with_h(-h), tol, method, max_iter)
        return replace(res, m_plus=-res.m_plus, phi_at_solution=-res.phi_at_solution, h=h)
    certified = model.certificate.passed
    tc = theta_c(model)
    if theta < 0:
        raise DomainError("negative theta is outside the ferromagnetic scalar reduction")
    if theta == 0.0 or (h == 0.0 and theta <= tc):
        return FixedPointResult(0.0, 0.0, 0, (0.0, 0.0), phi(model, 0.0), theta, h, certified, method)

    q = _excess_rate(model, theta, tc)
    x_hi = math.log(theta * K.g.bound)
    q_hi = q(x_hi)
    if q_hi > 0:
        raise SolverError(f"no sign change: theta phi(m)/m - 1 = {q_hi:.3g} > 0 at the upper bracket")
    x_lo = x_hi
    for _ in range(160):
        x_lo -= math.log(100.0)
        if q(x_lo) > 0:
            break
    else:
        raise SolverError("could not bracket the root above m = 1e-300")
    if method == "brentq":
        x, info = optimize.brentq(q, x_lo, x_hi, xtol=tol, rtol=4 * _EPS, maxiter=max_iter, full_output=True)
    elif method == "bisect":
        x, info = optimize.bisect(q, x_lo, x_hi, xtol=tol, rtol=4 * _EPS, maxiter=max_iter, full_output=True)
    else:
        raise DomainError(f"unknown root-finding method {method!r}")
    if not info.converged:
        raise SolverError(f"root finder stopped: {info.flag}")
    m = math.exp(x)
    ph = phi(model, m)
    return FixedPointResult(
        m_plus=m,
        residual=abs(m / theta - ph),
        iterations=info.iterations,
        bracket=(math.exp(x_lo), math.exp(x_hi)),
        phi_at_solution=ph,
        theta=theta,
        h=h,
        certified=certified,
        method=method,
    )


def log_alpha_h(model: ModelSpec, t) -> np.ndarray:
    """log alpha_h(e^{t g}) = log alpha_0(e^{(t + h) g}) - log alpha_0(e^{h g})."""
    mu, g, h = model.measure, model.observable, model.h
    return log_mgfs(mu, g, np.asarray(t, dtype=float) + h) - log_mgf(mu, g, h)


def pressure_rank2(model: ModelSpec, fp: FixedPointResult) -> float:
    """(c/2) E[W] - E[W] m^2 / (2 theta) + E[log alpha_h(e^{W m g})]."""
    K = model.check_rank2()
    W, m = model.weights, fp.m_plus
    psi = 0.5 * K.c * W.mean
    if m == 0.0:
        return psi
    psi -= 0.5 * W.mean * m * m / K.theta
    slope = model.observable.g_max if m > 0 else -model.observable.g_min
    psi += _scaled(W, lambda s: log_alpha_h(model, s), m, slope)
    return psi


def pressure_profile(model: ModelSpec, m: float) -> float:
    """The pressure functional at an arbitrary m (maximized at m_plus)."""
    K = model.check_rank2()
    W = model.weights
    out = 0.5 * K.c * W.mean - 0.5 * W.mean * m * m / K.theta
    if m != 0.0:
        slope = model.observable.g_max if m > 0 else -model.observable.g_min
        out += _scaled(W, lambda s: log_alpha_h(model, s), m, slope)
    return out


# ---------------------------------------------------------------------------
# functional path
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PotentialSolution:
    V: np.ndarray
    residual: float
    iterations: int
    damping: float
    start: str
    nodes: np.ndarray
    residual_history: list = field(default_factory=list, repr=False)


class _Operator:
    """Precomputed pieces of V -> T(V) on the spin nodes."""

    def __init__(self, model: ModelSpec):
        alpha = model.alpha
        grid = grid_on_measure(model.kernel, alpha)
        self.nodes = alpha.points
        self.K = grid.matrix
        self.a = alpha.probs
        self.log_a = np.log(self.a)
        w, p = model.weights.rule()
        self.w, self.p = np.asarray(w, dtype=float), np.asarray(p, dtype=float)
        pw = self.p * self.w
        self.q = pw / pw.sum()
        self.mean_w = model.weights.mean

    def tilted(self, V):
        # rows: nu^{w_k, V}; also the log normalizers log alpha(e^{w_k V})
        A = np.multiply.outer(self.w, V) + self.log_a
        top = A.max(axis=1, keepdims=True)
        E = np.exp(A - top)
        Z = E.sum(axis=1, keepdims=True)
        return E / Z, (top + np.log(Z))[:, 0]

    def __call__(self, V):
        P, _ = self.tilted(V)
        return self.K @ (self.q @ P)

    def paramagnetic(self):
        return float(self.a @ self.K @ self.a)


def _start_vector(op: _Operator, model: ModelSpec, start, eps: float) -> tuple[np.ndarray, str]:
    base = np.full(op.nodes.shape, op.paramagnetic())
    if isinstance(start, str):
        if start == "paramagnetic":
            return base, start
        gv = model.observable(op.nodes)
        if start == "plus":
            return base + eps * gv, start
        if start == "minus":
            return base - eps * gv, start
        raise DomainError(f"unknown start {start!r}")
    V0 = np.asarray(start, dtype=float)
    if V0.shape != op.nodes.shape:
        raise DomainError(f"start vector has shape {V0.shape}, expected {op.nodes.shape}")
    return V0.copy(), "custom"


def solve_V_general(
    model: ModelSpec,
    damping: float = 0.5,
    tol: float = DEFAULT_TOL,
    max_iter: int = 20000,
    start: Union[str, np.ndarray] = "paramagnetic",
    eps: float = 0.5,
) -> PotentialSolution:
    """Damped Picard iteration V <- (1 - damping) V + damping T(V)."""
    if not 0 < damping <= 1:
        raise DomainError("damping must be in (0, 1]")
    op = _Operator(model)
    V, label = _start_vector(op, model, start, eps)
    history = []
    for it in range(1, max_iter + 1):
        TV = op(V)
        res = float(np.max(np.abs(TV - V)))
        history.append(res)
        if res < tol:
            return PotentialSolution(V, res, it, damping, label, op.nodes, history)
        V = (1.0 - damping) * V + damping * TV
    raise NonConvergenceError(
        f"Picard iteration did not reach {tol:g} in {max_iter} steps (last residual {history[-1]:.3g})",
        residual_history=history,
    )


def find_branches(
    model: ModelSpec,
    starts: Sequence = ("paramagnetic", "plus", "minus"),
    distinct_tol: float = 1e-6,
    **kwargs,
) -> list[PotentialSolution]:
    """Run the functional solver from several starts; keep the distinct limits."""
    found: list[PotentialSolution] = []
    for s in starts:
        sol = solve_V_general(model, start=s, **kwargs)
        if all(np.max(np.abs(sol.V - other.V)) > distinct_tol for other in found):
            found.append(sol)
    return found


def pressure_general(model: ModelSpec, sol: PotentialSolution) -> float:
    """-(E[W]/2) E^sb[nu^{W,V}(V)] + E[log alpha(e^{W V})]."""
    op = _Operator(model)
    P, log_z = op.tilted(sol.V)
    nu_V = P @ sol.V
    return float(-0.5 * op.mean_w * (op.q @ nu_V) + op.p @ log_z)


def best_branch(model: ModelSpec, sols: Sequence[PotentialSolution]) -> tuple[float, PotentialSolution]:
    """Largest pressure among the supplied fixed points, and the branch attaining it."""
    if not sols:
        raise DomainError("no fixed points supplied")
    scores = [pressure_general(model, s) for s in sols]
    best = max(scores)
    # symmetric branches tie up to rounding; keep the first one supplied
    idx = next(i for i, v in enumerate(scores) if v >= best - 1e-12 * max(1.0, abs(best)))
    return scores[idx], sols[idx]


def potential_from_m(model: ModelSpec, m: float) -> np.ndarray:
    """c + m g on the spin nodes: the fixed-point form for rank-2 kernels."""
    K = model.check_rank2()
    return K.c + m * model.observable(model.alpha.points)
