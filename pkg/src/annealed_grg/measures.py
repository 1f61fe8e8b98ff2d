"""Single-spin a priori measures on [-1, 1] and their tilted cumulants.

A :class:`SpinMeasure` is stored as a finite weighted point set: the atoms
plus a precomputed quadrature rule for the density part, with the density
already folded into the node masses.  Every integral against the measure is a
weighted sum over those points, so all operations here are exact for atoms
and quadrature-exact for densities.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg, special, stats

from .errors import (
    DomainError,
    EvaluationError,
    NotFoundError,
    UnsupportedOrderError,
)

DEFAULT_QUAD_ORDER = 200
STEP_DEFAULT_B = 2.0 * (59.0 - 18.0 * math.sqrt(10.0))
MAX_CUMULANT_ORDER = 10

_MASS_TOL = 1e-12
_SYMMETRY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Observable:
    """Single-spin function g on [-1, 1].

    ``odd`` and ``sign_matched`` are claims checked by :func:`check_observable`
    against the nodes of a measure.
    """

    func: Callable[[np.ndarray], np.ndarray]
    odd: bool = True
    sign_matched: bool = True
    name: str = "custom"
    g_min: float = field(init=False)
    g_max: float = field(init=False)

    def __post_init__(self):
        grid = np.linspace(-1.0, 1.0, 4001)
        vals = np.asarray(self.func(grid), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"observable {self.name!r} is not finite on [-1, 1]")
        object.__setattr__(self, "g_min", float(vals.min()))
        object.__setattr__(self, "g_max", float(vals.max()))

    def __call__(self, s):
        return np.asarray(self.func(np.asarray(s, dtype=float)), dtype=float)

    @property
    def bound(self) -> float:
        """sup |g| on [-1, 1]."""
        return max(abs(self.g_min), abs(self.g_max))


IDENTITY = Observable(lambda s: s, odd=True, sign_matched=True, name="identity")

_OBSERVABLES = {
    "identity": IDENTITY,
    "cube": Observable(lambda s: s**3, True, True, "cube"),
    "sin_half_pi": Observable(lambda s: np.sin(0.5 * np.pi * s), True, True, "sin_half_pi"),
}


def make_observable(spec) -> Observable:
    """Build an observable from a name or ``{"type": name}``."""
    if spec is None:
        return IDENTITY
    if isinstance(spec, Observable):
        return spec
    name = spec if isinstance(spec, str) else spec.get("type")
    if isinstance(spec, dict) and set(spec) - {"type"}:
        raise DomainError(f"unknown observable keys: {sorted(set(spec) - {'type'})}")
    try:
        return _OBSERVABLES[name]
    except KeyError:
        raise DomainError(
            f"unknown observable {name!r}; choose from {sorted(_OBSERVABLES)}"
        ) from None


def check_observable(g: Observable, points) -> None:
    """Verify the oddness / sign claims of ``g`` at the given points."""
    pts = np.asarray(points, dtype=float)
    if g.odd:
        err = np.abs(g(-pts) + g(pts))
        if err.size and err.max() > 1e-14:
            raise DomainError(f"observable {g.name!r} claims odd but is not")
    if g.sign_matched:
        if np.any(np.sign(g(pts)) != np.sign(pts)):
            raise DomainError(f"observable {g.name!r} claims sgn(g) = sgn(sigma) but is not")


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpinMeasure:
    """Probability measure on [-1, 1]: atoms plus a density given by a quadrature rule.

    ``node_weights`` are probability masses (quadrature weight times normalized
    density), so ``atom_weights.sum() + node_weights.sum() == 1``.
    """

    atoms: np.ndarray
    atom_weights: np.ndarray
    nodes: np.ndarray
    node_weights: np.ndarray
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    symmetric: bool = False
    name: str = "measure"
    params: dict = field(default_factory=dict)
    ppf: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        for attr in ("atoms", "atom_weights", "nodes", "node_weights"):
            arr = np.atleast_1d(np.asarray(getattr(self, attr), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        if self.atoms.shape != self.atom_weights.shape:
            raise DomainError("atoms and atom_weights differ in length")
        if self.nodes.shape != self.node_weights.shape:
            raise DomainError("nodes and node_weights differ in length")
        pts = self.points
        if pts.size == 0:
            raise DomainError("measure has no support points")
        if np.any(np.abs(pts) > 1.0):
            raise DomainError("support points must lie in [-1, 1]")
        if np.any(self.probs <= 0.0):
            raise DomainError("atom and quadrature weights must be positive")
        total = self.probs.sum()
        if abs(total - 1.0) > _MASS_TOL:
            raise DomainError(f"total mass {total!r} differs from 1")
        if self.symmetric:
            for j in range(5):
                odd_moment = float(np.dot(self.probs, pts ** (2 * j + 1)))
                if abs(odd_moment) > _SYMMETRY_TOL:
                    raise DomainError(
                        f"measure flagged symmetric but moment {2 * j + 1} is {odd_moment:.3g}"
                    )

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([self.atoms, self.nodes])

    @property
    def probs(self) -> np.ndarray:
        return np.concatenate([self.atom_weights, self.node_weights])

    @property
    def is_atomic(self) -> bool:
        return self.nodes.size == 0

    def describe(self) -> dict:
        return {
            "name": self.name,
            **self.params,
            "n_atoms": int(self.atoms.size),
            "n_nodes": int(self.nodes.size),
            "symmetric": self.symmetric,
        }


def _normalized(weights):
    w = np.asarray(weights, dtype=float)
    return w / w.sum()


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def ising() -> SpinMeasure:
    return SpinMeasure(
        atoms=[-1.0, 1.0],
        atom_weights=[0.5, 0.5],
        nodes=[],
        node_weights=[],
        symmetric=True,
        name="ising",
        ppf=lambda u: np.where(np.asarray(u) < 0.5, -1.0, 1.0),
    )


def discrete(locations, weights, name="discrete") -> SpinMeasure:
    loc = np.asarray(locations, dtype=float)
    w = _normalized(weights)
    order = np.argsort(loc)
    loc, w = loc[order], w[order]
    symmetric = bool(np.allclose(loc, -loc[::-1], atol=1e-15) and np.allclose(w, w[::-1], rtol=1e-13))
    return SpinMeasure(
        atoms=loc,
        atom_weights=w,
        nodes=[],
        node_weights=[],
        symmetric=symmetric,
        name=name,
        params={"locations": loc.tolist(), "weights": w.tolist()},
    )


def _gauss_jacobi_symmetric(n: int, a: float):
    """Golub-Welsch for the weight (1 - s^2)^a.

    scipy's roots_jacobi drifts to ~1e-11 for a < 0 at n = 200; the eigenvector
    route stays at round-off.
    """
    k = np.arange(1, n, dtype=float)
    num = k * (k + 2.0 * a)
    den = (2.0 * k + 2.0 * a + 1.0) * (2.0 * k + 2.0 * a - 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        # den vanishes only at a = -1/2, k = 1 (Chebyshev), where the limit is 1/2
        b2 = np.where(den == 0.0, 0.5, num / den)
    x, v = linalg.eigh_tridiagonal(np.zeros(n), np.sqrt(b2))
    return x, v[0] ** 2


def beta(b: float, n: int = DEFAULT_QUAD_ORDER) -> SpinMeasure:
    """Beta(b, b) stretched to [-1, 1]: density proportional to (1 - s^2)^(b - 1).

    The Gauss-Jacobi rule carries the endpoint factor exactly, so b < 1 works.
    """
    if not b > 0:
        raise DomainError(f"beta measure requires b > 0, got {b}")
    x, w = _gauss_jacobi_symmetric(n, b - 1.0)
    # the rule is symmetric; average mirrored weights to remove round-off asymmetry
    w = 0.5 * (w + w[::-1])
    x = 0.5 * (x - x[::-1])
    log_norm = (2.0 * b - 1.0) * math.log(2.0) + special.betaln(b, b)

    def density(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.exp((b - 1.0) * np.log1p(-s * s) - log_norm)

    return SpinMeasure(
        atoms=[],
        atom_weights=[],
        nodes=x,
        node_weights=_normalized(w),
        density=density,
        symmetric=True,
        name="beta",
        params={"b": float(b)},
        ppf=lambda u: 2.0 * stats.beta.ppf(u, b, b) - 1.0,
    )


def uniform(n: int = DEFAULT_QUAD_ORDER) -> SpinMeasure:
    x, w = gauss_legendre(n)
    w = 0.5 * (w + w[::-1])
    return SpinMeasure(
        atoms=[],
        atom_weights=[],
        nodes=x,
        node_weights=_normalized(w),
        density=lambda s: np.full_like(np.asarray(s, dtype=float), 0.5),
        symmetric=True,
        name="uniform",
        ppf=lambda u: 2.0 * np.asarray(u) - 1.0,
    )


def step(b: float = STEP_DEFAULT_B, n: int = DEFAULT_QUAD_ORDER) -> SpinMeasure:
    """Density 1 on |s| > 1/3 and b on |s| <= 1/3, normalized by (4 + 2b)/3.

    The quadrature is split into three panels meeting at +-1/3.
    """
    if not b > 0:
        raise DomainError(f"step measure requires b > 0, got {b}")
    if not math.isclose(b, STEP_DEFAULT_B, rel_tol=1e-14):
        warnings.warn(
            f"step density with b={b!r}: only b = 2(59 - 18 sqrt 10) kills the fourth cumulant",
            stacklevel=2,
        )
    norm = (4.0 + 2.0 * b) / 3.0
    per_panel = max(4, -(-n // 3))
    xs, ws = [], []
    for lo, hi, height in ((-1.0, -1.0 / 3.0, 1.0), (-1.0 / 3.0, 1.0 / 3.0, b), (1.0 / 3.0, 1.0, 1.0)):
        x, w = gauss_legendre(per_panel, lo, hi)
        xs.append(x)
        ws.append(w * height / norm)
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    w = 0.5 * (w + w[::-1])

    def density(s):
        s = np.asarray(s, dtype=float)
        return np.where(np.abs(s) <= 1.0 / 3.0, b, 1.0) / norm

    outer = (2.0 / 3.0) / norm  # mass of each outer panel

    def ppf(u):
        u = np.asarray(u, dtype=float)
        inner_mass = 1.0 - 2.0 * outer
        return np.where(
            u < outer,
            -1.0 + u * norm,
            np.where(
                u < outer + inner_mass,
                -1.0 / 3.0 + (u - outer) * norm / b,
                1.0 / 3.0 + (u - outer - inner_mass) * norm,
            ),
        )

    return SpinMeasure(
        atoms=[],
        atom_weights=[],
        nodes=x,
        node_weights=_normalized(w),
        density=density,
        symmetric=True,
        name="step",
        params={"b": float(b), "normalizer": norm},
        ppf=ppf,
    )


def sphere_marginal(q: int, n: int = DEFAULT_QUAD_ORDER) -> SpinMeasure:
    """Law of e_1 . sigma for sigma uniform on S^q: density (1 - t^2)^(q/2 - 1)."""
    if isinstance(q, bool) or int(q) != q or q < 1:
        raise DomainError(f"sphere_marginal requires an integer q >= 1, got {q!r}")
    mu = beta(q / 2.0, n)
    return SpinMeasure(
        atoms=mu.atoms,
        atom_weights=mu.atom_weights,
        nodes=mu.nodes,
        node_weights=mu.node_weights,
        density=mu.density,
        symmetric=True,
        name="sphere_marginal",
        params={"q": int(q)},
        ppf=mu.ppf,
    )


def tabulated(sigma, values, n: int = DEFAULT_QUAD_ORDER) -> SpinMeasure:
    """Density given by (sigma, value) pairs, interpolated linearly, zero outside."""
    s = np.asarray(sigma, dtype=float)
    v = np.asarray(values, dtype=float)
    if s.ndim != 1 or s.shape != v.shape or s.size < 2:
        raise DomainError("tabulated density needs matching 1-d sigma/value arrays of length >= 2")
    if np.any(np.diff(s) <= 0):
        raise DomainError("tabulated sigma values must be strictly increasing")
    if s[0] < -1.0 or s[-1] > 1.0:
        raise DomainError("tabulated sigma values must lie in [-1, 1]")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise DomainError("tabulated density values must be finite and nonnegative")
    panels = s.size - 1
    per_panel = max(4, -(-n // panels))
    xs, ws = [], []
    for lo, hi in zip(s[:-1], s[1:]):
        x, w = gauss_legendre(per_panel, lo, hi)
        xs.append(x)
        ws.append(w * np.interp(x, s, v))
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    mass = w.sum()
    if not mass > 0:
        raise DomainError("tabulated density has zero mass")
    keep = w > 0
    x, w = x[keep], w[keep]
    symmetric = bool(np.allclose(s, -s[::-1], atol=1e-14) and np.allclose(v, v[::-1], rtol=1e-12))
    if symmetric:
        # mirrored panels give mirrored nodes; enforce exact symmetry of the rule
        w = 0.5 * (w + w[::-1])
        x = 0.5 * (x - x[::-1])

    # inverse CDF of a piecewise-linear density: quadratic inversion per panel
    panel_mass = 0.5 * (v[:-1] + v[1:]) * np.diff(s)
    cdf_knots = np.concatenate([[0.0], np.cumsum(panel_mass)]) / mass

    def ppf(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        idx = np.clip(np.searchsorted(cdf_knots, u, side="right") - 1, 0, panels - 1)
        a, width = v[idx] / mass, np.diff(s)[idx]
        slope = (v[idx + 1] - v[idx]) / mass / width
        r = u - cdf_knots[idx]
        disc = np.sqrt(np.maximum(a * a + 2.0 * slope * r, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = np.where(np.abs(slope) > 1e-14, (disc - a) / slope, r / np.where(a > 0, a, 1.0))
        return np.clip(s[idx] + dx, s[idx], s[idx + 1])

    return SpinMeasure(
        atoms=[],
        atom_weights=[],
        nodes=x,
        node_weights=w / w.sum(),
        density=lambda t: np.interp(t, s, v, left=0.0, right=0.0) / mass,
        symmetric=symmetric,
        name="tabulated",
        params={"n_knots": int(s.size)},
        ppf=ppf,
    )


def make_measure(spec) -> SpinMeasure:
    """Build a measure from a config mapping such as ``{"type": "beta", "b": 2}``.

    Types: ising, uniform, beta(b), step(b), sphere_marginal(q),
    discrete(locations, weights), tabulated(sigma, values) or tabulated(csv).
    ``n`` sets the quadrature order for density types.
    """
    if isinstance(spec, SpinMeasure):
        return spec
    if isinstance(spec, str):
        spec = {"type": spec}
    spec = dict(spec)
    kind = spec.pop("type", None)
    allowed = {
        "ising": set(),
        "uniform": {"n"},
        "beta": {"b", "n"},
        "step": {"b", "n"},
        "sphere_marginal": {"q", "n"},
        "discrete": {"locations", "weights"},
        "tabulated": {"sigma", "values", "csv", "n"},
    }
    if kind not in allowed:
        raise DomainError(f"unknown measure type {kind!r}; choose from {sorted(allowed)}")
    extra = set(spec) - allowed[kind]
    if extra:
        raise DomainError(f"unknown keys for measure {kind!r}: {sorted(extra)}")
    n = int(spec.get("n", DEFAULT_QUAD_ORDER))
    if kind == "ising":
        return ising()
    if kind == "uniform":
        return uniform(n)
    if kind == "beta":
        if "b" not in spec:
            raise DomainError("beta measure requires 'b'")
        return beta(float(spec["b"]), n)
    if kind == "step":
        return step(float(spec.get("b", STEP_DEFAULT_B)), n)
    if kind == "sphere_marginal":
        if "q" not in spec:
            raise DomainError("sphere_marginal measure requires 'q'")
        return sphere_marginal(spec["q"], n)
    if kind == "discrete":
        return discrete(spec["locations"], spec["weights"])
    if "csv" in spec:
        table = np.loadtxt(spec["csv"], delimiter=",", ndmin=2, comments="#")
        return tabulated(table[:, 0], table[:, 1], n)
    return tabulated(spec["sigma"], spec["values"], n)


# ---------------------------------------------------------------------------
# Integrals and cumulants
# ---------------------------------------------------------------------------


def _eval(f, points):
    vals = np.asarray(f(points), dtype=float)
    if vals.shape != points.shape:
        vals = np.broadcast_to(vals, points.shape) if vals.ndim == 0 else np.array(
            [float(f(p)) for p in points]
        )
    bad = ~np.isfinite(vals)
    if bad.any():
        node = float(points[np.argmax(bad)])
        raise EvaluationError(f"integrand is not finite at node {node!r}")
    return vals


def integrate(mu: SpinMeasure, f) -> float:
    """Integral of f against mu: atom sum plus quadrature sum."""
    pts = mu.points
    return float(np.dot(mu.probs, _eval(f, pts)))


def log_mgf(mu: SpinMeasure, g: Observable, t: float) -> float:
    """log mu(exp(t g)), evaluated with a max shift."""
    a = t * g(mu.points)
    top = a.max()
    return float(top + math.log(np.dot(mu.probs, np.exp(a - top))))


def _tilted_weights(mu, gv, t):
    a = t * gv
    w = mu.probs * np.exp(a - a.max())
    return w / w.sum()


def tilted_central_moment(mu: SpinMeasure, g: Observable, t: float, order: int) -> float:
    """Mean (order 1) or central moment (order 2, 3) of g under d nu_t ~ e^{t g} d mu.

    These are the first three t-derivatives of :func:`log_mgf`.
    """
    if order not in (1, 2, 3):
        raise UnsupportedOrderError(f"order must be 1, 2 or 3, got {order}")
    gv = g(mu.points)
    w = _tilted_weights(mu, gv, t)
    mean = float(np.dot(w, gv))
    if order == 1:
        return mean
    d = gv - mean
    return float(np.dot(w, d**order))


def tilted_means(mu: SpinMeasure, g: Observable, t) -> np.ndarray:
    """Vectorized tilted mean of g for an array of tilts ``t``."""
    t = np.asarray(t, dtype=float)
    gv = g(mu.points)
    a = np.multiply.outer(t, gv)
    a -= a.max(axis=-1, keepdims=True)
    w = np.exp(a) * mu.probs
    return (w @ gv) / w.sum(axis=-1)


def log_mgfs(mu: SpinMeasure, g: Observable, t) -> np.ndarray:
    """Vectorized :func:`log_mgf` over an array of tilts."""
    t = np.asarray(t, dtype=float)
    a = np.multiply.outer(t, g(mu.points))
    top = a.max(axis=-1)
    return top + np.log(np.exp(a - top[..., None]) @ mu.probs)


def raw_moments(mu: SpinMeasure, g: Observable, j_max: int) -> np.ndarray:
    """m_0 .. m_{j_max} of g under mu."""
    gv = g(mu.points)
    powers = np.vander(gv, j_max + 1, increasing=True)
    return mu.probs @ powers


def cumulants_from_moments(m) -> np.ndarray:
    """kappa_1 .. kappa_n from raw moments m_0 .. m_n (m_0 must be 1)."""
    n = len(m) - 1
    kappa = np.zeros(n + 1)
    for r in range(1, n + 1):
        acc = m[r]
        for k in range(1, r):
            acc -= math.comb(r - 1, k - 1) * kappa[k] * m[r - k]
        kappa[r] = acc
    return kappa[1:]


def cumulants(mu: SpinMeasure, g: Observable, j_max: int) -> np.ndarray:
    """All cumulants kappa_1 .. kappa_{j_max} of g under mu (no order cap)."""
    return cumulants_from_moments(raw_moments(mu, g, j_max))


def cumulant(mu: SpinMeasure, g: Observable, j: int) -> float:
    """j-th cumulant of g under mu at zero tilt, 1 <= j <= 10."""
    if not 1 <= j <= MAX_CUMULANT_ORDER:
        raise UnsupportedOrderError(f"cumulant order must be in 1..{MAX_CUMULANT_ORDER}, got {j}")
    return float(cumulants(mu, g, j)[j - 1])


def detect_k(mu: SpinMeasure, g: Observable, k_max: int = MAX_CUMULANT_ORDER, tol: float = 1e-9) -> int:
    """Smallest even k >= 4 whose cumulant is below -tol."""
    if not mu.symmetric or not g.odd:
        raise DomainError("detect_k needs a symmetric measure and an odd observable")
    if k_max > MAX_CUMULANT_ORDER:
        raise UnsupportedOrderError(f"k_max must be <= {MAX_CUMULANT_ORDER}")
    kappa = cumulants(mu, g, k_max)
    odd = kappa[0::2]
    if np.any(np.abs(odd) > tol):
        raise DomainError(f"odd cumulants do not vanish: {odd.tolist()}")
    for k in range(4, k_max + 1, 2):
        if kappa[k - 1] < -tol:
            return k
    raise NotFoundError(
        f"no even cumulant of order 4..{k_max} is below -{tol:g}", cumulants=kappa.tolist()
    )


@dataclass(frozen=True)
class ConcavityReport:
    passed: bool
    worst_value: float
    worst_t: float
    t_grid: np.ndarray
    values: np.ndarray


def concavity_scan(
    mu: SpinMeasure,
    g: Observable,
    t_max: float = 20.0,
    n_points: int = 400,
    t_min_ratio: float = 1e-4,
) -> ConcavityReport:
    """Check that the tilted third cumulant of g is negative on (0, t_max].

    The grid is geometric from ``t_max * t_min_ratio`` to ``t_max``.
    """
    if not t_max > 0 or n_points < 2:
        raise DomainError("concavity_scan needs t_max > 0 and n_points >= 2")
    t_grid = np.geomspace(t_max * t_min_ratio, t_max, n_points)
    gv = g(mu.points)
    a = np.multiply.outer(t_grid, gv)
    a -= a.max(axis=1, keepdims=True)
    w = np.exp(a) * mu.probs
    w /= w.sum(axis=1, keepdims=True)
    mean = w @ gv
    d = gv[None, :] - mean[:, None]
    values = np.einsum("ij,ij->i", w, d**3)
    worst = int(np.argmax(values))
    return ConcavityReport(
        passed=bool(np.all(values < 0.0)),
        worst_value=float(values[worst]),
        worst_t=float(t_grid[worst]),
        t_grid=t_grid,
        values=values,
    )


def tilt_field(mu: SpinMeasure, g: Observable, h: float) -> SpinMeasure:
    """Exponentially tilted measure e^{h g} mu / mu(e^{h g})."""
    if not math.isfinite(h):
        raise DomainError("field h must be finite")
    if h == 0.0:
        return mu
    ga, gn = g(mu.atoms), g(mu.nodes)
    top = h * max(ga.max(initial=-np.inf), gn.max(initial=-np.inf))
    wa = mu.atom_weights * np.exp(h * ga - top)
    wn = mu.node_weights * np.exp(h * gn - top)
    z = wa.sum() + wn.sum()
    density = None
    if mu.density is not None:
        base = mu.density
        log_z = math.log(z) + top

        def density(s):
            s = np.asarray(s, dtype=float)
            return base(s) * np.exp(h * g(s) - log_z)

    return SpinMeasure(
        atoms=mu.atoms,
        atom_weights=wa / z,
        nodes=mu.nodes,
        node_weights=wn / z,
        density=density,
        symmetric=False,
        name=f"{mu.name}|h={h:g}",
        params={**mu.params, "h": float(h)},
    )
