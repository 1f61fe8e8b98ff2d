"""Pair interactions e^Phi: the rank-2 form c + theta g(s) g(s') and grid matrices.

Also the Ising <-> rank-2 conversion and the second-order variation bound used
to certify uniqueness of the functional fixed point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import DomainError
from .measures import IDENTITY, Observable, SpinMeasure
from .weights import WeightModel


@dataclass(frozen=True, eq=False)
class Rank2Kernel:
    c: float
    theta: float
    g: Observable = IDENTITY
    strict: bool = True

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"rank-2 kernel needs c > 0, got {self.c}")
        if self.strict and not self.is_positive():
            raise DomainError(
                f"kernel c + theta g g' is not strictly positive "
                f"(c = {self.c}, theta = {self.theta}, sup|g| = {self.g.bound})"
            )

    def is_positive(self) -> bool:
        return self.c - abs(self.theta) * self.g.bound**2 > 0

    def __call__(self, s, t):
        return self.c + self.theta * np.multiply.outer(self.g(s), self.g(t))

    def with_theta(self, theta: float) -> "Rank2Kernel":
        return Rank2Kernel(self.c, float(theta), self.g, self.strict)

    def to_grid(self, nodes) -> "GridKernel":
        nodes = np.asarray(nodes, dtype=float)
        return GridKernel(nodes, self(nodes, nodes), strict=self.strict)

    def describe(self) -> dict:
        return {"type": "rank2", "c": self.c, "theta": self.theta, "g": self.g.name}


@dataclass(frozen=True, eq=False)
class GridKernel:
    """e^Phi sampled at spin nodes; ``matrix[i, j] = e^{Phi(nodes[i], nodes[j])}``."""

    nodes: np.ndarray
    matrix: np.ndarray
    strict: bool = True

    def __post_init__(self):
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        mat = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if mat.shape != (nodes.size, nodes.size):
            raise DomainError(f"kernel matrix shape {mat.shape} does not match {nodes.size} nodes")
        if not np.all(np.isfinite(mat)):
            raise DomainError("kernel matrix has non-finite entries")
        nodes.setflags(write=False)
        mat.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "matrix", mat)
        if self.strict and not self.is_positive():
            raise DomainError(f"kernel matrix has non-positive entry {mat.min()!r}")

    def is_positive(self) -> bool:
        return bool(self.matrix.min() > 0)

    @property
    def symmetric(self) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.T, rtol=0.0, atol=1e-14))

    def describe(self) -> dict:
        return {
            "type": "grid",
            "n_nodes": int(self.nodes.size),
            "min": float(self.matrix.min()),
            "max": float(self.matrix.max()),
        }


Kernel = Union[Rank2Kernel, GridKernel]


# grid constructors


def grid_from_function(nodes, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> GridKernel:
    """Sample ``f(s, t) = e^{Phi(s, t)}`` on all node pairs (f must broadcast)."""
    nodes = np.asarray(nodes, dtype=float)
    return GridKernel(nodes, f(nodes[:, None], nodes[None, :]))


def ising_grid(beta: float, nodes) -> GridKernel:
    """The exponential form e^{beta s t}."""
    return grid_from_function(nodes, lambda s, t: np.exp(beta * s * t))


def grid_from_csv(path) -> GridKernel:
    """First row: nodes. Remaining rows: the square matrix of e^Phi values."""
    table = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    return GridKernel(table[0], table[1:])


def grid_on_measure(K: Kernel, mu: SpinMeasure) -> GridKernel:
    """Return K as a grid kernel on the support points of mu."""
    pts = mu.points
    if isinstance(K, Rank2Kernel):
        return K.to_grid(pts)
    if K.nodes.shape != pts.shape or np.max(np.abs(K.nodes - pts)) > 1e-12:
        raise DomainError("grid kernel nodes do not match the measure's support points")
    return K


# Ising correspondence


def ising_to_rank2(beta: float) -> Rank2Kernel:
    """e^{beta s t} on {-1, 1} as c + theta s t with c = cosh beta, theta = sinh beta."""
    return Rank2Kernel(math.cosh(beta), math.sinh(beta), IDENTITY)


def rank2_to_ising(c: float, theta: float) -> tuple[float, float]:
    """(c_tilde, beta) with c + theta s t = c_tilde e^{beta s t} on {-1, 1}."""
    if not c > abs(theta):
        raise DomainError(f"need c > |theta| for the Ising form, got c = {c}, theta = {theta}")
    return math.sqrt(c * c - theta * theta), 0.5 * math.log((c + theta) / (c - theta))


# uniqueness


def second_order_variation(K: Kernel, chunk: int = 64) -> float:
    """sup of f(s1,s3) - f(s2,s3) - f(s1,s4) + f(s2,s4) over nodes.

    For rank-2 kernels the closed form |theta| (max g - min g)^2 is returned.
    """
    if isinstance(K, Rank2Kernel):
        return abs(K.theta) * (K.g.g_max - K.g.g_min) ** 2
    F = K.matrix
    best = 0.0
    # sup over (s1, s2) of the range of the row difference F[s1] - F[s2]
    for start in range(0, F.shape[0], chunk):
        diff = F[start : start + chunk, None, :] - F[None, :, :]
        spread = diff.max(axis=-1) - diff.min(axis=-1)
        best = max(best, float(spread.max()))
    return best


@dataclass(frozen=True)
class UniquenessReport:
    lhs: float
    holds: bool
    sb_mean: float
    variation: float


def uniqueness_bound(K: Kernel, W: WeightModel) -> UniquenessReport:
    """E^sb[W] * delta2(e^Phi) / 2, and whether it is below 1."""
    sb = W.sb_mean
    if not math.isfinite(sb):
        raise DomainError("size-biased mean of W is infinite")
    var = second_order_variation(K)
    lhs = sb * 0.5 * var
    return UniquenessReport(lhs=lhs, holds=lhs < 1.0, sb_mean=sb, variation=var)


def validate_positive(K: Kernel) -> bool:
    return K.is_positive()


def make_kernel(spec, g: Observable = IDENTITY, mu: SpinMeasure | None = None) -> Kernel:
    """Kernel from a config dict.

    ``rank2``: c, theta.  ``ising``: beta (mapped to rank-2 with c = cosh beta).
    ``grid``: csv, or c/theta (rank-2 sampled on mu's points), or beta (exponential form).
    """
    if isinstance(spec, (Rank2Kernel, GridKernel)):
        return spec
    spec = dict(spec)
    kind = spec.pop("type", None)
    allowed = {
        "rank2": {"c", "theta"},
        "ising": {"beta"},
        "grid": {"csv", "c", "theta", "beta"},
    }
    if kind not in allowed:
        raise DomainError(f"unknown kernel type {kind!r}; choose from {sorted(allowed)}")
    extra = set(spec) - allowed[kind]
    if extra:
        raise DomainError(f"unknown keys for kernel {kind!r}: {sorted(extra)}")
    if kind == "rank2":
        for key in ("c", "theta"):
            if key not in spec:
                raise DomainError(f"rank2 kernel requires {key!r}")
        return Rank2Kernel(float(spec["c"]), float(spec["theta"]), g)
    if kind == "ising":
        if "beta" not in spec:
            raise DomainError("ising kernel requires 'beta'")
        return ising_to_rank2(float(spec["beta"]))
    if "csv" in spec:
        return grid_from_csv(spec["csv"])
    if mu is None:
        raise DomainError("grid kernels built from parameters need the spin measure")
    if "beta" in spec:
        return ising_grid(float(spec["beta"]), mu.points)
    if "c" in spec and "theta" in spec:
        return Rank2Kernel(float(spec["c"]), float(spec["theta"]), g).to_grid(mu.points)
    raise DomainError("grid kernel needs 'csv', 'beta', or both 'c' and 'theta'")
