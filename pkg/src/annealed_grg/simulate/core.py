"""Finite-N ground truth for the annealed measure.

Exact enumeration for tiny N, and a joint edge-spin Gibbs sampler: given the
spins every pair is an independent Bernoulli edge, and given the edges each
spin sees only its neighbors.  The spin marginal of the joint chain is the
annealed measure.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import CapacityError, DomainError
from ..kernels import Rank2Kernel
from ..meanfield import ModelSpec, pressure_rank2, solve_m
from ..measures import SpinMeasure
from ..weights import weight_sequence
from . import _backend
from .rng import block_size, chain_keys, uniforms

__all__ = [
    "GRGInstance",
    "ChainState",
    "Sampler",
    "ExactResult",
    "MCResult",
    "edge_prob",
    "exact_annealed",
    "init_state",
    "joint_gibbs_sweep",
    "resample_edges",
    "run_chain",
    "run_mc",
    "limit_pressure",
    "MAX_STATES",
    "MAX_N",
    "batch_means",
]

MAX_STATES = 2**20
MAX_N = 10_000


@dataclass(frozen=True, eq=False)
class GRGInstance:
    weights: np.ndarray
    l_n: float = field(init=False)

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise DomainError("a graph instance needs at least two weights")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("vertex weights must be finite and positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "l_n", float(w.sum()))

    @property
    def N(self) -> int:
        return int(self.weights.size)

    @classmethod
    def from_model(cls, model: ModelSpec, N: int, mode: str = "quantile", seed=None) -> "GRGInstance":
        return cls(weight_sequence(model.weights, N, mode, seed))


def edge_prob(inst: GRGInstance, i: int, j: int) -> float:
    """w_i w_j / (l_N + w_i w_j)."""
    if i == j:
        raise DomainError("no self-loops: edge_prob needs i != j")
    ww = inst.weights[i] * inst.weights[j]
    return float(ww / (inst.l_n + ww))


def _pair_logs(inst: GRGInstance):
    iu, ju = np.triu_indices(inst.N, 1)
    ww = inst.weights[iu] * inst.weights[ju]
    return iu, ju, ww / (inst.l_n + ww)


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactResult:
    pressure: float
    magnetization: float
    abs_magnetization: float
    mean_spin: float
    n_states: int


def exact_annealed(inst: GRGInstance, kernel: Rank2Kernel, measure: SpinMeasure, h: float = 0.0,
                   g=None, chunk: int = 1 << 14) -> ExactResult:
    """Sum the annealed weight over every configuration of an atomic measure.

    The graph average is done in closed form: pairs contribute
    log(1 + p_ij (K(s_i, s_j) - 1)).  ``magnetization`` is the annealed mean of
    B_N = sum_i w_i g(s_i) / l_N; ``abs_magnetization`` the mean of |B_N|.
    """
    if not measure.is_atomic:
        raise DomainError("exact enumeration needs a measure with atoms only")
    g = kernel.g if g is None else g
    A = measure.atoms.size
    N = inst.N
    if A**N > MAX_STATES:
        raise CapacityError(f"{A}^{N} configurations exceed the limit of {MAX_STATES}")
    ga = g(measure.atoms)
    log_alpha = np.log(measure.atom_weights) + h * ga
    log_alpha -= np.logaddexp.reduce(log_alpha)
    iu, ju, p = _pair_logs(inst)
    # log(1 + p (K - 1)) for every pair and every atom pair
    Kab = kernel.c + kernel.theta * np.multiply.outer(ga, ga)
    pair_tab = np.log1p(p[:, None, None] * (Kab[None, :, :] - 1.0))
    w = inst.weights
    total = A**N
    radix = A ** np.arange(N - 1, -1, -1)
    log_w_chunks, B_chunks, S_chunks = [], [], []
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        conf = (idx[:, None] // radix[None, :]) % A
        lw = log_alpha[conf].sum(axis=1)
        lw += pair_tab[np.arange(p.size)[None, :], conf[:, iu], conf[:, ju]].sum(axis=1)
        log_w_chunks.append(lw)
        B_chunks.append(ga[conf] @ w / inst.l_n)
        S_chunks.append(measure.atoms[conf].mean(axis=1))
    lw = np.concatenate(log_w_chunks)
    B = np.concatenate(B_chunks)
    S = np.concatenate(S_chunks)
    top = lw.max()
    prob = np.exp(lw - top)
    Z = prob.sum()
    prob /= Z
    return ExactResult(
        pressure=float((top + math.log(Z)) / N),
        magnetization=float(prob @ B),
        abs_magnetization=float(prob @ np.abs(B)),
        mean_spin=float(prob @ S),
        n_states=int(total),
    )


# ---------------------------------------------------------------------------
# joint edge-spin sampler
# ---------------------------------------------------------------------------


@dataclass
class ChainState:
    spins: np.ndarray
    gs: np.ndarray
    labels: np.ndarray
    key: int
    sweep: int = 0
    edges: tuple = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))


class Sampler:
    """Per-model constants shared by every sweep of a chain."""

    def __init__(self, inst: GRGInstance, kernel: Rank2Kernel, measure: SpinMeasure, h: float, g=None):
        if not isinstance(kernel, Rank2Kernel):
            raise DomainError("the sampler supports rank-2 kernels only")
        self.inst, self.kernel, self.measure, self.h = inst, kernel, measure, float(h)
        self.g = kernel.g if g is None else g
        self.atomic = measure.is_atomic
        if self.atomic:
            self.atom_s = np.ascontiguousarray(measure.atoms, dtype=float)
            self.atom_g = np.ascontiguousarray(self.g(measure.atoms), dtype=float)
            lw = np.log(measure.atom_weights) + self.h * self.atom_g
            self.atom_logw = np.ascontiguousarray(lw - np.logaddexp.reduce(lw))
        else:
            if measure.atoms.size:
                raise DomainError("the sampler handles purely atomic or purely continuous measures")
            if measure.ppf is None:
                raise DomainError(f"measure {measure.name!r} has no quantile function for proposals")
            self.atom_s = self.atom_g = self.atom_logw = np.zeros(0)

    def proposals(self, key: int, sweep0: int, n_sweeps: int):
        N = self.inst.N
        if self.atomic:
            empty = np.zeros((n_sweeps, N))
            return empty, empty
        npairs = N * (N - 1) // 2
        ctr = (np.arange(sweep0, sweep0 + n_sweeps, dtype=np.uint64)[:, None] * np.uint64(block_size(N))
               + np.uint64(npairs) + np.arange(N, dtype=np.uint64)[None, :])
        s = np.ascontiguousarray(self.measure.ppf(uniforms(key, ctr)), dtype=float)
        return s, np.ascontiguousarray(self.g(s), dtype=float)


def init_state(inst: GRGInstance, measure: SpinMeasure, key: int, h: float = 0.0, g=None) -> ChainState:
    """Spins drawn i.i.d. from the field-tilted measure."""
    from ..measures import IDENTITY

    g = IDENTITY if g is None else g
    rng = np.random.Generator(np.random.Philox(key))
    N = inst.N
    if measure.is_atomic:
        ga = g(measure.atoms)
        lw = np.log(measure.atom_weights) + h * ga
        pr = np.exp(lw - lw.max())
        labels = rng.choice(measure.atoms.size, size=N, p=pr / pr.sum()).astype(np.int64)
        spins = measure.atoms[labels].astype(float)
    else:
        labels = np.full(N, -1, dtype=np.int64)
        spins = np.asarray(measure.ppf(rng.random(N)), dtype=float)
    return ChainState(np.ascontiguousarray(spins), np.ascontiguousarray(g(spins), dtype=float),
                      labels, int(key))


def run_chain(state: ChainState, sampler: Sampler, n_sweeps: int, backend: Optional[str] = None,
              chunk: int = 256) -> dict:
    """Advance ``state`` by ``n_sweeps``; returns the per-sweep observables."""
    kern = _backend.get(backend)
    out = {
        "B_N": np.empty(n_sweeps),
        "mean_spin": np.empty(n_sweeps),
        "energy_proxy": np.empty(n_sweeps),
        "edges_count": np.empty(n_sweeps, dtype=np.int64),
        "accepts": np.empty(n_sweeps, dtype=np.int64),
    }
    K = sampler.kernel
    done = 0
    while done < n_sweeps:
        m = min(chunk, n_sweeps - done)
        prop_s, prop_g = sampler.proposals(state.key, state.sweep, m)
        sl = slice(done, done + m)
        ei, ej = kern.run_sweeps(
            sampler.inst.weights, sampler.inst.l_n, state.spins, state.gs, state.labels,
            float(K.c), float(K.theta), sampler.h, np.uint64(state.key), state.sweep, m,
            sampler.atom_s, sampler.atom_g, sampler.atom_logw, prop_s, prop_g,
            out["B_N"][sl], out["mean_spin"][sl], out["energy_proxy"][sl],
            out["edges_count"][sl], out["accepts"][sl],
        )
        state.edges = (np.asarray(ei), np.asarray(ej))
        state.sweep += m
        done += m
    return out


def joint_gibbs_sweep(state: ChainState, inst: GRGInstance, kernel: Rank2Kernel, measure: SpinMeasure,
                      h: float = 0.0, backend: Optional[str] = None) -> ChainState:
    """One sweep: resample every edge given the spins, then every spin given the edges."""
    run_chain(state, Sampler(inst, kernel, measure, h), 1, backend)
    return state


def resample_edges(inst: GRGInstance, kernel: Rank2Kernel, g_values, key: int, sweeps) -> np.ndarray:
    """Edge-stage draws for fixed spin values, shape (len(sweeps), n_pairs).

    Uses the same counters as the sweep kernels, so row ``s`` is exactly the
    edge set the sampler draws in sweep ``s`` from these spins.
    """
    iu, ju, p = _pair_logs(inst)
    gv = np.asarray(g_values, dtype=float)
    K = kernel.c + kernel.theta * gv[iu] * gv[ju]
    prob = p * K / (1.0 + p * (K - 1.0))
    sweeps = np.atleast_1d(np.asarray(sweeps, dtype=np.uint64))
    ctr = sweeps[:, None] * np.uint64(block_size(inst.N)) + np.arange(p.size, dtype=np.uint64)[None, :]
    return uniforms(key, ctr) < prob[None, :]


@dataclass(frozen=True)
class MCResult:
    order_param_estimate: float
    stderr: float
    acceptance_rate: float
    mean_spin: float
    per_chain: list
    traces: list
    keys: list
    N: int
    sweeps: int
    burnin: int
    signed: bool

    def to_dict(self) -> dict:
        return {
            "order_param_estimate": self.order_param_estimate,
            "stderr": self.stderr,
            "acceptance_rate": self.acceptance_rate,
            "mean_spin": self.mean_spin,
            "per_chain": self.per_chain,
            "N": self.N,
            "sweeps": self.sweeps,
            "burnin": self.burnin,
            "signed": self.signed,
            "keys": [str(k) for k in self.keys],
        }


def batch_means(x: np.ndarray, n_batches: int = 20) -> tuple[float, float]:
    """Mean and batch-means standard error."""
    n = x.size // n_batches * n_batches
    if n < n_batches:
        raise DomainError("too few samples for batch means")
    b = x[x.size - n :].reshape(n_batches, -1).mean(axis=1)
    return float(x.mean()), float(b.std(ddof=1) / math.sqrt(n_batches))


def run_mc(
    model: ModelSpec,
    N: int,
    sweeps: int,
    burnin: int,
    seed: int,
    chains: int = 1,
    threads: int = 1,
    backend: Optional[str] = None,
    weight_mode: str = "quantile",
    n_batches: int = 20,
) -> MCResult:
    """Time average of |B_N| (h = 0) or B_N (h != 0) after burn-in, per chain and pooled."""
    if N < 2 or sweeps < 1 or burnin < 0 or chains < 1:
        raise DomainError("run_mc needs N >= 2, sweeps >= 1, burnin >= 0, chains >= 1")
    if N > MAX_N:
        raise DomainError(f"N = {N} exceeds the supported {MAX_N}")
    K = model.check_rank2()
    inst = GRGInstance.from_model(model, N, weight_mode, seed if weight_mode == "random" else None)
    sampler = Sampler(inst, K, model.measure, model.h, model.observable)
    keys = chain_keys(seed, chains)
    signed = model.h != 0.0

    def one(key):
        state = init_state(inst, model.measure, key, model.h, model.observable)
        run_chain(state, sampler, burnin, backend)
        return run_chain(state, sampler, sweeps, backend)

    if threads > 1 and chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(one, keys))
    else:
        traces = [one(k) for k in keys]
    ests, errs = [], []
    for tr in traces:
        x = tr["B_N"] if signed else np.abs(tr["B_N"])
        e, se = batch_means(x, n_batches)
        ests.append(e)
        errs.append(se)
    est = float(np.mean(ests))
    se = float(math.sqrt(sum(s * s for s in errs)) / chains)
    acc = float(sum(t["accepts"].sum() for t in traces) / (chains * sweeps * N))
    mean_spin = float(np.mean([t["mean_spin"].mean() for t in traces]))
    return MCResult(est, se, acc, mean_spin, ests, traces, keys, N, sweeps, burnin, signed)


def limit_pressure(model: ModelSpec) -> float:
    """N -> infinity limit of the finite-N annealed pressure (1/N) log Z_N.

    The mean-field pressure counts the pair term as (c/2) E[W]; the finite-N
    pressure of the pre-annealed product measures (c - 1) E[W] / 2 at theta = 0,
    so the two differ by E[W] / 2.
    """
    return pressure_rank2(model, solve_m(model)) - 0.5 * model.weights.mean
