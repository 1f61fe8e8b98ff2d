import itertools
import math

import numpy as np
import pytest

import oracles
from annealed_grg import kernels as Kn
from annealed_grg import measures as M
from annealed_grg import meanfield as mf
from annealed_grg import simulate as S
from annealed_grg import weights as Wt
from annealed_grg.errors import CapacityError, DomainError
from annealed_grg.simulate import rng
from conftest import ising_model, rank2_model

DET = Wt.Deterministic(1.0)


def brute_force(w, beta, h):
    """Annealed Ising sums by hand: product over pairs of 1 + p_ij (e^{beta s_i s_j} - 1)."""
    w = np.asarray(w, dtype=float)
    N, l_n = w.size, w.sum()
    Z = mag = 0.0
    for conf in itertools.product((-1.0, 1.0), repeat=N):
        weight = math.exp(h * sum(conf)) / (2 * math.cosh(h)) ** N
        for i in range(N):
            for j in range(i + 1, N):
                p = w[i] * w[j] / (l_n + w[i] * w[j])
                weight *= 1 + p * (math.exp(beta * conf[i] * conf[j]) - 1)
        Z += weight
        mag += weight * float(np.dot(w, conf)) / l_n
    return math.log(Z) / N, mag / Z


def test_edge_prob_examples():
    inst = S.GRGInstance(np.ones(100))
    assert S.edge_prob(inst, 0, 1) == pytest.approx(1 / 101, rel=1e-15)
    inst = S.GRGInstance(np.array([1e-12, 1.0, 2.0]))
    assert S.edge_prob(inst, 0, 2) < 1e-11
    assert S.edge_prob(inst, 1, 2) == S.edge_prob(inst, 2, 1)
    with pytest.raises(DomainError):
        S.edge_prob(inst, 1, 1)


def test_instance_invariants():
    inst = S.GRGInstance.from_model(ising_model(1.0, W=Wt.Pareto(3.5)), 50)
    assert inst.l_n == pytest.approx(inst.weights.sum(), rel=1e-12)
    p = [S.edge_prob(inst, i, j) for i in range(50) for j in range(50) if i != j]
    assert 0 < min(p) and max(p) < 1
    for bad in ([1.0], [1.0, -1.0], [1.0, np.inf]):
        with pytest.raises(DomainError):
            S.GRGInstance(np.array(bad))


def test_exact_examples():
    inst = S.GRGInstance(np.ones(2))
    r = S.exact_annealed(inst, Kn.ising_to_rank2(math.log(2.0)), M.ising())
    assert r.pressure == pytest.approx(oracles.PSI2_ISING_LOG2, abs=1e-12)
    r = S.exact_annealed(S.GRGInstance(np.ones(6)), Kn.ising_to_rank2(0.0), M.ising())
    assert abs(r.pressure) < 1e-15 and abs(r.magnetization) < 1e-15
    for beta in (0.0, 0.8, 2.0):
        r = S.exact_annealed(S.GRGInstance(np.ones(5)), Kn.ising_to_rank2(beta), M.ising(), h=10.0)
        assert abs(r.magnetization - 1.0) < 1e-3


@pytest.mark.parametrize("beta,h", [(0.4, 0.0), (1.1, 0.2), (2.0, 0.7)])
def test_exact_matches_brute_force(beta, h):
    w = np.array([0.7, 1.0, 1.9, 3.2, 1.4])
    ps, mag = brute_force(w, beta, h)
    # cosh b + sinh b s t equals e^{b s t} on the atoms, so no constant shift appears
    r = S.exact_annealed(S.GRGInstance(w), Kn.ising_to_rank2(beta), M.ising(), h=h)
    assert r.magnetization == pytest.approx(mag, abs=1e-12)
    assert r.pressure == pytest.approx(ps, abs=1e-12)


def test_exact_capacity_and_domain():
    with pytest.raises(CapacityError):
        S.exact_annealed(S.GRGInstance(np.ones(21)), Kn.ising_to_rank2(0.5), M.ising())
    with pytest.raises(DomainError):
        S.exact_annealed(S.GRGInstance(np.ones(3)), Kn.Rank2Kernel(2.0, 0.5), M.uniform(8))


def test_pressure_trend_toward_limit():
    model = ising_model(2.0)
    K = model.kernel
    limit = S.limit_pressure(model)
    psi = [S.exact_annealed(S.GRGInstance(np.ones(N)), K, M.ising()).pressure for N in range(2, 13)]
    assert all(b > a for a, b in zip(psi, psi[1:]))
    assert abs(psi[-1] - limit) < abs(psi[2] - limit)


def test_rng_scalar_matches_vector():
    key = 0xDEADBEEF12345678
    ctr = np.array([0, 1, 2, 10**12, 2**63], dtype=np.uint64)
    vec = rng.uniforms(key, ctr)
    assert np.array_equal(vec, [rng.uniform(key, int(c)) for c in ctr])
    assert np.all((vec > 0) & (vec < 1))
    assert rng.chain_keys(5, 3) == rng.chain_keys(5, 3)
    assert len(set(rng.chain_keys(5, 3))) == 3


def test_edge_stage_marginal_checkerboard():
    w = Wt.weight_sequence(Wt.Pareto(3.5), 10)
    inst = S.GRGInstance(w)
    beta = 0.8
    K = Kn.ising_to_rank2(beta)
    g = np.where(np.arange(10) % 2 == 0, 1.0, -1.0)
    n = 10**5
    draws = S.resample_edges(inst, K, g, key=12345, sweeps=np.arange(n))
    freq = draws.mean(axis=0)
    iu, ju = np.triu_indices(10, 1)
    picks = np.random.default_rng(3).choice(iu.size, size=10, replace=False)
    for k in picks:
        i, j = iu[k], ju[k]
        p = w[i] * w[j] / (w.sum() + w[i] * w[j])
        e = math.exp(beta * g[i] * g[j])
        target = p * e / (1 + p * (e - 1))
        assert abs(freq[k] - target) < 3 * math.sqrt(target * (1 - target) / n)


def test_theta_zero_sweep():
    # c = 1, theta = 0: edges are Bernoulli(p_ij) and spins are exact draws from alpha
    mu = M.uniform()
    model = rank2_model(mu, DET, 0.0, c=1.0)
    inst = S.GRGInstance(np.ones(40))
    n = 4000
    draws = S.resample_edges(inst, model.kernel, np.zeros(40), key=7, sweeps=np.arange(n))
    p = 1 / 41
    assert abs(draws.mean() - p) < 3 * math.sqrt(p * (1 - p) / draws.size)
    res = S.run_mc(model, 40, sweeps=200, burnin=0, seed=1)
    assert res.acceptance_rate == 1.0


def test_joint_sweep_advances_state():
    inst = S.GRGInstance(np.ones(6))
    state = S.init_state(inst, M.ising(), key=99)
    S.joint_gibbs_sweep(state, inst, Kn.ising_to_rank2(0.5), M.ising())
    assert state.sweep == 1
    ei, ej = state.edges
    assert np.all(ei < ej)


def test_mc_matches_exact():
    # three (beta, h) points for each N; at most one of nine may miss 3 stderr
    points = [(0.3, 0.0), (1.2, 0.0), (0.9, 0.3)]
    passed = 0
    for N in (4, 6, 8):
        for beta, h in points:
            model = ising_model(math.sinh(beta), h=h, c=math.cosh(beta))
            exact = S.exact_annealed(S.GRGInstance(np.ones(N)), model.kernel, M.ising(), h=h)
            target = exact.magnetization if h else exact.abs_magnetization
            res = S.run_mc(model, N, sweeps=100_000, burnin=1000, seed=2024 + N)
            passed += abs(res.order_param_estimate - target) < 3 * res.stderr
    assert passed >= 8


def test_two_seeds_agree():
    model = ising_model(math.sinh(0.9), c=math.cosh(0.9))
    a = S.run_mc(model, 8, sweeps=50_000, burnin=500, seed=1)
    b = S.run_mc(model, 8, sweeps=50_000, burnin=500, seed=2)
    assert abs(a.order_param_estimate - b.order_param_estimate) < 3 * math.hypot(a.stderr, b.stderr)


def test_same_seed_reproducible():
    model = rank2_model(M.uniform(), Wt.Pareto(4.0), 4.0, c=10.0, h=0.2)
    a = S.run_mc(model, 30, sweeps=100, burnin=10, seed=42, chains=2, threads=2)
    b = S.run_mc(model, 30, sweeps=100, burnin=10, seed=42, chains=2)
    for ta, tb in zip(a.traces, b.traces):
        assert np.array_equal(ta["B_N"], tb["B_N"])


def test_subcritical_large_n():
    res = S.run_mc(ising_model(0.5), 2000, sweeps=300, burnin=50, seed=11)
    assert res.order_param_estimate < 0.1


def test_field_large_n_matches_solver():
    model = ising_model(0.5, h=0.5)
    target = mf.solve_m(model).phi_at_solution
    res = S.run_mc(model, 2000, sweeps=600, burnin=100, seed=5)
    assert abs(res.order_param_estimate - target) < 3 * res.stderr


def test_run_mc_domain_errors():
    model = ising_model(1.0)
    for kw in ({"N": 1}, {"sweeps": 0}, {"burnin": -1}, {"N": 20_000}):
        args = {"N": 10, "sweeps": 10, "burnin": 0, "seed": 1, **kw}
        with pytest.raises(DomainError):
            S.run_mc(model, **args)
    with pytest.raises(DomainError):
        S.run_mc(mf.ModelSpec(M.ising(), M.IDENTITY, Kn.ising_grid(0.2, M.ising().points), DET), 10, 10, 0, 1)


def test_limit_pressure_offset():
    # theta = 0: finite-N pressure of the pre-annealed measure is (c - 1) E[W] / 2 in the limit
    model = rank2_model(M.ising(), Wt.Pareto(4.0), 0.0, c=1.7)
    assert S.limit_pressure(model) == pytest.approx(0.5 * 0.7 * 1.5, rel=1e-14)
