"""Randomized invariants over generated measures, weights and parameters."""
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from annealed_grg import kernels as Kn
from annealed_grg import measures as M
from annealed_grg import meanfield as mf
from annealed_grg import simulate as S
from annealed_grg import weights as Wt
from annealed_grg.simulate import rng
from conftest import rank2_model

settings.register_profile("pkg", deadline=None, max_examples=40, derandomize=True, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")

G = M.IDENTITY
finite = dict(allow_nan=False, allow_infinity=False)


@st.composite
def symmetric_discrete(draw):
    locs = draw(st.lists(st.floats(0.05, 1.0, **finite), min_size=1, max_size=4, unique=True))
    probs = draw(st.lists(st.floats(0.05, 1.0, **finite), min_size=len(locs), max_size=len(locs)))
    zero = draw(st.floats(0.0, 1.0, **finite))
    loc = [-x for x in locs] + locs + ([0.0] if zero > 0.01 else [])
    pr = probs + probs + ([zero] if zero > 0.01 else [])
    return M.discrete(loc, pr)


@st.composite
def any_discrete(draw):
    locs = draw(st.lists(st.floats(-1.0, 1.0, **finite), min_size=2, max_size=5, unique=True))
    probs = draw(st.lists(st.floats(0.05, 1.0, **finite), min_size=len(locs), max_size=len(locs)))
    return M.discrete(locs, probs)


def named_measures():
    return st.sampled_from([M.ising(), M.uniform(), M.beta(0.5), M.beta(2.0), M.step(), M.sphere_marginal(1)])


@given(symmetric_discrete())
def test_odd_cumulants_vanish(mu):
    kappa = M.cumulants(mu, G, 9)
    assert all(abs(kappa[j - 1]) < 1e-10 for j in (1, 3, 5, 7, 9))


@given(any_discrete(), st.floats(-1.0, 1.0, **finite))
def test_cumulants_shift_invariant(mu, a):
    # kappa_j of X + a: only the first cumulant moves; stays inside [-1, 1] by scaling first
    scaled = M.discrete(0.5 * mu.atoms, mu.atom_weights)
    shifted = M.discrete(0.5 * mu.atoms + 0.5 * a, mu.atom_weights)
    k0 = M.cumulants(scaled, G, 6)
    k1 = M.cumulants(shifted, G, 6)
    assert k1[0] == pytest.approx(k0[0] + 0.5 * a, abs=1e-12)
    assert np.allclose(k1[1:], k0[1:], atol=1e-11)


@given(any_discrete(), st.floats(0.1, 1.0, **finite))
def test_cumulants_scale_homogeneous(mu, c):
    k0 = M.cumulants(mu, G, 6)
    k1 = M.cumulants(M.discrete(c * mu.atoms, mu.atom_weights), G, 6)
    assert np.allclose(k1, [c ** (j + 1) * k for j, k in enumerate(k0)], atol=1e-11)


@given(any_discrete(), st.floats(-8.0, 8.0, **finite))
def test_log_mgf_slope_is_tilted_mean(mu, t):
    d = 1e-5
    fd = (M.log_mgf(mu, G, t + d) - M.log_mgf(mu, G, t - d)) / (2 * d)
    assert fd == pytest.approx(M.tilted_central_moment(mu, G, t, 1), abs=1e-7)


@given(named_measures(), st.floats(-30.0, 30.0, **finite))
def test_tilted_variance_positive_and_bounded(mu, t):
    v = M.tilted_central_moment(mu, G, t, 2)
    assert -1e-15 <= v <= 1.0 + 1e-12


@given(named_measures(), st.floats(0.01, 5.0, **finite))
def test_phi_odd(mu, m):
    model = rank2_model(mu, Wt.Pareto(4.0), 1.0)
    assert mf.phi(model, -m) == pytest.approx(-mf.phi(model, m), abs=1e-14)


@given(st.sampled_from([M.ising(), M.uniform(), M.beta(2.0)]), st.sampled_from([3.5, 4.5, 6.0]),
       st.floats(1.01, 4.0, **finite), st.floats(1.01, 4.0, **finite))
def test_m_plus_monotone_in_theta(mu, tau, r1, r2):
    assume(abs(r1 - r2) > 1e-6)
    lo, hi = sorted((r1, r2))
    base = rank2_model(mu, Wt.Pareto(tau), 1.0, c=50.0)
    tc = mf.theta_c(base)
    a = mf.solve_m(base.with_theta(lo * tc)).m_plus
    b = mf.solve_m(base.with_theta(hi * tc)).m_plus
    assert 0 < a <= b


@given(st.floats(0.0, 2.0, **finite), st.floats(0.0, 2.0, **finite), st.floats(0.2, 3.0, **finite))
def test_m_plus_monotone_in_h(h1, h2, theta):
    lo, hi = sorted((h1, h2))
    base = rank2_model(M.ising(), Wt.Pareto(3.5), theta, c=4.0)
    assert mf.solve_m(base.with_h(lo)).m_plus <= mf.solve_m(base.with_h(hi)).m_plus


@given(st.floats(-3.0, 3.0, **finite), st.floats(0.1, 3.0, **finite),
       st.sampled_from(["identity", "cube", "sin_half_pi"]))
def test_variation_closed_form_vs_grid(theta, extra, gname):
    g = M.make_observable(gname)
    K = Kn.Rank2Kernel(abs(theta) + extra, theta, g)
    grid = K.to_grid(np.linspace(-1.0, 1.0, 200))
    assert abs(Kn.second_order_variation(K) - Kn.second_order_variation(grid)) < 1e-6


@given(st.floats(-5.0, 5.0, **finite))
def test_ising_round_trip(beta):
    K = Kn.ising_to_rank2(beta)
    ct, b = Kn.rank2_to_ising(K.c, K.theta)
    assert b == pytest.approx(beta, abs=1e-12)
    assert ct == pytest.approx(1.0, abs=1e-9 * math.cosh(beta))


@given(st.lists(st.floats(1e-3, 1e3, **finite), min_size=2, max_size=30), st.data())
def test_edge_prob_symmetric_in_unit_interval(w, data):
    inst = S.GRGInstance(np.array(w))
    i = data.draw(st.integers(0, len(w) - 1))
    j = data.draw(st.integers(0, len(w) - 1))
    assume(i != j)
    p = S.edge_prob(inst, i, j)
    assert 0 < p < 1 and p == S.edge_prob(inst, j, i)


@given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 2**62), min_size=1, max_size=20))
def test_counter_uniforms(key, ctrs):
    vec = rng.uniforms(key, np.array(ctrs, dtype=np.uint64))
    assert np.all((vec > 0) & (vec < 1))
    assert vec.tolist() == [rng.uniform(key, c) for c in ctrs]


@given(st.sampled_from([3.2, 4.0, 5.5, 8.0]), st.floats(0.5, 100.0, **finite), st.floats(0.5, 100.0, **finite),
       st.integers(1, 4))
def test_truncated_moment_monotone(tau, r1, r2, k):
    W = Wt.Pareto(tau)
    lo, hi = sorted((r1, r2))
    assert Wt.truncated_moment(W, k, lo) <= Wt.truncated_moment(W, k, hi)


@given(st.sampled_from([3.5, 4.0, 6.0]), st.integers(1, 500))
def test_quantile_sequence_sorted_in_support(tau, N):
    w = Wt.weight_sequence(Wt.Pareto(tau, 2.0), N)
    assert np.all(w >= 2.0) and np.all(np.diff(w) >= 0)


@given(st.sampled_from([M.uniform, lambda n: M.beta(0.5, n), lambda n: M.beta(3.0, n), lambda n: M.step(n=n)]),
       st.floats(-10.0, 10.0, **finite))
def test_quadrature_self_consistent(builder, t):
    a = M.log_mgf(builder(200), G, t)
    b = M.log_mgf(builder(400), G, t)
    assert abs(a - b) < 1e-10 * max(1.0, abs(b))


@given(st.sampled_from([Wt.Deterministic(1.0), Wt.Pareto(3.5), Wt.Pareto(5.0)]), st.floats(0.05, 3.0, **finite))
def test_phi_below_linearization(W, m):
    # concavity on the positive axis: phi(m) <= phi'(0) m
    for mu in (M.ising(), M.uniform(), M.step()):
        model = rank2_model(mu, W, 1.0)
        slope = W.sb_mean * M.integrate(mu, lambda s: s**2)
        assert mf.phi(model, m) <= slope * m + 1e-14
