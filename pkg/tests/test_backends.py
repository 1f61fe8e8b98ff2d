import os
import subprocess
import sys

import numpy as np
import pytest

from annealed_grg import kernels as Kn
from annealed_grg import measures as M
from annealed_grg import simulate as S
from annealed_grg import weights as Wt
from annealed_grg.simulate import _backend
from conftest import ising_model, rank2_model

needs_cython = pytest.mark.skipif("cython" not in _backend.BACKENDS, reason="compiled extension not built")

CASES = {
    "ising-det": lambda: ising_model(1.5),
    "ising-field-pareto": lambda: ising_model(0.7, W=Wt.Pareto(3.5), h=0.3),
    "uniform-pareto-field": lambda: rank2_model(M.uniform(), Wt.Pareto(3.5), 3.0, c=10.0, h=0.3),
    "beta-cube": lambda: rank2_model(M.beta(2.0), Wt.Pareto(4.5), 4.0, c=10.0, g=M.make_observable("cube")),
    "discrete3": lambda: rank2_model(M.discrete([-1, 0, 1], [0.25, 0.5, 0.25]), Wt.Deterministic(1.0), 2.0, c=3.0),
}


@needs_cython
@pytest.mark.parametrize("name", sorted(CASES))
def test_backends_bit_identical(name):
    model = CASES[name]()
    runs = {}
    for backend in ("python", "cython"):
        runs[backend] = S.run_mc(model, 25, sweeps=40, burnin=5, seed=314, chains=2, backend=backend)
    a, b = runs["python"], runs["cython"]
    for ta, tb in zip(a.traces, b.traces):
        for col in ta:
            assert np.array_equal(ta[col], tb[col]), col
    assert a.order_param_estimate == b.order_param_estimate


@needs_cython
def test_final_states_identical():
    model = CASES["uniform-pareto-field"]()
    inst = S.GRGInstance.from_model(model, 30)
    sampler = S.Sampler(inst, model.kernel, model.measure, model.h, model.observable)
    states = {}
    for backend in ("python", "cython"):
        st = S.init_state(inst, model.measure, 77, model.h, model.observable)
        S.run_chain(st, sampler, 25, backend=backend, chunk=7)
        states[backend] = st
    p, c = states["python"], states["cython"]
    assert np.array_equal(p.spins, c.spins) and np.array_equal(p.gs, c.gs)
    assert np.array_equal(p.edges[0], c.edges[0]) and np.array_equal(p.edges[1], c.edges[1])


@pytest.mark.parametrize("backend", sorted(_backend.BACKENDS))
def test_sweep_edges_match_edge_stage(backend):
    model = ising_model(1.2, W=Wt.Pareto(4.0))
    inst = S.GRGInstance.from_model(model, 20)
    sampler = S.Sampler(inst, model.kernel, model.measure, 0.0, model.observable)
    st = S.init_state(inst, model.measure, 5)
    S.run_chain(st, sampler, 3, backend=backend)
    gs_before = st.gs.copy()
    S.run_chain(st, sampler, 1, backend=backend)
    drawn = S.resample_edges(inst, model.kernel, gs_before, st.key, [3])[0]
    iu, ju = np.triu_indices(20, 1)
    assert np.array_equal(st.edges[0], iu[drawn]) and np.array_equal(st.edges[1], ju[drawn])


def test_chunking_does_not_change_results():
    model = CASES["ising-field-pareto"]()
    inst = S.GRGInstance.from_model(model, 15)
    sampler = S.Sampler(inst, model.kernel, model.measure, model.h, model.observable)
    outs = []
    for chunk in (1, 4, 256):
        st = S.init_state(inst, model.measure, 3, model.h)
        outs.append(S.run_chain(st, sampler, 30, chunk=chunk)["B_N"])
    assert np.array_equal(outs[0], outs[1]) and np.array_equal(outs[1], outs[2])


def test_env_var_forces_fallback():
    code = "from annealed_grg.simulate import _backend; print(_backend.DEFAULT)"
    env = dict(os.environ, ANNEALED_GRG_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_grid_kernel_rejected_by_sampler():
    inst = S.GRGInstance(np.ones(4))
    with pytest.raises(Exception):
        S.Sampler(inst, Kn.ising_grid(0.1, np.array([-1.0, 1.0])), M.ising(), 0.0)
