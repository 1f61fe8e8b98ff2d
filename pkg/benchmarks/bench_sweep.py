"""Sweep throughput of the compiled and pure-Python sampler kernels.

    python benchmarks/bench_sweep.py [--sizes 100 400 1000] [--sweeps 20]

Both backends run the same chain from the same key; traces must match exactly.
"""
import argparse
import time

import numpy as np

from annealed_grg import kernels, measures, meanfield, weights
from annealed_grg.simulate import GRGInstance, Sampler, _backend, init_state, run_chain

MODELS = {
    "ising": lambda: meanfield.ModelSpec(measures.ising(), measures.IDENTITY, kernels.Rank2Kernel(3.0, 2.0),
                                         weights.Pareto(3.5)),
    "uniform": lambda: meanfield.ModelSpec(measures.uniform(), measures.IDENTITY, kernels.Rank2Kernel(10.0, 4.0),
                                           weights.Pareto(3.5), h=0.2),
}


def timed(model, N, sweeps, backend):
    inst = GRGInstance.from_model(model, N)
    sampler = Sampler(inst, model.kernel, model.measure, model.h, model.observable)
    state = init_state(inst, model.measure, 12345, model.h, model.observable)
    t0 = time.perf_counter()
    out = run_chain(state, sampler, sweeps, backend=backend)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 1000])
    ap.add_argument("--sweeps", type=int, default=20)
    args = ap.parse_args()
    if "cython" not in _backend.BACKENDS:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    print(f"{'model':8} {'N':>6} {'python s/sweep':>15} {'cython s/sweep':>15} {'speedup':>8}  identical")
    for name, build in MODELS.items():
        model = build()
        for N in args.sizes:
            # the pure-Python kernel is O(N^2) per sweep in the interpreter; keep its run short
            n_py = max(1, min(args.sweeps, 200_000 // N))
            t_py, out_py = timed(model, N, n_py, "python")
            t_c, out_c = timed(model, N, n_py, "cython")
            same = all(np.array_equal(out_py[k], out_c[k]) for k in out_py)
            print(f"{name:8} {N:6d} {t_py / n_py:15.4g} {t_c / n_py:15.4g} {t_py / t_c:8.1f}  {same}")


if __name__ == "__main__":
    main()
