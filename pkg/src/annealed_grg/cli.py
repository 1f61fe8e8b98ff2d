"""Command-line front end.

The config is a JSON object with keys ``measure``, ``observable``, ``kernel``,
``weights``, ``h`` and ``options``; flags override the matching options.
Exit codes: 2 config, 3 solver, 4 capacity, 5 integration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import critical, kernels, meanfield, measures, weights
from .errors import AnnealedError, ConfigError

TOP_KEYS = {"measure", "observable", "kernel", "weights", "h", "options"}
REQUIRED = ("measure", "kernel", "weights")
COMMON_OPTIONS = {"seed", "threads", "out", "tol"}

OPTIONS = {
    "theta-c": set(),
    "solve": {"method"},
    "pressure": set(),
    "curve": {"control", "grid"},
    "exponents": {"window_beta", "window_delta", "n_points", "log_corrected", "k_max"},
    "uniqueness": set(),
    "cumulants": {"j_max", "k_max", "t_max"},
    "solve-general": {"damping", "max_iter", "starts", "eps"},
    "simulate": {"N", "sweeps", "burnin", "chains", "backend", "weight_mode", "n_batches", "exact"},
}


def fmt(x) -> str:
    return format(float(x), ".17g") if isinstance(x, (float, np.floating)) else str(x)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def build_model(cfg: dict) -> meanfield.ModelSpec:
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in REQUIRED:
        if key not in cfg:
            raise ConfigError(f"config is missing the {key!r} field")
    try:
        mu = measures.make_measure(cfg["measure"])
        g = measures.make_observable(cfg.get("observable"))
        K = kernels.make_kernel(cfg["kernel"], g, mu)
        W = weights.make_weights(cfg["weights"])
        return meanfield.ModelSpec(mu, g, K, W, float(cfg.get("h", 0.0)))
    except ConfigError:
        raise
    except (AnnealedError, KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"invalid model spec: {exc}") from exc


def resolve_options(command: str, cfg: dict, args) -> dict:
    opts = dict(cfg.get("options", {}))
    unknown = set(opts) - OPTIONS[command] - COMMON_OPTIONS
    if unknown:
        raise ConfigError(f"unknown options for {command}: {sorted(unknown)}")
    for flag in ("seed", "threads", "out"):
        value = getattr(args, flag)
        if value is not None:
            opts[flag] = str(value) if flag == "out" else value
    if "seed" in opts:
        seed = int(opts["seed"])
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        opts["seed"] = seed
    return opts


# ---------------------------------------------------------------------------
# commands; each returns (payload, summary line, optional CSV text)
# ---------------------------------------------------------------------------


def cmd_theta_c(model, opts):
    var = measures.integrate(model.measure, lambda s: model.observable(s) ** 2)
    tc = meanfield.theta_c(model)
    payload = {"theta_c": tc, "sb_mean_W": model.weights.sb_mean, "alpha0_g2": var}
    return payload, f"theta_c = {fmt(tc)}", None


def _solve(model, opts):
    fp = meanfield.solve_m(model, tol=opts.get("tol", meanfield.DEFAULT_TOL), method=opts.get("method", "brentq"))
    return fp, meanfield.pressure_rank2(model, fp)


def cmd_solve(model, opts):
    fp, psi = _solve(model, opts)
    payload = {**fp.to_dict(), "pressure": psi, "phi": fp.phi_at_solution}
    tag = "" if fp.certified else " (uncertified: concavity scan failed)"
    return payload, f"m_plus = {fmt(fp.m_plus)}{tag}", None


def cmd_pressure(model, opts):
    fp, psi = _solve(model, opts)
    payload = {"theta": fp.theta, "h": fp.h, "m_plus": fp.m_plus, "pressure": psi}
    return payload, f"pressure = {fmt(psi)}", None


def _grid(spec):
    if isinstance(spec, dict):
        if set(spec) - {"start", "stop", "num"}:
            raise ConfigError("grid object takes start, stop, num")
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"])).tolist()
    return [float(v) for v in spec]


def cmd_curve(model, opts):
    control = opts.get("control", "theta")
    if "grid" not in opts:
        raise ConfigError("curve needs options.grid")
    rows = critical.magnetization_curve(model, control, _grid(opts["grid"]), opts.get("tol", meanfield.DEFAULT_TOL))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["theta", "h", "m_plus", "pressure", "residual"])
    for r in rows:
        writer.writerow([fmt(r.theta), fmt(r.h), fmt(r.m_plus), fmt(r.pressure), fmt(r.residual)])
    failed = [r.error for r in rows if r.error]
    payload = {"rows": len(rows), "failed": failed}
    return payload, f"{len(rows)} rows, {len(failed)} failed", buf.getvalue()


def cmd_exponents(model, opts):
    k = measures.detect_k(model.measure, model.observable, opts.get("k_max", measures.MAX_CUMULANT_ORDER))
    regime = weights.classify_tail(model.weights, k)
    pred = critical.predicted_exponents(k, regime)
    lc = bool(opts.get("log_corrected", pred.log_correction))
    n = int(opts.get("n_points", 12))
    tol = opts.get("tol", meanfield.DEFAULT_TOL)
    b = critical.fit_beta(model, tuple(opts.get("window_beta", (1e-5, 1e-2))), n, lc, tol)
    d = critical.fit_delta(model, tuple(opts.get("window_delta", (1e-5, 1e-2))), n, lc, tol)
    payload = {
        "k": k,
        "regime": str(regime),
        "predicted": {"beta": pred.beta, "delta": pred.delta, "log_correction": pred.log_correction},
        "beta_fit": b.to_dict(),
        "delta_fit": d.to_dict(),
    }
    line = (f"beta_fit = {b.estimate:.4f} (predicted {pred.beta:.4f}), "
            f"delta_fit = {d.estimate:.4f} (predicted {pred.delta:.4f})")
    return payload, line, None


def cmd_uniqueness(model, opts):
    rep = kernels.uniqueness_bound(model.kernel, model.weights)
    payload = {"lhs": rep.lhs, "holds": rep.holds, "sb_mean_W": rep.sb_mean, "variation": rep.variation}
    return payload, f"{'holds' if rep.holds else 'inconclusive'}, lhs={rep.lhs:.5f}", None


def cmd_cumulants(model, opts):
    mu, g = model.measure, model.observable
    j_max = int(opts.get("j_max", measures.MAX_CUMULANT_ORDER))
    kappa = [measures.cumulant(mu, g, j) for j in range(1, j_max + 1)]
    rep = measures.concavity_scan(mu, g, float(opts.get("t_max", 20.0)))
    payload = {
        "cumulants": kappa,
        "concavity": {"passed": rep.passed, "worst_value": rep.worst_value, "worst_t": rep.worst_t},
    }
    line = f"concavity {'pass' if rep.passed else 'fail'}"
    if mu.symmetric and g.odd:
        k = measures.detect_k(mu, g, opts.get("k_max", measures.MAX_CUMULANT_ORDER))
        payload["k"] = k
        line = f"k = {k}, kappa_{k} = {fmt(kappa[k - 1]) if k <= j_max else 'n/a'}, {line}"
    return payload, line, None


def cmd_solve_general(model, opts):
    starts = opts.get("starts", ["paramagnetic", "plus", "minus"])
    sols = meanfield.find_branches(
        model,
        starts=starts,
        damping=float(opts.get("damping", 0.5)),
        tol=float(opts.get("tol", meanfield.DEFAULT_TOL)),
        max_iter=int(opts.get("max_iter", 20000)),
        eps=float(opts.get("eps", 0.5)),
    )
    best, branch = meanfield.best_branch(model, sols)
    payload = {
        "nodes": sols[0].nodes.tolist(),
        "branches": [
            {
                "start": s.start,
                "residual": s.residual,
                "iterations": s.iterations,
                "pressure": meanfield.pressure_general(model, s),
                "V": s.V.tolist(),
            }
            for s in sols
        ],
        "best_pressure": best,
        "best_start": branch.start,
    }
    return payload, f"{len(sols)} branch(es), best pressure = {fmt(best)}", None


def cmd_simulate(model, opts):
    from . import simulate

    seed = opts.get("seed")
    if seed is None:
        raise ConfigError("simulate needs a seed (options.seed or --seed)")
    res = simulate.run_mc(
        model,
        N=int(opts.get("N", 1000)),
        sweeps=int(opts.get("sweeps", 1000)),
        burnin=int(opts.get("burnin", 100)),
        seed=seed,
        chains=int(opts.get("chains", 1)),
        threads=int(opts.get("threads", 1)),
        backend=opts.get("backend"),
        weight_mode=opts.get("weight_mode", "quantile"),
        n_batches=int(opts.get("n_batches", 20)),
    )
    buf = io.StringIO()
    buf.write(f"# seed={seed} keys={','.join(str(k) for k in res.keys)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sweep", "B_N", "energy_proxy", "edges_count"])
    for c, tr in enumerate(res.traces):
        if len(res.traces) > 1:
            buf.write(f"# chain={c}\n")
        for s in range(tr["B_N"].size):
            writer.writerow([s, fmt(tr["B_N"][s]), fmt(tr["energy_proxy"][s]), int(tr["edges_count"][s])])
    payload = {**res.to_dict(), "seed": seed}
    line = f"order_param = {fmt(res.order_param_estimate)} +- {fmt(res.stderr)}"
    if opts.get("exact"):
        # enumeration on the same finite instance, for small-N checks
        inst = simulate.GRGInstance.from_model(model, res.N, opts.get("weight_mode", "quantile"), seed)
        ex = simulate.exact_annealed(inst, model.check_rank2(), model.measure, model.h, model.observable)
        target = ex.magnetization if res.signed else ex.abs_magnetization
        payload["exact"] = {"pressure": ex.pressure, "order_param": target, "n_states": ex.n_states}
        line += f", exact = {fmt(target)}"
    return payload, line, buf.getvalue()


COMMANDS = {
    "theta-c": cmd_theta_c,
    "solve": cmd_solve,
    "pressure": cmd_pressure,
    "curve": cmd_curve,
    "exponents": cmd_exponents,
    "uniqueness": cmd_uniqueness,
    "cumulants": cmd_cumulants,
    "solve-general": cmd_solve_general,
    "simulate": cmd_simulate,
}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump(payload) -> str:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        return x

    return json.dumps(clean(payload), indent=2, default=_json_default) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="annealed-grg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, metavar="PATH")
        p.add_argument("--out", type=Path, metavar="PATH", help="write CSV (curve, simulate) or JSON here")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--threads", type=int, metavar="N")
        p.add_argument("--dry-run", action="store_true", help="validate the config and print the resolved model")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        model = build_model(cfg)
        opts = resolve_options(args.command, cfg, args)
        if args.dry_run:
            sys.stdout.write(_dump({"command": args.command, "model": model.describe(), "options": opts}))
            return 0
        payload, line, table = COMMANDS[args.command](model, opts)
        out = opts.get("out")
        if out is not None:
            Path(out).write_text(table if table is not None else _dump(payload))
            sys.stdout.write(_dump(payload) if table is not None else "")
        else:
            sys.stdout.write(table if table is not None else _dump(payload))
        sys.stderr.write(line + "\n")
        return 0
    except AnnealedError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        # malformed option values surface here
        sys.stderr.write(f"error: invalid option value: {exc}\n")
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
