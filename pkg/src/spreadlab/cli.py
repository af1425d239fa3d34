"""Command-line front-end: sampling, attacks, spectra, RIP checks and seed sweeps.

Every run prints (and with ``--report`` also writes) a JSON report embedding
its full configuration and the library version.  Errors go to stderr as a
JSON object; exit codes are 2 for configuration errors, 3 for exceeded
budgets and 4 for numerical failures.
"""
import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .attack import attack
from .ensemble import EnsembleParams, sample_biregular
from .errors import BudgetExceeded, ConfigError, InvalidParams, NumericalFailure, SpreadlabError
from .fileio import read_matrix, write_matrix
from .graphs import random_graph_expansion_params, verify_unique_expansion
from .rip import certify_rip, probe_rip, rip_precondition
from .spectral import singular_extremes
from .spread import (best_k_sparse_error, compressible_to_distortion_bound, distortion,
                     distortion_to_compressibility)

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4
SWEEP_COLUMNS = ["n", "m", "s", "t", "seed", "metric", "value"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class RunConfig:
    subcommand: str
    ensemble: dict = field(default_factory=dict)
    sizes: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    p_values: list = field(default_factory=list)
    output: str = None
    report: str = None
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# argument parsing and validation
# ---------------------------------------------------------------------------


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc


def _sample_tuple(text):
    vals = _int_list(text)
    if len(vals) != 5:
        raise ConfigError(f"--sample expects n,m,s,t,seed, got {text!r}")
    return vals


def _add_ensemble(p, with_seed=True):
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--alpha", type=float, help="m/n; resolved to integer (m, t) with n t = m s")
    if with_seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="spreadlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spreadlab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("sample", help="sample a signed biregular matrix")
    _add_ensemble(p)
    p.add_argument("--out", required=True, help="BIREG output file")
    p.add_argument("--report")

    p = sub.add_parser("attack", help="run the tree-vector compressibility attack")
    _add_ensemble(p)
    p.add_argument("--matrix", help="BIREG input file instead of sampling")
    p.add_argument("--max-radius", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--report")

    p = sub.add_parser("spectrum", help="extreme singular values and band slack")
    p.add_argument("--sample", type=_sample_tuple, metavar="n,m,s,t,seed")
    p.add_argument("--matrix")
    p.add_argument("--method", choices=["dense", "iterative"], default="dense")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--report")

    p = sub.add_parser("rip-check", help="probe lp-RIP extremes and certify from unique expansion")
    p.add_argument("--sample", type=_sample_tuple, metavar="n,m,s,t,seed")
    p.add_argument("--matrix")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--gamma", type=float, help="claimed expansion set-size fraction")
    p.add_argument("--mu", type=float, help="claimed unique-expansion loss")
    p.add_argument("--predicted-expansion", action="store_true",
                   help="claim the random-graph (c*alpha^2/t^4, 2/t) expansion with alpha = m/n")
    p.add_argument("--expansion-c", type=float, default=1 / (2 * math.e ** 3),
                   help="constant c for --predicted-expansion")
    p.add_argument("--budget", type=int, default=10**6)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--atol", type=float, default=1e-9)
    p.add_argument("--report")

    p = sub.add_parser("spread-check", help="compressibility and distortion of a vector")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--vector", help="text file of numbers")
    src.add_argument("--values", help="comma-separated numbers")
    src.add_argument("--random", type=int, metavar="N", help="N standard Gaussian entries")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--eps", type=float)
    p.add_argument("--report")

    p = sub.add_parser("sweep", help="fan an experiment over sizes and seeds")
    p.add_argument("experiment", choices=["attack", "spectrum"])
    p.add_argument("--n", type=_int_list, required=True, help="comma-separated sizes")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--s", type=int, default=6)
    p.add_argument("--seeds", type=int, default=20, help="run seeds 0..SEEDS-1")
    p.add_argument("--seed-offset", type=int, default=0)
    p.add_argument("--method", choices=["dense", "iterative"], default="dense")
    p.add_argument("--max-radius", type=int, default=8)
    p.add_argument("--out", default="sweep.csv", help="CSV output file")
    p.add_argument("--report")
    return parser


def _ensemble_from(ns):
    """EnsembleParams from ``--n/--m/--s/--t`` or ``--n/--alpha/--s``."""
    if ns.n is None or ns.s is None:
        raise ConfigError("--n and --s are required")
    if ns.alpha is not None:
        if ns.m is not None or ns.t is not None:
            raise ConfigError("give either --alpha or --m/--t, not both")
        return EnsembleParams.from_alpha(ns.n, ns.alpha, ns.s, ns.seed)
    if ns.m is None or ns.t is None:
        raise ConfigError("give --m and --t, or --alpha")
    return EnsembleParams(ns.n, ns.m, ns.s, ns.t, ns.seed)


def _source(ns):
    if (ns.sample is None) == (ns.matrix is None):
        raise ConfigError("give exactly one of --sample or --matrix")
    if ns.sample is not None:
        return EnsembleParams(*ns.sample)
    if not os.path.exists(ns.matrix):
        raise ConfigError(f"matrix file {ns.matrix!r} does not exist")
    return None


def make_config(ns):
    """Validate parsed flags into a RunConfig before any work is done."""
    cmd = ns.subcommand
    cfg = RunConfig(subcommand=cmd, report=getattr(ns, "report", None))
    if cmd == "sample":
        cfg.ensemble = asdict(_ensemble_from(ns))
        cfg.output = ns.out
    elif cmd == "attack":
        if ns.matrix is not None:
            if not os.path.exists(ns.matrix):
                raise ConfigError(f"matrix file {ns.matrix!r} does not exist")
            cfg.options["matrix"] = ns.matrix
        else:
            cfg.ensemble = asdict(_ensemble_from(ns))
        if ns.max_radius < 1:
            raise ConfigError("--max-radius must be >= 1")
        cfg.options["max_radius"] = ns.max_radius
        cfg.tolerances["tol"] = ns.tol
    elif cmd == "spectrum":
        params = _source(ns)
        cfg.ensemble = asdict(params) if params else {}
        cfg.options.update(matrix=ns.matrix, method=ns.method)
        cfg.tolerances["tol"] = ns.tol
    elif cmd == "rip-check":
        params = _source(ns)
        cfg.ensemble = asdict(params) if params else {}
        if ns.p < 1:
            raise ConfigError(f"--p must be >= 1, got {ns.p}")
        if ns.k < 1:
            raise ConfigError(f"--k must be >= 1, got {ns.k}")
        if not ns.eps > 0:
            raise ConfigError(f"--eps must be positive, got {ns.eps}")
        if (ns.gamma is None) != (ns.mu is None):
            raise ConfigError("--gamma and --mu go together")
        if ns.predicted_expansion and ns.gamma is not None:
            raise ConfigError("--predicted-expansion replaces --gamma/--mu")
        if not ns.expansion_c > 0:
            raise ConfigError(f"--expansion-c must be positive, got {ns.expansion_c}")
        cfg.p_values = [ns.p]
        cfg.seeds = [ns.seed]
        cfg.options.update(matrix=ns.matrix, k=ns.k, mode=ns.mode, eps=ns.eps, gamma=ns.gamma,
                           mu=ns.mu, predicted=ns.predicted_expansion, expansion_c=ns.expansion_c,
                           budget=ns.budget, restarts=ns.restarts)
        cfg.tolerances["atol"] = ns.atol
    elif cmd == "spread-check":
        if ns.values is not None:
            vec = [float(v) for v in ns.values.split(",")]
        elif ns.vector is not None:
            if not os.path.exists(ns.vector):
                raise ConfigError(f"vector file {ns.vector!r} does not exist")
            vec = np.loadtxt(ns.vector, dtype=np.float64, ndmin=1).tolist()
        else:
            if ns.random < 1:
                raise ConfigError("--random needs a positive length")
            vec = None
        if not 1 <= ns.q < ns.p:
            raise ConfigError(f"need 1 <= q < p, got q={ns.q}, p={ns.p}")
        cfg.p_values = [ns.q, ns.p]
        cfg.seeds = [ns.seed]
        cfg.options.update(vector=vec, random=ns.random, k=ns.k, eps=ns.eps)
    elif cmd == "sweep":
        if not ns.n or any(v < 1 for v in ns.n):
            raise ConfigError("--n needs positive sizes")
        if ns.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        cfg.sizes = list(ns.n)
        cfg.seeds = list(range(ns.seed_offset, ns.seed_offset + ns.seeds))
        # resolve every size now so bad combinations fail before any work
        cfg.ensemble = {"alpha": ns.alpha, "s": ns.s,
                        "resolved": [asdict(EnsembleParams.from_alpha(n, ns.alpha, ns.s)) for n in ns.n]}
        cfg.output = ns.out
        cfg.options.update(experiment=ns.experiment, method=ns.method, max_radius=ns.max_radius)
    return cfg


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _matrix(cfg):
    if cfg.options.get("matrix"):
        return read_matrix(cfg.options["matrix"])
    return sample_biregular(EnsembleParams(**cfg.ensemble))


def _run_sample(cfg):
    A = sample_biregular(EnsembleParams(**cfg.ensemble))
    write_matrix(cfg.output, A)
    return {"file": cfg.output, "n_edges": int(A.graph.n_edges)}


def _run_attack(cfg):
    A = _matrix(cfg)
    w = attack(A, max_radius=cfg.options["max_radius"], tol=cfg.tolerances["tol"],
               seed=cfg.ensemble.get("seed"))
    out = w.to_dict()
    out["recheck"] = w.recheck()
    return out


def _run_spectrum(cfg):
    A = _matrix(cfg)
    return singular_extremes(A, method=cfg.options["method"], tol=cfg.tolerances["tol"]).to_dict()


def _run_rip_check(cfg):
    o = cfg.options
    A = _matrix(cfg)
    p, eps, k = cfg.p_values[0], o["eps"], o["k"]
    t = int(A.graph.left_degrees.max())
    s_max = int(A.graph.right_degrees.max())
    K = t ** (1 / p)
    probe = probe_rip(A, p, k, mode=o["mode"], budget=o["budget"], restarts=o["restarts"],
                      seed=cfg.seeds[0])
    out = {"probe": probe.to_dict(), "K": K}
    gamma, mu = o["gamma"], o["mu"]
    if o["predicted"]:
        gamma, mu = random_graph_expansion_params(t, A.m / A.n, o["expansion_c"])
        out["predicted_expansion"] = {"c": o["expansion_c"], "gamma": gamma, "mu": mu}
    if gamma is not None:
        exp_cert = verify_unique_expansion(A.graph, t, gamma, mu, mode="exhaustive", budget=o["budget"])
        out["expansion"] = json.loads(exp_cert.to_json())
        if exp_cert.valid and rip_precondition(mu, s_max, p) <= eps * eps:
            out["certificate"] = certify_rip(exp_cert, t, s_max, p, eps).to_dict()
    atol = cfg.tolerances["atol"]
    lo, hi = K * (1 - eps) - atol, K * (1 + eps) + atol
    violations = []
    if probe.min_ratio < lo:
        violations.append({"side": "lower", "ratio": probe.min_ratio, "bound": lo,
                           "support": list(probe.argmin_support)})
    if probe.max_ratio > hi:
        violations.append({"side": "upper", "ratio": probe.max_ratio, "bound": hi,
                           "support": list(probe.argmax_support)})
    out["violations"] = violations
    return out


def _run_spread_check(cfg):
    o = cfg.options
    if o["vector"] is not None:
        x = np.asarray(o["vector"], dtype=np.float64)
    else:
        x = np.random.default_rng(cfg.seeds[0]).standard_normal(o["random"])
    q, p = cfg.p_values
    k = o["k"]
    err, supp = best_k_sparse_error(x, k, p)
    d = distortion(x, q, p).value
    out = {"n": int(x.size), "k": k, "best_k_error": err, "support": supp.tolist(),
           "distortion": d, "eps_from_distortion": distortion_to_compressibility(x, k, q, p),
           "distortion_bound_at_error": compressible_to_distortion_bound(k, x.size, err, q, p)}
    if o["eps"] is not None:
        out["compressible"] = bool(err <= o["eps"])
    return out


def _sweep_task(task):
    experiment, params, options = task
    A = sample_biregular(EnsembleParams(**params))
    if experiment == "attack":
        w = attack(A, max_radius=options["max_radius"], seed=params["seed"])
        return {"epsilon": w.epsilon, "k": w.k, "ell": w.ell, "residual": w.residual,
                "recheck": w.recheck()}
    rep = singular_extremes(A, method=options["method"])
    return {"sigma_min": rep.sigma_min, "sigma_max": rep.sigma_max, "slack": rep.slack}


def workers():
    """Worker-pool size: ``SPREADLAB_THREADS`` if set, else the CPU count."""
    cap = os.environ.get("SPREADLAB_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, int(cap)) if int(cap) > 0 else n
        except ValueError as exc:
            raise ConfigError(f"SPREADLAB_THREADS must be an integer, got {cap!r}") from exc
    return max(1, n)


def _run_sweep(cfg):
    o = cfg.options
    tasks = []
    for base in cfg.ensemble["resolved"]:
        for seed in cfg.seeds:
            tasks.append((o["experiment"], dict(base, seed=seed), o))
    n_workers = min(workers(), len(tasks))
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(tk) for tk in tasks]
    rows = []
    for (_, params, _), res in zip(tasks, results):
        for metric, value in res.items():
            rows.append([params["n"], params["m"], params["s"], params["t"], params["seed"], metric, value])
    with open(cfg.output, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SWEEP_COLUMNS)
        wr.writerows(rows)
    summary = {}
    for base in cfg.ensemble["resolved"]:
        per = [r for (_, prm, _), r in zip(tasks, results) if prm["n"] == base["n"]]
        summary[str(base["n"])] = {m: float(np.median([r[m] for r in per])) for m in per[0]}
    out = {"csv": cfg.output, "tasks": len(tasks), "workers": n_workers, "medians": summary}
    if o["experiment"] == "attack":
        med = [summary[str(n)]["epsilon"] for n in cfg.sizes]
        out["median_epsilon_decreasing"] = bool(all(a > b for a, b in zip(med, med[1:])))
    return out


_HANDLERS = {"sample": _run_sample, "attack": _run_attack, "spectrum": _run_spectrum,
             "rip-check": _run_rip_check, "spread-check": _run_spread_check, "sweep": _run_sweep}


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _error_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, BudgetExceeded):
        return EXIT_BUDGET
    return EXIT_NUMERIC


def run(argv=None, stdout=None, stderr=None):
    """Run one CLI invocation; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    cfg = None
    try:
        ns = build_parser().parse_args(argv)
        cfg = make_config(ns)
        result = _HANDLERS[cfg.subcommand](cfg)
    except (SpreadlabError, ArithmeticError) as exc:
        code = _error_code(exc) if isinstance(exc, SpreadlabError) else EXIT_NUMERIC
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        if cfg is not None:
            err["config"] = asdict(cfg)
        print(json.dumps(err, default=_jsonable), file=stderr)
        return code
    report = {"version": __version__, "config": asdict(cfg), "result": result}
    text = json.dumps(report, default=_jsonable, indent=2)
    if cfg.report:
        with open(cfg.report, "w") as fh:
            fh.write(text + "\n")
    print(text, file=stdout)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
