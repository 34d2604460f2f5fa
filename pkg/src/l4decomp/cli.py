"""Command line interface: ``l4decomp {synth,decompose,sweep,landscape,compare}``.

Options may also come from a JSON file given with ``--config``; flags given
on the command line take precedence over the file, which takes precedence
over built-in defaults.  Keys in the file use the option names with dashes
replaced by underscores (``base_seed``, ``tol_grad``, ...).

Exit codes: 0 success, 1 I/O error, 2 invalid arguments, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import baseline_adm, experiments, landscape, matio, metrics
from .model import DimensionError, MatrixKind, ProblemDims, SparsityModel, generate_A, generate_X, synthesize
from .pipeline import InitMode, dumps_report, recover_all, run_report
from .precond import IllConditionedError
from .solver import SolverOptions, TRACE_FIELDS

log = logging.getLogger("l4decomp")

EXIT_OK, EXIT_IO, EXIT_ARGS, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    """Invalid combination of arguments (exit code 2)."""


class NumericalFailure(Exception):
    """A computation failed for numerical reasons (exit code 3)."""


SOLVER_DEFAULTS = {"tol_grad": 1e-8, "tol_curv": 1e-6, "max_iters": 10_000}

DEFAULTS: Dict[str, dict] = {
    "synth": {"sigma": 1.0, "seed": 0, "kind": "full-column-rank", "format": "bin"},
    "decompose": {
        "theta": None, "method": "l4", "init": "per-step", "rho_e": metrics.DEFAULT_RHO_E, "seed": 0,
        "truth": None, "A": None, "lam": None, "deterministic": False, **SOLVER_DEFAULTS,
    },
    "sweep": {
        "p": 60, "r": [5, 10], "theta": [0.05, 0.1, 0.3], "n": [4000], "trials": experiments.DESK_TRIALS,
        "base_seed": 0, "mode": "single", "kind": "full-column-rank", "rho_e": metrics.DEFAULT_RHO_E,
        "jobs": 1, "deterministic": False, "paper_scale": False, **SOLVER_DEFAULTS,
    },
    "landscape": {
        "A": None, "p": 3, "r": None, "analytic": False, "theta": 0.1, "samples": 1000, "c_star": None,
        "C_star": landscape.DEFAULT_C_STAR_UPPER, "starts": 20, "seed": 0, "deterministic": False,
    },
    "compare": {
        "bundle": None, "p": 100, "r": 10, "theta": 0.1, "n": 12000, "seed": 0, "kind": "semi-orthogonal",
        "lam": None, "deterministic": False, **SOLVER_DEFAULTS,
    },
}

S = argparse.SUPPRESS


def _add_solver(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--tol-grad", type=float, default=S, help="gradient tolerance (default 1e-8)")
    sp.add_argument("--tol-curv", type=float, default=S, help="curvature tolerance (default 1e-6)")
    sp.add_argument("--max-iters", type=int, default=S, help="solver iteration cap (default 10000)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l4decomp", description="Sparse low-rank decomposition by l4 maximization")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a seeded (A, X, Y) bundle")
    sp.add_argument("--config", default=S)
    sp.add_argument("--p", type=int, default=S)
    sp.add_argument("--r", type=int, default=S)
    sp.add_argument("--n", type=int, default=S)
    sp.add_argument("--theta", type=float, default=S)
    sp.add_argument("--sigma", type=float, default=S)
    sp.add_argument("--seed", type=int, default=S)
    sp.add_argument("--kind", choices=[k.value for k in MatrixKind], default=S)
    sp.add_argument("--format", choices=["bin", "csv"], default=S)
    sp.add_argument("--out", default=S, help="output directory")

    sp = sub.add_parser("decompose", help="recover A from Y")
    sp.add_argument("--config", default=S)
    sp.add_argument("--Y", dest="Y", default=S, help="data matrix file")
    sp.add_argument("--r", type=int, default=S)
    sp.add_argument("--theta", type=float, default=S, help="sparsity level (only rescales the objective)")
    sp.add_argument("--method", choices=["l4", "adm"], default=S)
    sp.add_argument("--init", choices=[m.value for m in InitMode], default=S)
    sp.add_argument("--truth", default=S, help="synth bundle directory with the ground truth A")
    sp.add_argument("--A", dest="A", default=S, help="ground truth A file (alternative to --truth)")
    sp.add_argument("--rho-e", type=float, default=S)
    sp.add_argument("--lam", type=float, default=S, help="ADM penalty (default: data-driven)")
    sp.add_argument("--seed", type=int, default=S)
    sp.add_argument("--deterministic", action="store_true", default=S)
    sp.add_argument("--out", default=S, help="output directory")
    _add_solver(sp)

    sp = sub.add_parser("sweep", help="seeded recovery experiments over a grid")
    sp.add_argument("--config", default=S)
    sp.add_argument("--p", type=int, default=S)
    sp.add_argument("--r", type=int, nargs="+", default=S)
    sp.add_argument("--theta", type=float, nargs="+", default=S)
    sp.add_argument("--n", type=int, nargs="+", default=S)
    sp.add_argument("--trials", type=int, default=S)
    sp.add_argument("--base-seed", type=int, default=S)
    sp.add_argument("--mode", choices=[m.value for m in experiments.Mode], default=S)
    sp.add_argument("--kind", choices=[k.value for k in MatrixKind], default=S)
    sp.add_argument("--rho-e", type=float, default=S)
    sp.add_argument("--jobs", type=int, default=S)
    sp.add_argument("--deterministic", action="store_true", default=S, help="omit timings and timestamps")
    sp.add_argument("--paper-scale", action="store_true", default=S,
                    help="200 trials; unless given, p=100, n=5000 and the full theta/r grid")
    sp.add_argument("--out", default=S, help="output directory")
    _add_solver(sp)

    sp = sub.add_parser("landscape", help="region / curvature / critical point report")
    sp.add_argument("--config", default=S)
    sp.add_argument("--A", dest="A", default=S, help="semi-orthogonal A file")
    sp.add_argument("--analytic", action="store_true", default=S, help="use A = I_p")
    sp.add_argument("--p", type=int, default=S)
    sp.add_argument("--r", type=int, default=S, help="columns of a random semi-orthogonal A (default p)")
    sp.add_argument("--theta", type=float, default=S)
    sp.add_argument("--samples", type=int, default=S)
    sp.add_argument("--c-star", dest="c_star", type=float, default=S)
    sp.add_argument("--C-star", dest="C_star", type=float, default=S)
    sp.add_argument("--starts", type=int, default=S, help="solver runs feeding the taxonomy")
    sp.add_argument("--seed", type=int, default=S)
    sp.add_argument("--deterministic", action="store_true", default=S)
    sp.add_argument("--out", default=S, help="output directory")

    sp = sub.add_parser("compare", help="l4 pipeline versus the ADM baseline on one instance")
    sp.add_argument("--config", default=S)
    sp.add_argument("--bundle", default=S, help="synth bundle directory (otherwise one is generated)")
    sp.add_argument("--p", type=int, default=S)
    sp.add_argument("--r", type=int, default=S)
    sp.add_argument("--n", type=int, default=S)
    sp.add_argument("--theta", type=float, default=S)
    sp.add_argument("--seed", type=int, default=S)
    sp.add_argument("--kind", choices=[k.value for k in MatrixKind], default=S)
    sp.add_argument("--lam", type=float, default=S)
    sp.add_argument("--deterministic", action="store_true", default=S)
    sp.add_argument("--out", default=S, help="output directory")
    _add_solver(sp)
    return parser


def resolve(ns: argparse.Namespace) -> dict:
    """Merge built-in defaults, the JSON config file and explicit flags."""
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "verbose")}
    cfg: dict = {}
    if "config" in given:
        path = given.pop("config")
        try:
            cfg = json.loads(Path(path).read_text())
        except OSError:
            raise
        except ValueError as exc:
            raise UsageError(f"config {path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError(f"config {path}: expected a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = set(cfg) - set(DEFAULTS[ns.command]) - {"out", "p", "r", "n", "theta", "Y"}
        if unknown:
            raise UsageError(f"config {path}: unknown keys {sorted(unknown)}")
    merged = {**DEFAULTS[ns.command], **cfg, **given}
    # options set by the user (file or flag), as opposed to built-in defaults
    merged["_explicit"] = set(cfg) | set(given)
    return merged


def _require(args: dict, *names: str) -> None:
    missing = [n for n in names if args.get(n) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _solver_opts(args: dict) -> SolverOptions:
    try:
        return SolverOptions(tol_grad=args["tol_grad"], tol_curv=args["tol_curv"], max_iters=args["max_iters"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _outdir(args: dict) -> Path:
    out = Path(args.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _ext(fmt: str) -> str:
    return ".csv" if fmt == "csv" else ".l4m"


# -- commands -------------------------------------------------------------------
def cmd_synth(args: dict) -> int:
    _require(args, "p", "r", "n", "theta", "out")
    try:
        dims = ProblemDims(args["p"], args["r"], args["n"])
        sm = SparsityModel(args["theta"], args["sigma"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    seed = int(args["seed"])
    sa, sx = experiments.trial_seeds(seed)
    A = generate_A(dims, args["kind"], sa)
    X = generate_X(dims, sm, sx)
    Y = synthesize(A, X)
    out = _outdir(args)
    ext = _ext(args["format"])
    files = {name: f"{name}{ext}" for name in ("A", "X", "Y")}
    for name, mat in (("A", A.entries), ("X", X.entries), ("Y", Y)):
        matio.save_matrix(out / files[name], mat)
    manifest = {
        "p": dims.p, "r": dims.r, "n": dims.n, "theta": sm.theta, "sigma": sm.sigma,
        "kind": MatrixKind(args["kind"]).value, "seed": seed, "seed_A": sa, "seed_X": sx,
        "format": args["format"], "files": files,
    }
    _write_json(out / "manifest.json", manifest)
    print(f"seed {seed}")
    return EXIT_OK


def _load_bundle(path) -> dict:
    d = Path(path)
    manifest = json.loads((d / "manifest.json").read_text())
    mats = {k: matio.load_matrix(d / f) for k, f in manifest["files"].items()}
    return {"manifest": manifest, **mats}


def cmd_decompose(args: dict) -> int:
    _require(args, "Y", "r")
    Y = matio.load_matrix(args["Y"])
    r = int(args["r"])
    if not 1 <= r < min(Y.shape):
        raise UsageError(f"need 1 <= r < min(p, n); got r={r} for Y of shape {Y.shape}")
    A_true = None
    if args["truth"] is not None:
        A_true = _load_bundle(args["truth"])["A"]
    elif args["A"] is not None:
        A_true = matio.load_matrix(args["A"])
    out = _outdir(args)
    params = {k: args[k] for k in ("r", "theta", "method", "init", "seed", "rho_e")}
    params["shape"] = list(Y.shape)
    try:
        if args["method"] == "adm":
            t0 = time.perf_counter()
            A_est, res = baseline_adm.adm_recover_all(Y, r, baseline_adm.AdmOptions(lam=args["lam"]))
            report = {
                "params": params,
                "columns": [
                    {"index": j, "status": "converged" if x.converged else "max-iters", "iterations": x.n_iters,
                     "grad_norm": None, "overlap": None, "retried": False, "fallback_init": False,
                     "lambda": x.lam, "messages": x.diagnostics}
                    for j, x in enumerate(res)
                ],
                "iterations": sum(x.n_iters for x in res),
                "all_converged": all(x.converged for x in res),
                "wall_time": time.perf_counter() - t0,
            }
            trace_rows = []
        else:
            result = recover_all(Y, r, _solver_opts(args), theta=args["theta"], init=args["init"], seed=args["seed"])
            A_est = result.A_est
            report = run_report(result, params)
            for col in report["columns"]:
                col["lambda"] = None  # same column schema as the ADM path
            if args["deterministic"]:
                report.pop("wall_time", None)
            trace_rows = [(j, tr) for j, tr in enumerate(result.traces)]
    except IllConditionedError as exc:
        raise NumericalFailure(str(exc)) from exc
    if A_true is not None:
        rep = metrics.recovery_report(A_est, A_true, args["rho_e"], full=True)
        report["recovery"] = rep.to_dict()
    matio.save_matrix(out / "A_est.l4m", A_est.entries)
    if trace_rows:
        lines = ["column," + ",".join(TRACE_FIELDS)]
        for j, tr in trace_rows:
            lines.extend(f"{j},{ln}" for ln in tr.to_csv().splitlines()[1:])
        (out / "traces.csv").write_text("\n".join(lines) + "\n")
    (out / "report.json").write_text(dumps_report(report, args["deterministic"]))
    if "recovery" in report:
        rec = report["recovery"]
        print(f"frobenius_err {rec['frobenius_err']:.6g} success {rec['success']}")
    return EXIT_OK


def _grid_from(args: dict) -> experiments.ExperimentGrid:
    trials, p, rs, thetas, ns = args["trials"], args["p"], args["r"], args["theta"], args["n"]
    if args["paper_scale"]:
        trials = experiments.PAPER_TRIALS
        explicit = args.get("_explicit", set())
        p = p if "p" in explicit else 100
        rs = rs if "r" in explicit else list(experiments.PAPER_RS)
        thetas = thetas if "theta" in explicit else list(experiments.PAPER_THETAS)
        ns = ns if "n" in explicit else [5000]
    listify = lambda v: list(v) if isinstance(v, (list, tuple)) else [v]  # noqa: E731
    try:
        return experiments.ExperimentGrid(
            p=int(p), r_values=tuple(int(x) for x in listify(rs)), theta_values=tuple(float(x) for x in listify(thetas)),
            n_values=tuple(int(x) for x in listify(ns)), trials=int(trials), base_seed=int(args["base_seed"]),
            mode=args["mode"], kind=args["kind"], rho_e=float(args["rho_e"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_sweep(args: dict) -> int:
    grid = _grid_from(args)
    if int(args["jobs"]) < 1:
        raise UsageError("--jobs must be >= 1")
    out = _outdir(args)
    log.info("sweep: %d cells x %d trials", len(grid.cells()), grid.trials)
    trials, cells = experiments.run_sweep(grid, _solver_opts(args), jobs=int(args["jobs"]))
    (out / "cells.csv").write_text(experiments.cells_csv(cells))
    (out / "trials.csv").write_text(experiments.trials_csv(trials))
    (out / "heatmap.svg").write_text(experiments.sweep_heatmap(grid, cells, args["deterministic"]))
    if not args["deterministic"]:
        (out / "timings.csv").write_text(experiments.timings_csv(cells))
    for c in cells:
        print(f"r={c.r} theta={c.theta:g} n={c.n} success_rate={c.success_rate:.3f} failures={c.failures}")
    return EXIT_OK


def cmd_landscape(args: dict) -> int:
    if int(args["samples"]) < 1:
        raise UsageError("sample budget must be positive")
    theta = float(args["theta"])
    if not 0.0 < theta < 1.0:
        raise UsageError("theta must lie in (0, 1)")
    if args["A"] is not None:
        A = matio.load_matrix(args["A"])
    elif args["analytic"]:
        A = np.eye(int(args["p"]))
    else:
        p = int(args["p"])
        r = int(args["r"] or p)
        A = generate_A((p, r), MatrixKind.SEMI_ORTHOGONAL, int(args["seed"])).entries
    if np.linalg.norm(A.T @ A - np.eye(A.shape[1])) > 1e-8:
        raise UsageError("landscape probes need a semi-orthogonal A")
    cfg = landscape.LandscapeConfig(
        theta=theta, samples=int(args["samples"]), c_star=args["c_star"], C_star=float(args["C_star"]),
        solver_starts=int(args["starts"]), seed=int(args["seed"]),
    )
    try:
        rep = landscape.landscape_report(A, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _outdir(args)
    (out / "landscape.json").write_text(rep.to_json())
    (out / "landscape.svg").write_text(rep.to_svg())
    if rep.outside_theory:
        print("outside-theory: " + "; ".join(rep.outside_theory), file=sys.stderr)
    hist = rep.to_dict()["taxonomy_histogram"]
    print("regions " + " ".join(f"{k}={v}" for k, v in rep.region_counts.items()) + " | taxonomy " +
          " ".join(f"{k}={v}" for k, v in hist.items()))
    return EXIT_OK


def cmd_compare(args: dict) -> int:
    if args["bundle"] is not None:
        b = _load_bundle(args["bundle"])
        A, Y = b["A"], b["Y"]
        r = int(b["manifest"]["r"])
        theta = float(b["manifest"]["theta"])
    else:
        try:
            A_m, _, Y = experiments.make_instance(
                int(args["p"]), int(args["r"]), int(args["n"]), float(args["theta"]), int(args["seed"]), args["kind"]
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        A, r, theta = A_m.entries, int(args["r"]), float(args["theta"])
    try:
        l4 = recover_all(Y, r, _solver_opts(args), theta=theta, seed=int(args["seed"]))
        A_adm, _ = baseline_adm.adm_recover_all(Y, r, baseline_adm.AdmOptions(lam=args["lam"]))
    except IllConditionedError as exc:
        raise NumericalFailure(str(exc)) from exc
    rep_l4 = metrics.recovery_report(l4.A_est, A)
    rep_adm = metrics.recovery_report(A_adm, A)
    report = {
        "params": {"r": r, "theta": theta, "shape": list(Y.shape)},
        "l4": rep_l4.to_dict(),
        "adm": rep_adm.to_dict(),
        "l4_better": rep_l4.frobenius_err < rep_adm.frobenius_err,
    }
    out = _outdir(args)
    _write_json(out / "compare.json", report)
    print(f"l4 {rep_l4.frobenius_err:.6g} adm {rep_adm.frobenius_err:.6g}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "decompose": cmd_decompose,
    "sweep": cmd_sweep,
    "landscape": cmd_landscape,
    "compare": cmd_compare,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = resolve(ns)
        return COMMANDS[ns.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (OSError, matio.FormatError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
