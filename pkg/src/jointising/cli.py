"""Command-line entry point.

Every subcommand writes its outputs plus a ``manifest.json`` with the fully
resolved parameters into ``--out``. Parameters are resolved as built-in
defaults, then ``--config`` (a JSON object, or a previous manifest), then
explicit flags. Passing a manifest back through ``--config`` reproduces a
run.

Exit status is 0 on success, 2 for usage errors and 1 for runtime
failures; failures print a single ``error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .core import BinaryDataset, CategoryCollection, PenaltySpec
from .evaluation import average_roc, roc_curve, roc_summary, write_json, write_roc_csv
from .joint import fit_joint, fit_path, fit_separate
from .rollcall import AnalysisConfig, analyze, load_votes
from .selection import _map, cross_validate, default_grid, stability_select
from .synthetic import (
    GIBBS_BURNIN,
    GIBBS_THIN,
    SimulationDesign,
    make_design,
    simulate,
)


class UsageError(Exception):
    pass


DEFAULTS = {
    "simulate": {"graph": "chain", "p": 10, "K": 3, "rho": 0.0, "n": [100], "m": 1,
                 "burnin": GIBBS_BURNIN, "thin": GIBBS_THIN, "replicate": 0,
                 "magnitude": [0.5, 1.0], "centered": False},
    "fit": {"data": None, "labels": None, "lam": None, "lam2": 0.0, "method": "joint",
            "no_lla": False},
    "cv": {"data": None, "labels": None, "grid": None, "auto": False, "grid_size": 20,
           "grid_ratio": 0.01, "folds": 5, "lam2": 0.0},
    "stability": {"data": None, "labels": None, "lam": None, "lam2": 0.0, "B": 100,
                  "alpha": 0.4},
    "roc": {"truth": None, "data": None, "grid": None, "grid_size": 20, "grid_ratio": 0.01,
            "replicates": 1, "methods": ["joint", "separate"], "lam2": 0.0,
            "burnin": GIBBS_BURNIN, "thin": GIBBS_THIN},
    "rollcall": {"votes": None, "format": "csv", "members": None, "categories": None,
                 "strategy": "party_majority", "alpha": 0.4, "lam": None, "lam2": 0.01,
                 "B": 100, "folds": 5, "grid_size": 20, "grid_ratio": 0.01},
}
COMMON = {"seed": 0, "jobs": 1, "out": "."}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointising", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    S = argparse.SUPPRESS

    def add(name, help):
        p = sub.add_parser(name, help=help, argument_default=S)
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--jobs", type=int, help="worker processes (default 1)")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--config", help="JSON config or manifest; flags override it")
        return p

    p = add("simulate", "draw a synthetic design and one data set per category")
    p.add_argument("--graph", choices=["chain", "nn", "sf"])
    p.add_argument("--p", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--n", type=int, nargs="+", help="one size, or one per category")
    p.add_argument("--m", type=int, help="edges per new node for sf graphs")
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--replicate", type=int)
    p.add_argument("--magnitude", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--centered", action="store_true")

    def data_args(p):
        p.add_argument("--data", nargs="+", help="one CSV per category")
        p.add_argument("--labels", nargs="+")

    p = add("fit", "fit joint or separate models at one lambda")
    data_args(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda2", dest="lam2", type=float)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--joint", dest="method", action="store_const", const="joint")
    g.add_argument("--separate", dest="method", action="store_const", const="separate")
    p.add_argument("--no-lla", dest="no_lla", action="store_true",
                   help="joint fit without reweighting (returns the separate start)")

    p = add("cv", "choose lambda by cross-validation")
    data_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid", type=float, nargs="+")
    g.add_argument("--auto", action="store_true", help="log-spaced grid below lambda_max")
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--grid-ratio", dest="grid_ratio", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--lambda2", dest="lam2", type=float)

    p = add("stability", "bootstrap selection frequencies")
    data_args(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda2", dest="lam2", type=float)
    p.add_argument("--B", type=int)
    p.add_argument("--alpha", type=float)

    p = add("roc", "ROC curves of joint and separate paths against a design")
    p.add_argument("--truth", help="design JSON written by simulate")
    p.add_argument("--data", nargs="+", help="CSV per category; simulated when omitted")
    p.add_argument("--grid", type=float, nargs="+")
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--grid-ratio", dest="grid_ratio", type=float)
    p.add_argument("--replicates", type=int)
    p.add_argument("--methods", nargs="+", choices=["joint", "separate"])
    p.add_argument("--lambda2", dest="lam2", type=float)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)

    p = add("rollcall", "roll-call analysis: impute, filter, fit, bootstrap, export")
    p.add_argument("--votes")
    p.add_argument("--format", choices=["csv", "senate_lis_xml"])
    p.add_argument("--members")
    p.add_argument("--categories", nargs="+")
    p.add_argument("--strategy", choices=["party_majority", "knn_majority",
                                          "opposite_party_majority", "uniform_random"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda", dest="lam", type=float, help="skip cross-validation")
    p.add_argument("--lambda2", dest="lam2", type=float)
    p.add_argument("--B", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--grid-ratio", dest="grid_ratio", type=float)
    return parser


def _resolve(command: str, ns: argparse.Namespace) -> dict:
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    params = {**COMMON, **DEFAULTS[command]}
    if getattr(ns, "config", None):
        try:
            cfg = json.loads(Path(ns.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        if "params" in cfg:
            if cfg.get("command") not in (None, command):
                raise UsageError(f"config is a {cfg['command']} manifest, not {command}")
            cfg = cfg["params"]
        unknown = sorted(set(cfg) - set(params))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {unknown}")
        params.update(cfg)
    params.update(given)
    return params


def _require(params, *keys):
    for k in keys:
        if params.get(k) in (None, [], ""):
            raise UsageError(f"--{k.replace('lam', 'lambda').replace('_', '-')} is required")


def _check(params):
    if params["jobs"] < 1:
        raise UsageError("--jobs must be at least 1")
    for k in ("lam", "lam2"):
        if params.get(k) is not None and params[k] < 0:
            raise UsageError(f"--{k.replace('lam', 'lambda')} must be nonnegative")
    if "alpha" in params and not 0.0 <= params["alpha"] <= 1.0:
        raise UsageError("--alpha must lie in [0, 1]")
    if "rho" in params and params["rho"] < 0:
        raise UsageError("--rho must be nonnegative")
    for k in ("p", "K", "B", "replicates", "grid_size"):
        if k in params and params[k] < 1:
            raise UsageError(f"--{k.replace('_', '-')} must be positive")
    if "folds" in params and params["folds"] < 2:
        raise UsageError("--folds must be at least 2")


def _load_collection(params) -> CategoryCollection:
    paths = [Path(p) for p in params["data"]]
    labels = params.get("labels") or [p.stem for p in paths]
    if len(labels) != len(paths):
        raise UsageError("--labels needs one label per data file")
    return CategoryCollection(tuple(BinaryDataset.from_csv(p) for p in paths), tuple(labels))


def _manifest(out: Path, command: str, params: dict, outputs: list[str], extra=None):
    m = {"command": command, "version": __version__, "params": params, "outputs": outputs}
    m.update(extra or {})
    write_json(out / "manifest.json", m)


def _cmd_simulate(params, out):
    n = params["n"]
    if len(n) not in (1, params["K"]):
        raise UsageError("--n takes one size or one per category")
    sizes = n * params["K"] if len(n) == 1 else n
    design = make_design(params["graph"], params["p"], params["K"], params["rho"], sizes,
                         params["seed"], params["m"], magnitude=tuple(params["magnitude"]),
                         centered=params["centered"])
    data = simulate(design, params["burnin"], params["thin"], params["replicate"])
    design.save(out / "design.json")
    outputs = ["design.json"]
    for k, d in enumerate(data):
        name = f"category{k + 1}.csv"
        d.to_csv(out / name)
        outputs.append(name)
    return outputs, {}


def _cmd_fit(params, out):
    _require(params, "data", "lam")
    col = _load_collection(params)
    pen = PenaltySpec(params["lam"], params["lam2"])
    if params["method"] == "separate":
        model = fit_separate(col, pen)
    else:
        model = fit_joint(col, pen, max_lla_iters=0 if params["no_lla"] else 50)
    model.save(out / "model.json")
    return ["model.json"], {"converged": model.converged,
                            "edges": [int(m.sum() // 2) for m in model.edge_mask()]}


def _grid(params, col):
    if params.get("grid"):
        return [float(v) for v in params["grid"]]
    return default_grid(col, params["lam2"], params["grid_size"], params["grid_ratio"]).tolist()


def _cmd_cv(params, out):
    _require(params, "data")
    if not params["grid"] and not params["auto"]:
        raise UsageError("give --grid values or --auto")
    col = _load_collection(params)
    res = cross_validate(col, _grid(params, col), params["folds"], params["lam2"],
                         params["seed"], n_jobs=params["jobs"])
    write_json(out / "cv.json", res.to_dict())
    return ["cv.json"], {"best_lambda": res.best_lambda}


def _cmd_stability(params, out):
    _require(params, "data", "lam")
    col = _load_collection(params)
    rep = stability_select(col, params["lam"], params["lam2"], params["B"], params["alpha"],
                           params["seed"], n_jobs=params["jobs"])
    write_json(out / "stability.json", rep.to_dict())
    return ["stability.json"], {"stable_edges": [len(g) for g in rep.stable_graphs()]}


def _roc_replicate(args):
    design, col, grid, methods, lam2 = args
    truth = design.truth()
    res = {}
    for method in methods:
        path = fit_path(col, grid, lam2, method)
        try:
            res[method] = roc_curve(truth, path)
        except ValueError:
            res[method] = ([], roc_curve(truth, path, pooled_only=True)[1])
    return res


def _cmd_roc(params, out):
    _require(params, "truth")
    design = SimulationDesign.load(params["truth"])
    if params.get("data"):
        cols = [_load_collection({"data": params["data"], "labels": None})]
    else:
        cols = [simulate(design, params["burnin"], params["thin"], r)
                for r in range(params["replicates"])]
    grid = _grid(params, cols[0])
    methods = list(dict.fromkeys(params["methods"]))
    jobs = [(design, c, grid, methods, params["lam2"]) for c in cols]
    results = _map(_roc_replicate, jobs, params["jobs"])
    rows, summary = [], {}
    for method in methods:
        pooled = average_roc([r[method][1] for r in results])
        per_cat = [average_roc([r[method][0][k] for r in results])
                   for k in range(len(results[0][method][0]))]
        rows += [(method, c) for c in per_cat] + [(method, pooled)]
        summary[method] = per_cat + [pooled]
    write_roc_csv(out / "roc.csv", rows)
    write_json(out / "roc_summary.json", {"auc": roc_summary(summary), "lambda_grid": grid})
    return ["roc.csv", "roc_summary.json"], {}


def _cmd_rollcall(params, out):
    _require(params, "votes")
    table = load_votes(params["votes"], params["format"], params["members"])
    cfg = AnalysisConfig(
        strategy=params["strategy"], categories=params["categories"], alpha=params["alpha"],
        lam=params["lam"], lam2=params["lam2"], B=params["B"], folds=params["folds"],
        grid_size=params["grid_size"], grid_ratio=params["grid_ratio"],
        seed=params["seed"], n_jobs=params["jobs"],
    )
    res = analyze(table, cfg, out)
    # analyze writes its own manifest; record the CLI parameters beside it
    m = json.loads((out / "manifest.json").read_text())
    m["params"] = params
    m["version"] = __version__
    write_json(out / "manifest.json", m)
    return None, {"lambda": res.lam}


COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "cv": _cmd_cv,
    "stability": _cmd_stability,
    "roc": _cmd_roc,
    "rollcall": _cmd_rollcall,
}


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split()) or type(exc).__name__


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.command is None:
        parser.print_usage(sys.stderr)
        print("error: a command is required", file=sys.stderr)
        return 2
    try:
        params = _resolve(ns.command, ns)
        _check(params)
        out = Path(params["out"])
        out.mkdir(parents=True, exist_ok=True)
        outputs, extra = COMMANDS[ns.command](params, out)
        if outputs is not None:
            _manifest(out, ns.command, params, outputs, extra)
    except UsageError as exc:
        print(f"error: usage: {_one_line(exc)}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:
        print(f"error: {ns.command}: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
