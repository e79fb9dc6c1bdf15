"""Command-line entry point.

Exit codes: 0 ok, 2 invalid input or model, 3 a solver hit its iteration
budget (outputs are still written), 4 file I/O failure. Failures print one
JSON object ``{"error": code, "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import experiments
from .decomposition import FitOptions, all_flow_tables, fit_all, write_sidecar
from .errors import NonConvergence, UnfairEdgeError
from .graph import read_model, write_model
from .metrics import cumulative_report, unfairness_vector
from .procedures import rank_edges, remove_discrimination
from .synthesis import read_score_spec

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4


def parse_query(text: str) -> dict[str, int]:
    """``"R=0,A=1"`` -> ``{"R": 0, "A": 1}``."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, sep, value = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected name=index, got {part!r}")
        try:
            out[name.strip()] = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"value of {name.strip()!r} must be an integer index") from None
    if not out:
        raise argparse.ArgumentTypeError("empty query")
    return out


def nonnegative(text: str) -> float:
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def int_list(text: str) -> list[int]:
    return [int(float(v)) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unfairedge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True, kind="linear"):
        if model:
            p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--kind", choices=("linear", "mlp"), default=kind)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epochs", type=int, default=5000, help="MLP training epochs")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("--model", required=True)

    p = sub.add_parser("fit", help="fit f^w for every non-root node")
    common(p)

    p = sub.add_parser("priority", help="rank unfair edges")
    common(p)
    p.add_argument("--s", type=parse_query, required=True, help="sensitive query, e.g. R=0,A=1,G=0")
    p.add_argument("--y", type=parse_query, required=True, help="decision query, e.g. J=1")
    p.add_argument("--wu", type=nonnegative, default=0.5)
    p.add_argument("--wp", type=nonnegative, default=0.5)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("remove", help="regenerate a de-biased model")
    common(p, kind="mlp")
    p.add_argument("--iterations", type=int, default=1500, help="joint solver budget")

    p = sub.add_parser("experiment", help="reproduce a bail-model experiment")
    p.add_argument("name", choices=experiments.EXPERIMENTS)
    common(p, model=False)
    p.add_argument("--spec", help="score spec JSON (default: the shipped spec)")
    p.add_argument("--samples", type=int_list, default=[100, 1000, 10000], help="exp2 sample sizes")
    p.add_argument("--reps", type=int, default=10, help="exp2 repetitions")
    p.add_argument("--draws", type=int, default=20, help="edge-property lambda draws per theta")
    p.add_argument("--grid-size", type=int, default=25, help="model-compare points per node")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--no-plots", action="store_true")
    return parser


def _opts(args, **extra) -> FitOptions:
    return FitOptions(kind=args.kind, seed=args.seed, epochs=args.epochs, **extra)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args) -> dict:
    model = read_model(args.model)
    return {
        "valid": True,
        "variables": list(model.names),
        "sensitive": sorted(model.sensitive),
        "unfairEdges": [f"{a}->{b}" for a, b in model.graph.unfair_edges],
    }


def cmd_fit(args) -> dict:
    model = read_model(args.model)
    fitted = fit_all(model, _opts(args))
    out = _outdir(args)
    write_sidecar(fitted, out / "fitted.json")
    lines = ["node,kind,mse,converged"] + [
        f"{n},{f.kind},{f.fit_mse!r},{str(f.converged).lower()}" for n, f in fitted.items()
    ]
    (out / "fit.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"fitted": sorted(fitted), "sidecar": str(out / "fitted.json")}


def cmd_priority(args) -> dict:
    model = read_model(args.model)
    flows = all_flow_tables(model)
    fitted = fit_all(model, _opts(args), flows)
    mu = unfairness_vector(model, fitted, flows)
    report = cumulative_report(model, flows, mu, args.s, args.y)
    ranking = rank_edges(mu, {e: r.potential for e, r in report.per_edge.items()}, args.wu, args.wp)
    out = _outdir(args)
    (out / "priority.csv").write_text(ranking.to_csv(), encoding="utf-8")
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    write_sidecar(fitted, out / "fitted.json")
    if not args.no_plots:
        from .plotting import plot_priority

        plot_priority(ranking, out / "priority.svg")
    sys.stdout.write(ranking.to_csv())
    return {"c": report.c, "cUpper": report.c_upper, "boundHolds": report.bound_holds}


def cmd_remove(args) -> dict:
    model = read_model(args.model)
    result = remove_discrimination(model, _opts(args, removal_iter=args.iterations))
    out = _outdir(args)
    write_model(result.new_model, out / "new_model.json")
    (out / "removal.json").write_text(result.to_json(), encoding="utf-8")
    return {"sumMuBefore": result.sum_mu_before, "sumMuAfter": result.sum_mu_after,
            "utilityMse": result.utility_mse}


def cmd_experiment(args) -> dict:
    spec = read_score_spec(args.spec) if args.spec else None
    opts = _opts(args)
    name = args.name
    if name == "exp1":
        table = experiments.exp1(spec, opts=opts, jobs=args.jobs)
    elif name == "exp2":
        table = experiments.exp2(spec, args.samples, args.reps, args.seed, opts, jobs=args.jobs)
    elif name == "edge-property":
        table = experiments.edge_property(draws=args.draws, seed=args.seed, opts=opts, jobs=args.jobs)
    else:
        table = experiments.model_compare(spec, args.grid_size, args.seed, opts, jobs=args.jobs)
    out = _outdir(args)
    table.write_csv(out / f"{name}.csv")
    files = [str(out / f"{name}.csv")]
    if not args.no_plots:
        from .plotting import PLOTTERS

        PLOTTERS[name](table, out / f"{name}.svg")
        files.append(str(out / f"{name}.svg"))
    return {"experiment": name, "rows": len(table.rows), "files": files}


COMMANDS = {
    "validate": cmd_validate,
    "fit": cmd_fit,
    "priority": cmd_priority,
    "remove": cmd_remove,
    "experiment": cmd_experiment,
}


def _fail(code: str, message: str, status: int) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonConvergence)
            summary = COMMANDS[args.command](args)
    except UnfairEdgeError as exc:
        return _fail(exc.code, str(exc), EXIT_INVALID)
    except (OSError, UnicodeDecodeError) as exc:
        return _fail("io", str(exc), EXIT_IO)
    except ValueError as exc:
        return _fail("invalid", str(exc), EXIT_INVALID)
    stalled = [str(w.message) for w in caught if issubclass(w.category, NonConvergence)]
    for w in caught:
        if not issubclass(w.category, NonConvergence):
            warnings.showwarning(w.message, w.category, w.filename, w.lineno)
    if stalled:
        return _fail(NonConvergence.code, "; ".join(stalled), EXIT_NONCONVERGED)
    if args.command == "validate":
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    else:
        sys.stderr.write(json.dumps(summary) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
