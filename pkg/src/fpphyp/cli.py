"""Command-line front end.

Exit codes: 0 success, 1 other runtime error, 2 gate failure or verification
violation, 3 configuration / input / I/O error, 4 budget exhausted.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .combing import analyze, builtin_automaton, cone_measure, load_automaton, \
    verify_geodesic_language
from .environment import Environment, WeightDistribution
from .errors import BudgetExceeded, DomainError, FormatError, FPPError
from .experiments import load_config, run_experiment
from .experiments.io import write_json
from .geometry import gromov_product
from .groups import Budget, FreeModel, build_model
from .metric import passage_time

EXIT_OK, EXIT_RUNTIME, EXIT_GATE, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3, 4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with [model], [distribution], [experiment]")
    p.add_argument("--seed", type=int, help="override the experiment seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (never changes results)")
    p.add_argument("--budget-relaxations", type=int, dest="budget",
                   help="edge-relaxation cap per search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpphyp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    v = sub.add_parser("validate", help="verify an automaton and print its spectral summary")
    _common(v)
    v.add_argument("--automaton", help="automaton file (default: builtin for the model)")
    v.add_argument("--radius", type=int, default=None, help="verification radius")

    q = sub.add_parser("query", help="single passage / cone / gromov computation")
    _common(q)
    q.add_argument("what", choices=["passage", "cone", "gromov"])
    q.add_argument("args", nargs="+")

    r = sub.add_parser("run", help="run the configured experiment")
    _common(r)
    r.add_argument("--jsonl", action="store_true", help="also write records.jsonl")

    rep = sub.add_parser("report", help="print a finished run's summary and gates")
    _common(rep)
    return parser


def _model_and_dist(args):
    if args.config:
        cfg = load_config(args.config)
        return cfg, cfg.build_model(), cfg.build_distribution()
    return None, FreeModel(2), WeightDistribution.uniform()


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def cmd_validate(args) -> int:
    cfg, model, _ = _model_and_dist(args)
    source = args.automaton or (cfg.model.get("automaton") if cfg else None)
    aut = load_automaton(source, model) if source else builtin_automaton(model)
    radius = args.radius if args.radius is not None else int(
        cfg.model.get("verify_radius", 6) if cfg else 6)
    report = verify_geodesic_language(aut, model, radius)
    out = {"model": model.descriptor(), "states": aut.n_states, "verification": report.as_dict()}
    if report.ok:
        an = analyze(aut)
        out["spectral"] = {
            "lambda": an.lam, "d": an.d,
            "components": [list(c) for c in an.components.components],
            "maximal": an.components.maximal, "periods": an.components.periods,
            "residual_r": an.spectral.residual_r, "residual_l": an.spectral.residual_l,
            "mu": an.markov.mu.tolist(),
        }
    _emit(out)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_json(Path(args.out) / "validation.json", out)
    return EXIT_OK if report.ok else EXIT_GATE


def cmd_query(args) -> int:
    cfg, model, dist = _model_and_dist(args)
    if args.what == "passage":
        if len(args.args) != 2:
            raise DomainError("passage needs two elements")
        x, y = (model.parse(a) for a in args.args)
        seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
        env = Environment(model, seed, dist, cache={})
        budget = Budget(args.budget) if args.budget else Budget()
        res = passage_time(env, x, y, budget=budget)
        _emit({"time": res.time, "path": [model.format(v) for v in res.path],
               "edges": res.edges, "relaxations": res.relaxations,
               "near_ties": res.near_ties, "seed": seed})
    elif args.what == "cone":
        if len(args.args) != 1:
            raise DomainError("cone needs one element")
        g = model.parse(args.args[0])
        an = analyze(builtin_automaton(model))
        _emit({"element": model.format(g), "cone_measure": cone_measure(an, model, g)})
    else:
        if len(args.args) != 3:
            raise DomainError("gromov needs three elements x y o")
        x, y, o = (model.parse(a) for a in args.args)
        _emit({"gromov_product": gromov_product(model, x, y, o)})
    return EXIT_OK


def cmd_run(args) -> int:
    if not args.config:
        raise FormatError("run needs --config")
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, budget_relaxations=args.budget)
    out = args.out or cfg.output or "fpphyp-out"
    result = run_experiment(cfg, out, workers=args.workers, jsonl=args.jsonl)
    _emit({"out": str(out), "gates": result.gates, "passed": result.passed})
    return EXIT_OK if result.passed else EXIT_GATE


def cmd_report(args) -> int:
    if not args.out:
        raise FormatError("report needs --out")
    path = Path(args.out) / "summary.json"
    try:
        summary = json.loads(path.read_text())
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    _emit(summary)
    return EXIT_OK if summary.get("passed", False) else EXIT_GATE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"validate": cmd_validate, "query": cmd_query,
               "run": cmd_run, "report": cmd_report}[args.verb]
    try:
        return handler(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (FormatError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FPPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
