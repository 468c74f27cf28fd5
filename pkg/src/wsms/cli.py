"""Command-line entry point: ``wsms validate|plan|run|bench``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence, TextIO

from wsms.catalog import Catalog, load_catalog, parse_catalog, validate_catalog
from wsms.errors import WsmsError
from wsms.executor import execute_plan
from wsms.generator import generate_corpus
from wsms.planner import STRATEGIES, ExecutionPlan, plan_query, to_dot
from wsms.relation import Relation
from wsms.simfabric import SimFabric, trace_csv
from wsms.sqlfront import parse_query, validate_query

EXIT_OK, EXIT_DOMAIN, EXIT_ENV = 0, 1, 2
BENCH_OPTIMAL_LIMIT = 8
BENCH_HEADER = "catalog_id,n_services,strategy,est_cost,measured_time,ratio_to_optimal"


class _EnvError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise _EnvError(f"cannot read {path}: {e.strerror or e}") from None


def _plan(catalog: Catalog, query: str, strategy: str) -> ExecutionPlan:
    vq = validate_query(parse_query(query), catalog)
    return plan_query(vq, catalog, strategy)


def relation_csv(r: Relation) -> str:
    lines = [",".join(r.schema)]
    lines.extend(",".join(str(v) for v in row) for row in r.rows)
    return "\n".join(lines) + "\n"


def cmd_validate(args, out: TextIO) -> int:
    problems = validate_catalog(parse_catalog(_read(args.catalog)))
    for v in problems:
        out.write(f"{v}\n")
    return EXIT_DOMAIN if problems else EXIT_OK


def cmd_plan(args, out: TextIO) -> int:
    catalog = load_catalog(_read(args.catalog))
    plan = _plan(catalog, args.query, args.strategy)
    if args.format == "dot":
        out.write(to_dot(plan.logical, catalog.services))
    else:
        out.write(plan.text())
    return EXIT_OK


def run_query(catalog: Catalog, query: str, strategy: str, seed: int, jitter: float, explain: bool) -> str:
    plan = _plan(catalog, query, strategy)
    fabric = SimFabric(catalog, seed=seed, jitter=jitter)
    result = execute_plan(plan, catalog, fabric)
    text = relation_csv(result.relation)
    if explain:
        text += "# cost\n" + "".join(f"{line}\n" for line in result.report.lines())
        text += "# trace\n" + trace_csv(result.report.trace)
    return text


def cmd_run(args, out: TextIO) -> int:
    catalog = load_catalog(_read(args.catalog))
    out.write(run_query(catalog, args.query, args.strategy, args.seed, args.jitter, args.explain))
    return EXIT_OK


def _bench_instances(args) -> list[tuple[str, str, str]]:
    if args.catalogs:
        root = Path(args.catalogs)
        if not root.is_dir():
            raise _EnvError(f"not a directory: {root}")
        out = []
        for path in sorted(root.glob("*.json")):
            text = _read(str(path))
            sql = path.with_suffix(".sql")
            if sql.exists():
                query = _read(str(sql)).strip()
            else:
                caps = dict.fromkeys(ws.capability for ws in parse_catalog(text).services.values())
                query = f"SELECT * FROM {', '.join(caps)}"
            out.append((path.stem, text, query))
        return out
    corpus = generate_corpus(args.generate, args.seed, unconstrained=args.unconstrained)
    return [(inst.catalog_id, inst.catalog_text, inst.query) for inst in corpus]


def bench_rows(instances, seed: int, jitter: float = 0.0) -> list[dict]:
    rows = []
    for catalog_id, text, query in instances:
        catalog = load_catalog(text)
        vq = validate_query(parse_query(query), catalog)
        n = len(vq.services)
        if n > BENCH_OPTIMAL_LIMIT:
            raise WsmsError(
                f"{catalog_id}: {n} services exceed the limit of {BENCH_OPTIMAL_LIMIT} for the optimal strategy"
            )
        plans = {s: plan_query(vq, catalog, s) for s in STRATEGIES}
        best = plans["optimal"].estimate.total
        for strategy in sorted(STRATEGIES):
            plan = plans[strategy]
            result = execute_plan(plan, catalog, SimFabric(catalog, seed=seed, jitter=jitter))
            est = plan.estimate.total
            rows.append({
                "catalog_id": catalog_id,
                "n_services": n,
                "strategy": strategy,
                "est_cost": est,
                "measured_time": result.report.measured_total,
                "ratio_to_optimal": est / best if best > 0 else 1.0,
            })
    return rows


def bench_csv(rows: list[dict]) -> str:
    lines = [BENCH_HEADER]
    for r in rows:
        lines.append(
            f"{r['catalog_id']},{r['n_services']},{r['strategy']},{r['est_cost']:.6f},"
            f"{r['measured_time']:.6f},{r['ratio_to_optimal']:.9f}"
        )
    return "\n".join(lines) + "\n"


def bench_summary(rows: list[dict]) -> dict[str, float]:
    by = {}
    for r in rows:
        by.setdefault(r["catalog_id"], {})[r["strategy"]] = r["est_cost"]
    ratios = [v["naive"] / v["greedy_heur"] for v in by.values() if v["greedy_heur"] > 0]
    wins = sum(v["greedy_heur"] <= v["naive"] + 1e-9 for v in by.values())
    return {
        "instances": len(by),
        "mean_naive_over_greedy_heur": sum(ratios) / len(ratios) if ratios else float("nan"),
        "greedy_heur_le_naive_fraction": wins / len(by) if by else float("nan"),
        "max_naive_over_greedy_heur": max(ratios, default=float("nan")),
    }


def cmd_bench(args, out: TextIO) -> int:
    rows = bench_rows(_bench_instances(args), args.seed, args.jitter)
    text = bench_csv(rows)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as e:
            raise _EnvError(f"cannot write {args.out}: {e.strerror or e}") from None
    else:
        out.write(text)
    for k, v in bench_summary(rows).items():
        sys.stderr.write(f"{k}={v:.6f}\n" if isinstance(v, float) else f"{k}={v}\n")
    return EXIT_OK


def _jitter(text: str) -> float:
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError("jitter must lie in [0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsms", description="Plan and run queries over web-service catalogs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a catalog file")
    p.add_argument("--catalog", required=True)
    p.set_defaults(func=cmd_validate)

    for name, func, helptext in (("plan", cmd_plan, "print an execution plan"), ("run", cmd_run, "execute a query")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--catalog", required=True)
        p.add_argument("--query", required=True)
        p.add_argument("--strategy", choices=STRATEGIES, default="greedy_heur")
        p.set_defaults(func=func)
        if name == "plan":
            p.add_argument("--format", choices=("text", "dot"), default="text")
        else:
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--jitter", type=_jitter, default=0.0)
            p.add_argument("--explain", action="store_true", help="append the cost report and call trace")

    p = sub.add_parser("bench", help="compare all strategies on many instances")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--catalogs", help="directory of *.json catalogs, each with an optional *.sql query")
    src.add_argument("--generate", type=int, metavar="N", help="generate N random instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=_jitter, default=0.0)
    p.add_argument("--unconstrained", action="store_true",
                   help="generate edge-free instances whose services all have selectivity below 1")
    p.add_argument("--out", help="write the CSV here instead of stdout")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_ENV if e.code else EXIT_OK
    try:
        return args.func(args, out)
    except _EnvError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ENV
    except WsmsError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
