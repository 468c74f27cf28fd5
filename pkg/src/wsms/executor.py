"""Plan execution against the simulated fabric, plus a naive reference evaluator."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from wsms.catalog import Catalog, ServiceSpec, compose
from wsms.costmodel import CallMetrics, ProfilerStats, realized_cost, record_observation
from wsms.errors import ExecutionError, TypeMismatchError
from wsms.planner.nodes import LogicalPlan, Project, Select, ServiceCall, check_executable
from wsms.planner.pipeline import ExecutionPlan
from wsms.relation import Predicate, Relation, compare
from wsms.simfabric import SimFabric, TraceEntry
from wsms.sqlfront import ValidatedQuery

# one empty tuple: the driver of the first service call
SEED = Relation((), ((),))


def eval_select(r: Relation, predicates: Predicate | Iterable[Predicate]) -> Relation:
    preds = (predicates,) if isinstance(predicates, Predicate) else tuple(predicates)
    for p in preds:
        for a in p.attrs:
            r.index(a)
    rows = []
    for row in r.rows:
        named = dict(zip(r.schema, row))
        if all(p.evaluate(named) for p in preds):
            rows.append(row)
    return Relation(r.schema, tuple(rows))


def eval_project(r: Relation, attrs: Sequence[str]) -> Relation:
    idx = [r.index(a) for a in attrs]
    return Relation(tuple(attrs), tuple(tuple(row[i] for i in idx) for row in r.rows))


def _column_types(r: Relation, i: int) -> set[type]:
    return {type(row[i]) for row in r.rows}


def eval_join(l: Relation, r: Relation, conditions: Iterable[Predicate] = ()) -> Relation:
    """Natural join on shared attribute names, plus explicit conditions.

    Equality keys use a hash join that builds on the smaller input (the left
    one on ties); without any equality key it falls back to nested loops.
    Shared attributes appear once, in the left operand's position.
    """
    shared = [a for a in l.schema if a in r.schema]
    keys = [(l.index(a), r.index(a)) for a in shared]
    residual = []
    for p in conditions:
        if p.is_join and p.op == "=":
            a, b = p.lhs, p.rhs.name
            if a in l.schema and b in r.schema and b not in l.schema:
                keys.append((l.index(a), r.index(b)))
                continue
            if b in l.schema and a in r.schema and a not in l.schema:
                keys.append((l.index(b), r.index(a)))
                continue
        residual.append(p)

    for li, ri in keys:
        lt, rt = _column_types(l, li), _column_types(r, ri)
        if lt and rt and lt != rt:
            raise TypeMismatchError(f"join key {l.schema[li]}/{r.schema[ri]} mixes integers and strings")

    r_rest = [i for i, a in enumerate(r.schema) if a not in l.schema]
    out_schema = l.schema + tuple(r.schema[i] for i in r_rest)

    def emit(lrow, rrow, out):
        row = lrow + tuple(rrow[i] for i in r_rest)
        if residual:
            named = dict(zip(out_schema, row))
            if not all(p.evaluate(named) for p in residual):
                return
        out.append(row)

    out: list[tuple] = []
    if keys:
        lk = [k for k, _ in keys]
        rk = [k for _, k in keys]
        if len(l.rows) <= len(r.rows):
            table: dict[tuple, list[tuple]] = {}
            for lrow in l.rows:
                table.setdefault(tuple(lrow[i] for i in lk), []).append(lrow)
            for rrow in r.rows:
                for lrow in table.get(tuple(rrow[i] for i in rk), ()):
                    emit(lrow, rrow, out)
        else:
            table = {}
            for rrow in r.rows:
                table.setdefault(tuple(rrow[i] for i in rk), []).append(rrow)
            for lrow in l.rows:
                for rrow in table.get(tuple(lrow[i] for i in lk), ()):
                    emit(lrow, rrow, out)
    else:
        for lrow in l.rows:
            for rrow in r.rows:
                emit(lrow, rrow, out)
    return Relation(out_schema, tuple(out))


def materialize_service(
    ws: ServiceSpec,
    drivers: Relation,
    fabric: SimFabric,
    predicates: Sequence[Predicate] = (),
    returns: Sequence[str] | None = None,
) -> Relation:
    """Call ``ws`` once per driver tuple and collect the responses.

    Every response row carries the binding it answered. Repeated bindings are
    still invoked (and charged), but their identical answers are kept once, so
    a natural join with the drivers pairs each driver with exactly its own
    response.
    """
    missing = [a for a in ws.input_attrs if a not in drivers.schema]
    if missing:
        raise ExecutionError(f"{ws.id}: drivers lack input attribute(s) {missing}")
    idx = [drivers.index(a) for a in ws.input_attrs]
    answers: dict[tuple, tuple] = {}
    schema = None
    for row in drivers.rows:
        key = tuple(row[i] for i in idx)
        inv = fabric.invoke(ws.id, dict(zip(ws.input_attrs, key)), predicates, returns)
        schema = inv.schema
        answers.setdefault(key, inv.rows)
    if schema is None:
        schema = ws.input_attrs + (ws.output_attrs if returns is None else tuple(returns))
    return Relation(schema, tuple(r for rows in answers.values() for r in rows))


class LocalStore:
    """Materialized intermediate results, one per plan node per execution."""

    def __init__(self):
        self._data: dict[int, Relation] = {}

    def write(self, node_id: int, r: Relation) -> None:
        if node_id in self._data:
            raise ExecutionError(f"plan node {node_id} materialized twice")
        self._data[node_id] = r

    def read(self, node_id: int) -> Relation:
        return self._data[node_id]

    def __len__(self) -> int:
        return len(self._data)


@dataclass(frozen=True)
class CostReport:
    estimated_total: float
    measured_total: float
    realized_estimate: float
    calls: dict[str, int] = field(default_factory=dict)
    trace: tuple[TraceEntry, ...] = ()

    @property
    def invocations(self) -> int:
        return len(self.trace)

    def lines(self) -> list[str]:
        out = [
            f"estimated_total={self.estimated_total:.6f}",
            f"realized_estimate={self.realized_estimate:.6f}",
            f"measured_total={self.measured_total:.6f}",
            f"invocations={self.invocations}",
        ]
        out.extend(f"calls.{sid}={n}" for sid, n in sorted(self.calls.items()))
        return out


@dataclass(frozen=True)
class ExecutionResult:
    relation: Relation
    report: CostReport
    stats: ProfilerStats


def _report(catalog: Catalog, trace: Sequence[TraceEntry], estimated: float) -> CostReport:
    measured = 0.0
    for e in trace:
        measured += e.time
    realized = realized_cost(
        (catalog.service(e.service).profile, CallMetrics(e.callsize, e.resultsize)) for e in trace
    )
    return CostReport(estimated, measured, realized, dict(Counter(e.service for e in trace)), tuple(trace))


def execute_tree(plan: LogicalPlan, catalog: Catalog, fabric: SimFabric, store: LocalStore | None = None) -> Relation:
    """Evaluate a left-deep plan tree; each right operand is driven by its left sibling."""
    check_executable(plan, catalog.services)
    store = store if store is not None else LocalStore()
    counter = [0]

    def run(node: LogicalPlan, drivers: Relation) -> Relation:
        if isinstance(node, ServiceCall):
            out = materialize_service(
                catalog.service(node.service_id), drivers, fabric,
                tuple(f.predicate for f in node.filters), node.returns,
            )
        elif isinstance(node, Select):
            out = eval_select(run(node.child, drivers), node.predicates)
        elif isinstance(node, Project):
            out = eval_project(run(node.child, drivers), node.attrs)
        else:
            left = run(node.left, drivers)
            out = eval_join(left, run(node.right, left), node.conditions)
        store.write(counter[0], out)
        counter[0] += 1
        return out

    return run(plan, SEED)


def execute_plan(
    plan: ExecutionPlan | LogicalPlan,
    catalog: Catalog,
    fabric: SimFabric,
    seed: int | None = None,
    stats: ProfilerStats | None = None,
) -> ExecutionResult:
    if seed is not None:
        fabric.reset(seed)
    start = len(fabric.trace())
    logical = plan.logical if isinstance(plan, ExecutionPlan) else plan
    relation = execute_tree(logical, catalog, fabric)
    trace = fabric.trace()[start:]
    stats = stats if stats is not None else ProfilerStats()
    for e in trace:
        stats = record_observation(stats, e.service, e.time, e.resultsize)
    estimated = plan.estimate.total if isinstance(plan, ExecutionPlan) else float("nan")
    return ExecutionResult(relation, _report(catalog, trace, estimated), stats)


def reference_execute(
    vq: ValidatedQuery, catalog: Catalog, fabric: SimFabric, seed: int | None = None
) -> Relation:
    """Ground-truth answer: lexicographic topological order, one call per tuple,
    per-driver nested-loop combination, every predicate applied at the end."""
    if seed is not None:
        fabric.reset(seed)
    g = compose(vq.services, catalog)
    schema: tuple[str, ...] = ()
    rows: list[tuple] = [()]
    for sid in g.topological_order():
        ws = catalog.service(sid)
        new_rows = []
        new_schema = None
        for row in rows:
            named = dict(zip(schema, row))
            inv = fabric.invoke(sid, {a: named[a] for a in ws.input_attrs})
            extra = [i for i, a in enumerate(inv.schema) if a not in named]
            if new_schema is None:
                new_schema = schema + tuple(inv.schema[i] for i in extra)
            for resp in inv.rows:
                if all(compare(named[a], "=", v) for a, v in zip(inv.schema, resp) if a in named):
                    new_rows.append(row + tuple(resp[i] for i in extra))
        if new_schema is None:
            new_schema = schema + tuple(a for a in ws.schema if a not in schema)
        schema, rows = new_schema, new_rows
    result = Relation(schema, tuple(rows))
    if vq.ast.predicates:
        result = eval_select(result, vq.ast.predicates)
    return eval_project(result, vq.columns)
