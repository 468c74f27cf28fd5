"""From a validated query to a single execution plan.

The full pipeline composes the chosen services, builds a left-deep initial
plan, pushes selections and projections down to the service calls, reorders
the calls greedily within the precedence constraints and finally rewrites the
bottom two-service join with the equivalence rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from wsms.catalog import Catalog, ServiceGraph, compose
from wsms.costmodel import DEFAULT_COST_MODEL, CostEstimate, CostModel
from wsms.errors import PlanningError
from wsms.planner.nodes import (
    Attached,
    Join,
    LogicalPlan,
    Project,
    Select,
    ServiceCall,
    Services,
    check_executable,
    effective_resultsize,
    invocation_order,
    leaf_of,
    leaves,
    plan_estimate,
    schema,
    serialize,
    walk,
)
from wsms.planner.ordering import BRUTE_FORCE_LIMIT, brute_force_optimal, greedy_order
from wsms.planner.rules import RULES, rewrites
from wsms.relation import Predicate
from wsms.sqlfront import ValidatedQuery

STRATEGIES = ("naive", "greedy", "greedy_heur", "optimal")
MAX_SUBTREE_VARIANTS = 16


@dataclass(frozen=True)
class ExecutionPlan:
    strategy: str
    logical: LogicalPlan
    steps: tuple[str, ...]
    estimate: CostEstimate
    graph: ServiceGraph

    @property
    def invocation_order(self) -> tuple[str, ...]:
        return invocation_order(self.logical)

    def text(self) -> str:
        return "\n".join(self.steps) + f"\nestimate={self.estimate.total:.6f}\n"


@dataclass(frozen=True)
class _Chain:
    leaves: tuple[ServiceCall, ...]
    residual: tuple[Predicate, ...]
    projection: tuple[str, ...]


def _spans(p: Predicate, left: set[str], right: set[str]) -> bool:
    if not (p.is_join and p.op == "="):
        return False
    a, b = p.lhs, p.rhs.name
    return (a in left and b in right) or (b in left and a in right)


def _placement(p: Predicate, full: Sequence[set[str]]) -> tuple[str, int]:
    """Where a residual predicate sits: ('join', k) as a condition of the k-th
    join, or ('select', k) above leaf 0 (k == 0) / above the k-th join."""
    if p.is_join and p.op == "=":
        avail = set(full[0])
        for k in range(1, len(full)):
            if _spans(p, avail, full[k]) and p.attrs <= avail | full[k]:
                return ("join", k)
            avail |= full[k]
    avail = set()
    for k, s in enumerate(full):
        avail |= s
        if p.attrs <= avail:
            return ("select", k)
    raise PlanningError(f"predicate {p} references attributes no service provides")


def _assemble(chain: _Chain, services: Services, placed: bool, keep: bool) -> LogicalPlan:
    if not chain.leaves:
        raise PlanningError("a plan needs at least one service call")
    full = [set(services[leaf.service_id].schema) for leaf in chain.leaves]
    where = {p: _placement(p, full) for p in chain.residual} if placed else {}

    def at(kind: str, k: int) -> tuple[Predicate, ...]:
        return tuple(p for p in chain.residual if where.get(p) == (kind, k))

    last = len(chain.leaves) - 1
    node: LogicalPlan = chain.leaves[0]
    if at("select", 0):
        node = Select(at("select", 0), node)
    for k in range(1, len(chain.leaves)):
        node = Join(at("join", k), node, chain.leaves[k])
        if at("select", k):
            node = Select(at("select", k), node)
        if keep and k < last:
            live = set(chain.projection).union(*full[k + 1:])
            for p in chain.residual:
                if p not in where or where[p][1] > k:
                    live |= p.attrs
            cur = schema(node, services)
            kept = tuple(a for a in cur if a in live)
            if kept != cur:
                node = Project(kept, node)
    if not placed:
        for p in chain.residual:
            node = Select((p,), node)
    return Project(chain.projection, node)


def _decompose(plan: LogicalPlan) -> tuple[_Chain, bool, bool]:
    """Recover (chain, placed, keep) from a left-deep plan built by this module."""
    if not isinstance(plan, Project):
        raise PlanningError("plan root must be a projection")
    residual: list[Predicate] = []
    placed = False
    for node in walk(plan):
        if isinstance(node, Select):
            residual.extend(node.predicates)
        elif isinstance(node, Join):
            residual.extend(node.conditions)
            placed = placed or bool(node.conditions)
    # selections anywhere below the first join or leaf count as placed
    top = plan.child
    while isinstance(top, (Select, Project)):
        top = top.child
    for node in walk(top):
        if isinstance(node, Select):
            placed = True
    calls = leaves(plan)
    placed = placed or any(leaf.filters for leaf in calls)
    keep = any(leaf.returns is not None for leaf in calls)
    return _Chain(tuple(calls), tuple(residual), plan.attrs), placed, keep


def _attach(chain: _Chain, catalog: Catalog) -> _Chain:
    services = catalog.services
    calls = {leaf.service_id: leaf for leaf in chain.leaves}
    residual = []
    for p in chain.residual:
        same_name = p.is_join and p.lhs == p.rhs.name
        owners = sorted(
            leaf.service_id for leaf in chain.leaves
            if p.attrs <= set(services[leaf.service_id].output_attrs)
        )
        if owners and not same_name:
            leaf = calls[owners[0]]
            factor = catalog.predicate_selectivity(p.lhs, p.op)
            calls[owners[0]] = ServiceCall(leaf.service_id, leaf.filters + (Attached(p, factor),), leaf.returns)
        else:
            residual.append(p)
    return _Chain(tuple(calls[leaf.service_id] for leaf in chain.leaves), tuple(residual), chain.projection)


def _prune_returns(chain: _Chain, services: Services) -> _Chain:
    needed = set(chain.projection)
    for p in chain.residual:
        needed |= p.attrs
    out = []
    for leaf in chain.leaves:
        others = set()
        for other in chain.leaves:
            if other.service_id != leaf.service_id:
                others |= set(services[other.service_id].schema)
        ws = services[leaf.service_id]
        returns = tuple(a for a in ws.output_attrs if a in needed or a in others)
        out.append(ServiceCall(leaf.service_id, leaf.filters, returns))
    return _Chain(tuple(out), chain.residual, chain.projection)


def _reordered(chain: _Chain, order: Sequence[str]) -> _Chain:
    by_id = {leaf.service_id: leaf for leaf in chain.leaves}
    return _Chain(tuple(by_id[s] for s in order), chain.residual, chain.projection)


def _annotations(plan: LogicalPlan, catalog: Catalog) -> tuple[dict, dict]:
    factors = {leaf.service_id: tuple(f.factor for f in leaf.filters) for leaf in leaves(plan)}
    sizes = {
        leaf.service_id: effective_resultsize(leaf, catalog.services, catalog.attr_widths)
        for leaf in leaves(plan)
    }
    return factors, sizes


def _initial_chain(vq: ValidatedQuery, g: ServiceGraph) -> _Chain:
    calls = tuple(ServiceCall(sid) for sid in g.topological_order())
    return _Chain(calls, vq.ast.predicates, vq.columns)


def build_initial_plan(vq: ValidatedQuery, g: ServiceGraph) -> LogicalPlan:
    """Left-deep plan in lexicographic topological order, every WHERE predicate
    as a selection above the topmost join, projection at the root."""
    return _assemble(_initial_chain(vq, g), g.services, placed=False, keep=False)


def push_selections(p: LogicalPlan, c: Catalog) -> LogicalPlan:
    chain, _, keep = _decompose(p)
    attached = _attach(chain, c)
    if attached == chain and not chain.residual:
        return p
    return _assemble(attached, c.services, placed=True, keep=keep)


def push_projections(p: LogicalPlan, c: Catalog) -> LogicalPlan:
    chain, placed, _ = _decompose(p)
    return _assemble(_prune_returns(chain, c.services), c.services, placed=placed, keep=True)


def reorder(p: LogicalPlan, order: Sequence[str], c: Catalog) -> LogicalPlan:
    """Same plan with its service calls invoked in ``order``."""
    chain, placed, keep = _decompose(p)
    return _assemble(_reordered(chain, order), c.services, placed=placed, keep=keep)


def _bottom_join_path(plan: LogicalPlan) -> tuple[str, ...] | None:
    """Path to the outermost Select/Project wrapping the deepest two-service join."""
    found = None

    def visit(node, path, wrapper):
        nonlocal found
        if isinstance(node, (Select, Project)):
            visit(node.child, path + ("child",), wrapper if wrapper is not None else path)
        elif isinstance(node, Join):
            if leaf_of(node.left) is not None and leaf_of(node.right) is not None:
                found = wrapper if wrapper is not None else path
            visit(node.left, path + ("left",), None)

    visit(plan, (), None)
    return found


def optimize_subtrees(
    p: LogicalPlan, c: Catalog, cm: CostModel = DEFAULT_COST_MODEL, limit: int = MAX_SUBTREE_VARIANTS
) -> LogicalPlan:
    """Rewrite the bottom two-service join with the equivalence rules and keep
    the cheapest executable variant; ties go to the smallest serialization."""
    root = _bottom_join_path(p)
    if root is None:
        return p
    services = c.services

    def key(q: LogicalPlan) -> str:
        return "\n".join(serialize(q, services))

    def executable(q: LogicalPlan) -> bool:
        try:
            check_executable(q, services)
        except PlanningError:
            return False
        return True

    # the input itself may be infeasible (e.g. a consumer left of its producer);
    # it still seeds the search but is only a candidate if it can run
    seen = {key(p): p}
    candidates = {key(p): p} if executable(p) else {}
    frontier = [p]
    while frontier and len(seen) < limit:
        q = frontier.pop(0)
        for rule in RULES.values():
            for r in rewrites(q, rule, services, within=root):
                k = key(r)
                if k in seen or len(seen) >= limit:
                    continue
                seen[k] = r
                frontier.append(r)
                if executable(r):
                    candidates[k] = r
    if not candidates:
        raise PlanningError("no executable variant of the bottom join")
    return min(candidates.values(), key=lambda q: (plan_estimate(q, c, cm).total, key(q)))


def linearize(
    logical: LogicalPlan, c: Catalog, g: ServiceGraph, strategy: str, cm: CostModel = DEFAULT_COST_MODEL
) -> ExecutionPlan:
    check_executable(logical, c.services)
    order = invocation_order(logical)
    if not g.is_linear_extension(order):
        raise PlanningError(f"invocation order {order} violates precedence constraints")
    if not isinstance(logical, Project):
        raise PlanningError("plan must end in a projection")
    return ExecutionPlan(
        strategy, logical, tuple(serialize(logical, c.services)), plan_estimate(logical, c, cm), g
    )


def optimize(vq: ValidatedQuery, c: Catalog, cm: CostModel = DEFAULT_COST_MODEL) -> ExecutionPlan:
    g = compose(vq.services, c)
    plan = build_initial_plan(vq, g)
    plan = push_selections(plan, c)
    plan = push_projections(plan, c)
    factors, sizes = _annotations(plan, c)
    chain, _, _ = _decompose(plan)
    plan = _assemble(_reordered(chain, greedy_order(g, factors, sizes, cm)), c.services, placed=True, keep=True)
    plan = optimize_subtrees(plan, c, cm)
    return linearize(plan, c, g, "greedy_heur", cm)


def plan_query(
    vq: ValidatedQuery,
    c: Catalog,
    strategy: str = "greedy_heur",
    cm: CostModel = DEFAULT_COST_MODEL,
    limit: int = BRUTE_FORCE_LIMIT,
) -> ExecutionPlan:
    """One execution plan for ``vq`` under the named strategy.

    naive: lexicographic topological order, no pushdown.
    greedy: rank-ordered calls, no pushdown.
    greedy_heur: the full pipeline (``optimize``).
    optimal: pushdown plus the exhaustively cheapest call order.
    """
    if strategy not in STRATEGIES:
        raise PlanningError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    if strategy == "greedy_heur":
        return optimize(vq, c, cm)
    g = compose(vq.services, c)
    if strategy == "naive":
        plan = build_initial_plan(vq, g)
    elif strategy == "greedy":
        chain = _reordered(_initial_chain(vq, g), greedy_order(g, cm=cm))
        plan = _assemble(chain, c.services, placed=False, keep=False)
    else:
        pushed = push_projections(push_selections(build_initial_plan(vq, g), c), c)
        factors, sizes = _annotations(pushed, c)
        order, _ = brute_force_optimal(g, factors, sizes, cm, limit)
        chain, _, _ = _decompose(pushed)
        plan = _assemble(_reordered(chain, order), c.services, placed=True, keep=True)
    return linearize(plan, c, g, strategy, cm)

