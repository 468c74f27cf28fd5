"""Logical plan trees over service-call leaves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from wsms.catalog import Catalog, ServiceSpec
from wsms.costmodel import DEFAULT_COST_MODEL, CallStep, CostEstimate, CostModel, estimate_plan_cost
from wsms.errors import PlanningError
from wsms.relation import Predicate

Services = Mapping[str, ServiceSpec]


@dataclass(frozen=True)
class Attached:
    """A selection evaluated provider-side, with its estimated pass fraction."""

    predicate: Predicate
    factor: float


@dataclass(frozen=True)
class ServiceCall:
    service_id: str
    filters: tuple[Attached, ...] = ()
    # output attributes fetched from the provider; None means all of them
    returns: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Select:
    predicates: tuple[Predicate, ...]
    child: LogicalPlan


@dataclass(frozen=True)
class Project:
    attrs: tuple[str, ...]
    child: LogicalPlan


@dataclass(frozen=True)
class Join:
    conditions: tuple[Predicate, ...]
    left: LogicalPlan
    right: LogicalPlan


LogicalPlan = Union[ServiceCall, Select, Project, Join]


def returned_attrs(leaf: ServiceCall, services: Services) -> tuple[str, ...]:
    ws = services[leaf.service_id]
    return ws.output_attrs if leaf.returns is None else leaf.returns


def schema(node: LogicalPlan, services: Services) -> tuple[str, ...]:
    if isinstance(node, ServiceCall):
        return services[node.service_id].input_attrs + returned_attrs(node, services)
    if isinstance(node, Select):
        return schema(node.child, services)
    if isinstance(node, Project):
        return node.attrs
    left = schema(node.left, services)
    return left + tuple(a for a in schema(node.right, services) if a not in left)


def leaves(node: LogicalPlan) -> list[ServiceCall]:
    if isinstance(node, ServiceCall):
        return [node]
    if isinstance(node, (Select, Project)):
        return leaves(node.child)
    return leaves(node.left) + leaves(node.right)


def leaf_of(node: LogicalPlan) -> ServiceCall | None:
    """The service call under a stack of Select/Project wrappers, if that is all ``node`` is."""
    while isinstance(node, (Select, Project)):
        node = node.child
    return node if isinstance(node, ServiceCall) else None


def walk(node: LogicalPlan) -> Iterator[LogicalPlan]:
    """Post-order traversal."""
    if isinstance(node, (Select, Project)):
        yield from walk(node.child)
    elif isinstance(node, Join):
        yield from walk(node.left)
        yield from walk(node.right)
    yield node


def invocation_order(node: LogicalPlan) -> tuple[str, ...]:
    return tuple(leaf.service_id for leaf in leaves(node))


def check_executable(plan: LogicalPlan, services: Services) -> None:
    """Raise PlanningError unless ``plan`` can be run by the executor.

    Joins must be left-deep (the right operand is a single service call,
    possibly wrapped), every attribute a node references must exist below it,
    and each service's inputs must be bound by everything to its left.
    """

    def visit(node: LogicalPlan, bound: frozenset[str]) -> tuple[str, ...]:
        if isinstance(node, ServiceCall):
            if node.service_id not in services:
                raise PlanningError(f"unknown service {node.service_id!r}")
            ws = services[node.service_id]
            missing = [a for a in ws.input_attrs if a not in bound]
            if missing:
                raise PlanningError(f"{ws.id} invoked before its input(s) {missing} are bound")
            extra = [a for a in returned_attrs(node, services) if a not in ws.output_attrs]
            if extra:
                raise PlanningError(f"{ws.id} cannot return {extra}")
            for f in node.filters:
                if not f.predicate.attrs <= set(ws.schema):
                    raise PlanningError(f"filter {f.predicate} does not fit {ws.id}")
            return schema(node, services)
        if isinstance(node, Select):
            out = visit(node.child, bound)
            for p in node.predicates:
                if not p.attrs <= set(out):
                    raise PlanningError(f"selection {p} references attributes missing from {out}")
            return out
        if isinstance(node, Project):
            out = visit(node.child, bound)
            if not set(node.attrs) <= set(out) or len(set(node.attrs)) != len(node.attrs):
                raise PlanningError(f"projection {node.attrs} not drawn from {out}")
            return node.attrs
        if leaf_of(node.right) is None:
            raise PlanningError("right operand of a join must be a single service call")
        left = visit(node.left, bound)
        right = visit(node.right, frozenset(left))
        merged = left + tuple(a for a in right if a not in left)
        for p in node.conditions:
            if not p.attrs <= set(merged):
                raise PlanningError(f"join condition {p} references missing attributes")
        return merged

    visit(plan, frozenset())


def effective_resultsize(leaf: ServiceCall, services: Services, widths: Mapping[str, float]) -> float | None:
    """Declared result size scaled to the fraction of output bytes actually fetched."""
    if leaf.returns is None:
        return None
    ws = services[leaf.service_id]
    full = sum(widths.get(a, 0.0) for a in ws.output_attrs)
    if full == 0:
        return None
    kept = sum(widths.get(a, 0.0) for a in leaf.returns)
    return ws.avg_resultsize * kept / full


def call_steps(plan: LogicalPlan, catalog: Catalog) -> list[CallStep]:
    services = catalog.services
    return [
        CallStep(
            services[leaf.service_id],
            tuple(f.factor for f in leaf.filters),
            effective_resultsize(leaf, services, catalog.attr_widths),
        )
        for leaf in leaves(plan)
    ]


def plan_estimate(plan: LogicalPlan, catalog: Catalog, cm: CostModel = DEFAULT_COST_MODEL) -> CostEstimate:
    return estimate_plan_cost(call_steps(plan, catalog), cm)


def _fmt_num(x: float) -> str:
    return f"{x:.6g}"


def _natural(node: Join, services: Services) -> list[str]:
    left = schema(node.left, services)
    right = set(schema(node.right, services))
    return [a for a in left if a in right]


def serialize(plan: LogicalPlan, services: Services) -> list[str]:
    """One evaluation primitive per line, in execution (post-) order.

    The root projection prints as PROJECT; projections below it as KEEP.
    """
    lines = []
    for node in walk(plan):
        if isinstance(node, ServiceCall):
            line = f"INVOKE {node.service_id}"
            if node.filters:
                factor = 1.0
                for f in node.filters:
                    factor *= f.factor
                line += f" factor={_fmt_num(factor)}"
                line += " where=" + " AND ".join(str(f.predicate) for f in node.filters)
            ws = services[node.service_id]
            if node.returns is not None and tuple(node.returns) != ws.output_attrs:
                line += " returns=" + (",".join(node.returns) or "-")
            lines.append(line)
        elif isinstance(node, Select):
            lines.append("SELECT " + " AND ".join(str(p) for p in node.predicates))
        elif isinstance(node, Project):
            word = "PROJECT" if node is plan else "KEEP"
            lines.append(f"{word} " + ",".join(node.attrs))
        else:
            keys = _natural(node, services) + [f"{p.lhs}={p.rhs}" for p in node.conditions]
            lines.append("JOIN " + (",".join(keys) if keys else "(cross)"))
    return lines


def to_dot(plan: LogicalPlan, services: Services) -> str:
    out = ["digraph plan {", "  node [shape=box];"]
    counter = [0]

    def esc(s: str) -> str:
        return s.replace("\\", "\\\\").replace('"', '\\"')

    def visit(node: LogicalPlan) -> str:
        nid = f"n{counter[0]}"
        counter[0] += 1
        if isinstance(node, ServiceCall):
            label = node.service_id
            if node.filters:
                label += "\\n" + esc(" AND ".join(str(f.predicate) for f in node.filters))
            out.append(f'  {nid} [label="{label}", shape=ellipse];')
            return nid
        if isinstance(node, Select):
            label = "σ " + esc(" AND ".join(str(p) for p in node.predicates))
            children = [node.child]
        elif isinstance(node, Project):
            label = "π " + esc(",".join(node.attrs))
            children = [node.child]
        else:
            keys = _natural(node, services) + [f"{p.lhs}={p.rhs}" for p in node.conditions]
            label = "⋈ " + esc(",".join(keys))
            children = [node.left, node.right]
        out.append(f'  {nid} [label="{label}"];')
        for child in children:
            out.append(f"  {nid} -> {visit(child)};")
        return nid

    visit(plan)
    out.append("}")
    return "\n".join(out) + "\n"

