"""Equivalence rules over one or two operands.

Each rule maps a node to the list of equivalent rewrites *at that node*
(empty when it does not apply). Rewrites preserve the output multiset; join
commutation also permutes columns, which the plan's root projection undoes.
Whether a rewrite is executable (inputs still bound before each call) is
checked by the caller.
"""

from __future__ import annotations

from typing import Callable

from wsms.planner.nodes import Join, LogicalPlan, Project, Select, Services, leaf_of, schema

Rule = Callable[[LogicalPlan, Services], list[LogicalPlan]]


def select_cascade(node: LogicalPlan, services: Services) -> list[LogicalPlan]:
    """sigma[p AND q](E) == sigma[p](sigma[q](E)), in both directions."""
    if not isinstance(node, Select):
        return []
    out: list[LogicalPlan] = []
    if len(node.predicates) > 1:
        out.append(Select(node.predicates[:1], Select(node.predicates[1:], node.child)))
    if isinstance(node.child, Select):
        out.append(Select(node.predicates + node.child.predicates, node.child.child))
    return out


def select_commute(node: LogicalPlan, services: Services) -> list[LogicalPlan]:
    """sigma[p](sigma[q](E)) == sigma[q](sigma[p](E))."""
    if not isinstance(node, Select):
        return []
    out: list[LogicalPlan] = []
    if isinstance(node.child, Select):
        out.append(Select(node.child.predicates, Select(node.predicates, node.child.child)))
    if len(node.predicates) > 1:
        out.append(Select(node.predicates[::-1], node.child))
    return out


def join_commute(node: LogicalPlan, services: Services) -> list[LogicalPlan]:
    """A join B == B join A, for two single-service operands."""
    if not isinstance(node, Join):
        return []
    if leaf_of(node.left) is None or leaf_of(node.right) is None:
        return []
    return [Join(node.conditions, node.right, node.left)]


def select_join_distribute(node: LogicalPlan, services: Services) -> list[LogicalPlan]:
    """sigma[p](A join B) == sigma[p](A) join B when p only reads A (likewise for B)."""
    out: list[LogicalPlan] = []
    if isinstance(node, Select) and isinstance(node.child, Join):
        j = node.child
        attrs = set().union(*(p.attrs for p in node.predicates))
        if attrs <= set(schema(j.left, services)):
            out.append(Join(j.conditions, Select(node.predicates, j.left), j.right))
        if attrs <= set(schema(j.right, services)):
            out.append(Join(j.conditions, j.left, Select(node.predicates, j.right)))
    if isinstance(node, Join):
        if isinstance(node.left, Select):
            out.append(Select(node.left.predicates, Join(node.conditions, node.left.child, node.right)))
        if isinstance(node.right, Select):
            out.append(Select(node.right.predicates, Join(node.conditions, node.left, node.right.child)))
    return out


def project_cascade(node: LogicalPlan, services: Services) -> list[LogicalPlan]:
    """pi[L1](pi[L2](E)) == pi[L1](E) when L1 is drawn from L2."""
    if isinstance(node, Project) and isinstance(node.child, Project):
        if set(node.attrs) <= set(node.child.attrs):
            return [Project(node.attrs, node.child.child)]
    return []


def project_join_distribute(node: LogicalPlan, services: Services) -> list[LogicalPlan]:
    """pi[L](A join B) == pi[L](pi[La](A) join pi[Lb](B)).

    La and Lb keep L, every attribute the two sides share (the natural join
    keys, which include B's bound inputs) and attributes of join conditions.
    """
    if not (isinstance(node, Project) and isinstance(node.child, Join)):
        return []
    j = node.child
    left = schema(j.left, services)
    right = schema(j.right, services)
    needed = set(node.attrs) | (set(left) & set(right))
    for p in j.conditions:
        needed |= p.attrs
    la = tuple(a for a in left if a in needed)
    lb = tuple(a for a in right if a in needed)
    if la == left and lb == right:
        return []
    new_left = j.left if la == left else Project(la, j.left)
    new_right = j.right if lb == right else Project(lb, j.right)
    return [Project(node.attrs, Join(j.conditions, new_left, new_right))]


RULES: dict[str, Rule] = {
    "select_cascade": select_cascade,
    "select_commute": select_commute,
    "join_commute": join_commute,
    "select_join_distribute": select_join_distribute,
    "project_cascade": project_cascade,
    "project_join_distribute": project_join_distribute,
}


def positions(plan: LogicalPlan) -> list[tuple[str, ...]]:
    """Paths to every node, root first. A path is a sequence of 'child'/'left'/'right'."""
    out: list[tuple[str, ...]] = []

    def visit(node, path):
        out.append(path)
        if isinstance(node, (Select, Project)):
            visit(node.child, path + ("child",))
        elif isinstance(node, Join):
            visit(node.left, path + ("left",))
            visit(node.right, path + ("right",))

    visit(plan, ())
    return out


def node_at(plan: LogicalPlan, path: tuple[str, ...]) -> LogicalPlan:
    for step in path:
        plan = getattr(plan, step)
    return plan


def replace_at(plan: LogicalPlan, path: tuple[str, ...], new: LogicalPlan) -> LogicalPlan:
    if not path:
        return new
    head, rest = path[0], path[1:]
    child = replace_at(getattr(plan, head), rest, new)
    if isinstance(plan, Select):
        return Select(plan.predicates, child)
    if isinstance(plan, Project):
        return Project(plan.attrs, child)
    if head == "left":
        return Join(plan.conditions, child, plan.right)
    return Join(plan.conditions, plan.left, child)


def rewrites(plan: LogicalPlan, rule: Rule, services: Services, within: tuple[str, ...] = ()) -> list[LogicalPlan]:
    """Every plan obtained by applying ``rule`` once at a node under ``within``."""
    out = []
    for path in positions(plan):
        if path[: len(within)] != within:
            continue
        for new in rule(node_at(plan, path), services):
            out.append(replace_at(plan, path, new))
    return out
