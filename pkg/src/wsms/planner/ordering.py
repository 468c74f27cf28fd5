"""Service invocation ordering under precedence constraints."""

from __future__ import annotations

import math
from typing import Iterator, Mapping, Sequence

from wsms.catalog import ServiceGraph
from wsms.costmodel import DEFAULT_COST_MODEL, CallStep, CostEstimate, CostModel, estimate_plan_cost
from wsms.errors import CycleError, PlanningError

BRUTE_FORCE_LIMIT = 9


def _steps(
    g: ServiceGraph,
    factors: Mapping[str, Sequence[float]] | None,
    resultsizes: Mapping[str, float | None] | None,
) -> dict[str, CallStep]:
    factors = factors or {}
    resultsizes = resultsizes or {}
    return {
        sid: CallStep(ws, tuple(factors.get(sid, ())), resultsizes.get(sid))
        for sid, ws in g.services.items()
    }


def rank_key(step: CallStep, cm: CostModel = DEFAULT_COST_MODEL) -> tuple:
    """Sort key: finite ranks c/(1-s) first, then non-reducing services by (cost, id)."""
    c = step.cost(cm)
    s = step.sigma_eff
    if s < 1:
        return (0, c / (1 - s), step.service.id)
    return (1, c, step.service.id)


def greedy_order(
    g: ServiceGraph,
    factors: Mapping[str, Sequence[float]] | None = None,
    resultsizes: Mapping[str, float | None] | None = None,
    cm: CostModel = DEFAULT_COST_MODEL,
) -> tuple[str, ...]:
    """Repeatedly place the lowest-rank service whose predecessors are all placed."""
    steps = _steps(g, factors, resultsizes)
    keys = {sid: rank_key(step, cm) for sid, step in steps.items()}
    waiting = {sid: set(g.predecessors(sid)) for sid in g.services}
    order: list[str] = []
    while waiting:
        ready = [sid for sid, preds in waiting.items() if not preds]
        if not ready:
            raise CycleError(waiting)
        pick = min(ready, key=keys.__getitem__)
        order.append(pick)
        del waiting[pick]
        for preds in waiting.values():
            preds.discard(pick)
    return tuple(order)


def linear_extensions(g: ServiceGraph) -> Iterator[tuple[str, ...]]:
    """Every topological order of ``g``, in lexicographic order of id sequences."""
    preds = {sid: g.predecessors(sid) for sid in g.services}
    ids = sorted(g.services)
    prefix: list[str] = []
    placed: set[str] = set()

    def rec():
        if len(prefix) == len(ids):
            yield tuple(prefix)
            return
        for sid in ids:
            if sid not in placed and preds[sid] <= placed:
                prefix.append(sid)
                placed.add(sid)
                yield from rec()
                placed.discard(sid)
                prefix.pop()

    yield from rec()


def brute_force_optimal(
    g: ServiceGraph,
    factors: Mapping[str, Sequence[float]] | None = None,
    resultsizes: Mapping[str, float | None] | None = None,
    cm: CostModel = DEFAULT_COST_MODEL,
    limit: int = BRUTE_FORCE_LIMIT,
) -> tuple[tuple[str, ...], CostEstimate]:
    """Cheapest linear extension of ``g``; ties go to the lexicographically first order."""
    if len(g.services) > limit:
        raise PlanningError(f"exhaustive search is limited to {limit} services, got {len(g.services)}")
    steps = _steps(g, factors, resultsizes)
    costs = {sid: step.cost(cm) for sid, step in steps.items()}
    sig = {sid: step.sigma_eff for sid, step in steps.items()}
    preds = {sid: g.predecessors(sid) for sid in g.services}
    ids = sorted(g.services)

    best_total = math.inf
    best: tuple[str, ...] = ()
    prefix: list[str] = []
    placed: set[str] = set()

    # Depth-first in lexicographic order with the same accumulation as
    # estimate_plan_cost, so partial sums are exact lower bounds (costs >= 0).
    def rec(total: float, n: float):
        nonlocal best_total, best
        if total >= best_total:
            return
        if len(prefix) == len(ids):
            best_total = total
            best = tuple(prefix)
            return
        for sid in ids:
            if sid not in placed and preds[sid] <= placed:
                prefix.append(sid)
                placed.add(sid)
                rec(total + n * costs[sid], n * sig[sid])
                placed.discard(sid)
                prefix.pop()

    rec(0.0, 1.0)
    if not ids:
        return (), estimate_plan_cost([], cm)
    if not best:
        raise CycleError(ids)
    return best, estimate_plan_cost([steps[s] for s in best], cm)
