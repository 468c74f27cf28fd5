"""Independent reference computations used by the tests."""

from __future__ import annotations

import itertools
from collections import Counter

from wsms.catalog import Catalog
from wsms.relation import Relation
from wsms.sqlfront import ValidatedQuery


def declarative_answer(vq: ValidatedQuery, catalog: Catalog) -> Counter:
    """Natural join of the chosen services' full datasets, filtered and projected.

    No service calls, no plan: every combination of one row per service is
    kept when rows agree on all shared attribute names.
    """
    datasets = [ws.dataset.dicts() for ws in vq.services]
    out = Counter()
    for combo in itertools.product(*datasets):
        merged: dict = {}
        ok = True
        for row in combo:
            for k, v in row.items():
                if k in merged and merged[k] != v:
                    ok = False
                    break
                merged[k] = v
            if not ok:
                break
        if ok and all(p.evaluate(merged) for p in vq.ast.predicates):
            out[tuple(merged[a] for a in vq.columns)] += 1
    return out


def nested_loop_join(l: Relation, r: Relation) -> Counter:
    """Natural join by exhaustive pairing, as a multiset of dicts (sorted items)."""
    out = Counter()
    for lrow in l.dicts():
        for rrow in r.dicts():
            if all(lrow[a] == rrow[a] for a in lrow.keys() & rrow.keys()):
                out[tuple(sorted({**lrow, **rrow}.items()))] += 1
    return out


def as_dict_multiset(r: Relation) -> Counter:
    return Counter(tuple(sorted(d.items())) for d in r.dicts())


def all_orders_min(costs, sigmas, seed=1.0):
    """Minimum expected cost over every permutation, by direct enumeration."""
    best = None
    for perm in itertools.permutations(range(len(costs))):
        n, total = seed, 0.0
        for i in perm:
            total += n * costs[i]
            n *= sigmas[i]
        if best is None or total < best[0]:
            best = (total, perm)
    return best
