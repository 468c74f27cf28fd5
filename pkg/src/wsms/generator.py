"""Seeded random catalogs, queries and query ASTs for benchmarking and tests.

Every instance draws from its own numpy ``PCG64`` stream, seeded with
``SeedSequence(seed, spawn_key=(index,))``, so instance ``i`` of a corpus does
not depend on how many instances precede it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from wsms.catalog import Catalog, load_catalog
from wsms.relation import Column, Predicate
from wsms.sqlfront import KEYWORDS, Query, render

P0 = {
    "initiate_client": 2.0,
    "initiate_server": 1.0,
    "packing": 0.01,
    "unpacking": 0.02,
    "packetize": 100.0,
    "sending": 0.005,
    "serviceexec": 30.0,
}
EDGE_PROBABILITY = 0.3
SIGMA_RANGE = (0.1, 2.0)
PROFILE_SCALE = (0.5, 2.0)
KEY_DOMAIN = (1, 2, 3, 4)
MAX_ROWS = 50
STRINGS = ("a", "b", "c", "it's")


@dataclass(frozen=True)
class Instance:
    catalog_id: str
    catalog_text: str
    query: str

    def catalog(self) -> Catalog:
        return load_catalog(self.catalog_text)


def instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _sigma(rng: np.random.Generator, high: float = SIGMA_RANGE[1]) -> float:
    lo, hi = np.log(SIGMA_RANGE[0]), np.log(high)
    return float(np.exp(rng.uniform(lo, hi)))


def _profile(rng: np.random.Generator) -> dict[str, float]:
    scale = float(rng.uniform(*PROFILE_SCALE))
    # packetize is a byte count, not a time rate
    return {k: v if k == "packetize" else v * scale for k, v in P0.items()}


def _fanout(rng: np.random.Generator, sigma: float) -> int:
    """Row count per binding with expectation ``sigma``."""
    whole = int(np.floor(sigma))
    return whole + int(rng.random() < sigma - whole)


def _out_row(rng: np.random.Generator, i: int, with_string: bool) -> dict:
    row = {f"k{i}": int(rng.choice(KEY_DOMAIN)), f"v{i}": int(rng.integers(0, 100))}
    if with_string:
        row[f"s{i}"] = str(rng.choice(STRINGS))
    return row


def _outputs(i: int, with_string: bool) -> list[str]:
    return [f"k{i}", f"v{i}"] + ([f"s{i}"] if with_string else [])


def _service(sid: str, cap: str, inputs: list[str], outputs: list[str], sigma: float,
             profile: dict, dataset: list[dict], widths: dict) -> dict:
    return {
        "id": sid,
        "capability": cap,
        "inputs": inputs,
        "outputs": outputs,
        "selectivity": sigma,
        "profile": profile,
        "avg_callsize": sum(widths[a] for a in inputs) + 64,
        "avg_resultsize": sigma * sum(widths[a] for a in outputs),
        "dataset": dataset,
    }


def generate_catalog(
    rng: np.random.Generator,
    n_services: int | None = None,
    *,
    min_services: int = 3,
    max_services: int = 7,
    unconstrained: bool = False,
) -> dict:
    """A random catalog document (JSON-ready dict).

    By default there is one source ``ws0`` and every other service ``ws<j>``
    takes the key of one earlier service as input; further earlier services
    become explicit precedence edges with probability 0.3 each. With
    ``unconstrained`` every service is a source with selectivity below 1 and
    there are no edges.
    """
    n = int(rng.integers(min_services, max_services + 1)) if n_services is None else n_services
    widths: dict[str, float] = {}
    services: list[dict] = []
    edges: list[list[str]] = []
    second_source = not unconstrained and n >= 3 and rng.random() < 0.2

    for j in range(n):
        with_string = bool(rng.random() < 0.3)
        outputs = _outputs(j, with_string)
        for a in outputs:
            widths[a] = float(rng.choice((4, 8, 16))) if a.startswith("s") else 8.0
        sid, cap = f"ws{j}", f"cap{j}"
        profile = _profile(rng)

        if unconstrained or j == 0 or (second_source and j == n - 1):
            sigma = _sigma(rng, 0.99) if unconstrained else 0.0
            n_rows = int(rng.integers(1, 4)) if unconstrained else int(rng.integers(2, 9))
            rows = [_out_row(rng, j, with_string) for _ in range(n_rows)]
            if second_source and j == n - 1:
                # shares the source key so the two sources join naturally
                outputs = ["k0"] + outputs[1:]
                rows = [{("k0" if k == f"k{j}" else k): v for k, v in r.items()} for r in rows]
            if not unconstrained:
                sigma = float(len(rows))
            services.append(_service(sid, cap, [], outputs, sigma, profile, rows, widths))
            continue

        parents = [i for i in range(j) if rng.random() < EDGE_PROBABILITY]
        if not parents:
            parents = [int(rng.integers(0, j))]
        feeder = parents[0]
        for p in parents[1:]:
            edges.append([f"ws{p}", sid])
        key = f"k{feeder}"
        sigma = _sigma(rng)
        rows = []
        # a floor on realized fan-out keeps most deep chains non-empty
        for value in KEY_DOMAIN:
            for _ in range(_fanout(rng, max(sigma, 0.9))):
                if len(rows) < MAX_ROWS:
                    rows.append({key: value, **_out_row(rng, j, with_string)})
        services.append(_service(sid, cap, [key], outputs, sigma, profile, rows, widths))

    # an occasional competing provider for one non-source capability
    candidates = [s for s in services if s["inputs"]]
    if candidates and rng.random() < 0.3:
        base = candidates[int(rng.integers(0, len(candidates)))]
        alt = dict(base, id=base["id"] + "x", profile=_profile(rng))
        services.append(alt)

    psel = {}
    for s in services:
        for a in s["outputs"]:
            if a.startswith("v") and rng.random() < 0.3:
                psel[f"{a}:<"] = round(float(rng.uniform(0.1, 0.9)), 3)
    return {
        "services": services,
        "edges": edges,
        "attr_widths": dict(sorted(widths.items())),
        "predicate_selectivities": psel,
    }


def generate_query(rng: np.random.Generator, doc: dict, *, plain: bool = False) -> str:
    """A random query over ``doc`` whose input attributes are all produced.

    ``plain`` gives ``SELECT *`` over every capability with no predicates.
    """
    by_cap: dict[str, dict] = {}
    for s in doc["services"]:
        by_cap.setdefault(s["capability"], s)
    caps = list(by_cap)
    if plain:
        return f"SELECT * FROM {', '.join(caps)}"

    producers: dict[str, set[str]] = {}
    for cap, s in by_cap.items():
        for a in s["outputs"]:
            producers.setdefault(a, set()).add(cap)
    chosen: list[str] = []
    for cap in caps:
        s = by_cap[cap]
        fed = all(producers.get(a, set()) & set(chosen) for a in s["inputs"])
        if fed and (not chosen or rng.random() < 0.85):
            chosen.append(cap)
    order = [chosen[i] for i in rng.permutation(len(chosen))]

    visible: dict[str, int] = {}
    for cap in chosen:
        for a in by_cap[cap]["outputs"]:
            visible[a] = visible.get(a, 0) + 1
    attrs = [a for a, n in visible.items() if n == 1]
    strings = {a for a in attrs if a.startswith("s")}

    preds: list[Predicate] = []
    for _ in range(int(rng.integers(0, 4))):
        if not attrs:
            break
        a = attrs[int(rng.integers(0, len(attrs)))]
        roll = rng.random()
        if a in strings:
            preds.append(Predicate(a, str(rng.choice(("=", "<>"))), str(rng.choice(STRINGS))))
        elif a.startswith("k") and roll < 0.4:
            others = [b for b in attrs if b.startswith("k") and b != a]
            if others:
                b = others[int(rng.integers(0, len(others)))]
                preds.append(Predicate(a, "=", Column(b)))
            else:
                preds.append(Predicate(a, "<=", int(rng.choice(KEY_DOMAIN))))
        elif a.startswith("k"):
            preds.append(Predicate(a, str(rng.choice(("=", "<=", ">=", "<>"))), int(rng.choice(KEY_DOMAIN))))
        else:
            preds.append(Predicate(a, str(rng.choice(("<", ">", "<=", "<>"))), int(rng.integers(0, 100))))

    if rng.random() < 0.2 or not attrs:
        projection = None
    else:
        k = int(rng.integers(1, len(attrs) + 1))
        projection = tuple(attrs[i] for i in rng.permutation(len(attrs))[:k])
    return render(Query(projection, tuple(order), tuple(preds)))


def generate_instance(seed: int, index: int, **kwargs) -> Instance:
    rng = instance_rng(seed, index)
    plain = kwargs.get("unconstrained", False)
    doc = generate_catalog(rng, **kwargs)
    query = generate_query(rng, doc, plain=plain)
    return Instance(f"g{seed}_{index:04d}", json.dumps(doc, indent=1, sort_keys=True) + "\n", query)


def generate_corpus(n: int, seed: int, **kwargs) -> list[Instance]:
    return [generate_instance(seed, i, **kwargs) for i in range(n)]


_IDENT_START = "abcdefghijklmnopqrstuvwxyz_"
_IDENT_REST = _IDENT_START + "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"


def _ident(rng: np.random.Generator) -> str:
    while True:
        n = int(rng.integers(1, 8))
        s = str(rng.choice(list(_IDENT_START))) + "".join(rng.choice(list(_IDENT_REST), size=n - 1))
        if s.upper() not in KEYWORDS:
            return s


def random_ast(rng: np.random.Generator) -> Query:
    """An arbitrary well-formed query AST, independent of any catalog."""
    projection = None if rng.random() < 0.2 else tuple(_ident(rng) for _ in range(int(rng.integers(1, 5))))
    sources = tuple(_ident(rng) for _ in range(int(rng.integers(1, 4))))
    preds = []
    for _ in range(int(rng.integers(0, 4))):
        op = str(rng.choice(("=", "<", ">", "<=", ">=", "<>")))
        kind = rng.random()
        if kind < 0.33:
            rhs: object = Column(_ident(rng))
        elif kind < 0.66:
            rhs = int(rng.integers(-10**6, 10**6))
        else:
            alphabet = list("abc XYZ'019_-,")
            rhs = "".join(rng.choice(alphabet, size=int(rng.integers(0, 8))))
        preds.append(Predicate(_ident(rng), op, rhs))
    return Query(projection, sources, tuple(preds))
