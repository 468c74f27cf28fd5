"""Service registry and the map / select / compose algebra over it.

A catalog file is JSON::

    {
      "services": [{"id": ..., "capability": ..., "inputs": [...], "outputs": [...],
                    "selectivity": ..., "profile": {...}, "avg_callsize": ...,
                    "avg_resultsize": ..., "dataset": [{...}, ...]}],
      "edges": [["producer", "consumer"], ...],
      "attr_widths": {"attr": bytes, ...},
      "predicate_selectivities": {"attr:op": factor, ...}
    }
"""

from __future__ import annotations

import graphlib
import heapq
import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from typing import Iterable, Mapping, Sequence

from wsms.costmodel import DEFAULT_COST_MODEL, CostModel, ServiceProfile
from wsms.errors import CatalogError, CycleError, PlanningError
from wsms.relation import COMPARATORS, Relation, is_value

DEFAULT_PREDICATE_SELECTIVITY = 0.5

_TOP_KEYS = {"services", "edges", "attr_widths", "predicate_selectivities"}
_SERVICE_KEYS = {
    "id", "capability", "inputs", "outputs", "selectivity", "profile",
    "avg_callsize", "avg_resultsize", "dataset",
}
_PROFILE_KEYS = {f.name for f in fields(ServiceProfile)}


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    capability: str
    input_attrs: tuple[str, ...]
    output_attrs: tuple[str, ...]
    selectivity: float
    profile: ServiceProfile
    dataset: Relation
    avg_callsize: float = 0.0
    avg_resultsize: float = 0.0

    @property
    def schema(self) -> tuple[str, ...]:
        return self.input_attrs + self.output_attrs


@dataclass(frozen=True)
class Catalog:
    services: Mapping[str, ServiceSpec] = field(default_factory=dict)
    explicit_edges: frozenset[tuple[str, str]] = frozenset()
    attr_widths: Mapping[str, float] = field(default_factory=dict)
    predicate_selectivities: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def service(self, service_id: str) -> ServiceSpec:
        try:
            return self.services[service_id]
        except KeyError:
            raise CatalogError(f"unknown service {service_id!r}") from None

    def predicate_selectivity(self, attr: str, op: str) -> float:
        return self.predicate_selectivities.get((attr, op), DEFAULT_PREDICATE_SELECTIVITY)

    def row_width(self, attrs: Iterable[str]) -> float:
        return sum(self.attr_widths.get(a, 0.0) for a in attrs)


@dataclass(frozen=True, order=True)
class Violation:
    subject: str
    rule: str
    message: str
    members: tuple[str, ...] = field(default=(), compare=False)

    def __str__(self) -> str:
        return f"{self.subject or '<catalog>'}: {self.rule}: {self.message}"


@dataclass(frozen=True)
class ServiceGraph:
    """Chosen services plus the precedence edges between them."""

    services: Mapping[str, ServiceSpec]
    edges: frozenset[tuple[str, str]] = frozenset()

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.services))

    def predecessors(self, service_id: str) -> frozenset[str]:
        return frozenset(a for a, b in self.edges if b == service_id)

    def topological_order(self) -> tuple[str, ...]:
        """Kahn's algorithm, always taking the lexicographically smallest ready id."""
        indeg = {s: 0 for s in self.services}
        succ: dict[str, list[str]] = {s: [] for s in self.services}
        for a, b in self.edges:
            indeg[b] += 1
            succ[a].append(b)
        ready = [s for s, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            s = heapq.heappop(ready)
            order.append(s)
            for t in succ[s]:
                indeg[t] -= 1
                if indeg[t] == 0:
                    heapq.heappush(ready, t)
        if len(order) != len(self.services):
            raise CycleError(s for s, d in indeg.items() if d > 0)
        return tuple(order)

    def is_linear_extension(self, order: Sequence[str]) -> bool:
        if sorted(order) != sorted(self.services):
            return False
        pos = {s: i for i, s in enumerate(order)}
        return all(pos[a] < pos[b] for a, b in self.edges)


def _fail(msg: str):
    raise CatalogError(msg)


def _number(obj, key: str, where: str, default=None) -> float:
    if key not in obj:
        if default is None:
            _fail(f"{where}: missing {key!r}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"{where}: {key!r} must be a number")
    return v


def _names(obj, key: str, where: str) -> tuple[str, ...]:
    v = obj.get(key, [])
    if not isinstance(v, list) or not all(isinstance(a, str) and a for a in v):
        _fail(f"{where}: {key!r} must be a list of attribute names")
    if len(set(v)) != len(v):
        _fail(f"{where}: duplicate attribute in {key!r}")
    return tuple(v)


def _parse_profile(obj, where: str) -> ServiceProfile:
    if not isinstance(obj, dict):
        _fail(f"{where}: profile must be an object")
    unknown = set(obj) - _PROFILE_KEYS
    if unknown:
        _fail(f"{where}: unknown profile key(s) {sorted(unknown)}")
    return ServiceProfile(**{k: _number(obj, k, where, 0.0) for k in _PROFILE_KEYS if k in obj})


def _parse_dataset(rows, schema: tuple[str, ...], where: str) -> Relation:
    if not isinstance(rows, list):
        _fail(f"{where}: dataset must be an array of row objects")
    schema = tuple(dict.fromkeys(schema))
    if not rows:
        return Relation(schema)
    first = rows[0]
    if not isinstance(first, dict):
        _fail(f"{where}: dataset rows must be objects")
    keys = set(first)
    # keep the declared attribute order when the row keys agree with it
    cols = schema if keys == set(schema) else tuple(sorted(keys))
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, dict) or set(row) != keys:
            _fail(f"{where}: dataset row {i} has keys inconsistent with row 0")
        out.append(tuple(row[c] for c in cols))
    return Relation(cols, tuple(out))


def _parse_service(obj, index: int) -> ServiceSpec:
    where = f"services[{index}]"
    if not isinstance(obj, dict):
        _fail(f"{where}: must be an object")
    unknown = set(obj) - _SERVICE_KEYS
    if unknown:
        _fail(f"{where}: unknown key(s) {sorted(unknown)}")
    sid = obj.get("id")
    if not isinstance(sid, str) or not sid:
        _fail(f"{where}: 'id' must be a non-empty string")
    where = f"service {sid!r}"
    cap = obj.get("capability")
    if not isinstance(cap, str) or not cap:
        _fail(f"{where}: 'capability' must be a non-empty string")
    if "profile" not in obj:
        _fail(f"{where}: missing 'profile'")
    inputs = _names(obj, "inputs", where)
    outputs = _names(obj, "outputs", where)
    return ServiceSpec(
        id=sid,
        capability=cap,
        input_attrs=inputs,
        output_attrs=outputs,
        selectivity=_number(obj, "selectivity", where),
        profile=_parse_profile(obj["profile"], where),
        dataset=_parse_dataset(obj.get("dataset", []), inputs + outputs, where),
        avg_callsize=_number(obj, "avg_callsize", where, 0.0),
        avg_resultsize=_number(obj, "avg_resultsize", where, 0.0),
    )


def parse_catalog(text: str) -> Catalog:
    """Parse catalog JSON without checking semantic invariants."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CatalogError(f"malformed catalog JSON: {e}") from None
    if not isinstance(doc, dict):
        _fail("catalog must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        _fail(f"unknown top-level key(s) {sorted(unknown)}")
    if "services" not in doc or not isinstance(doc["services"], list):
        _fail("'services' must be an array")

    services: dict[str, ServiceSpec] = {}
    for i, obj in enumerate(doc["services"]):
        spec = _parse_service(obj, i)
        if spec.id in services:
            _fail(f"duplicate service id {spec.id!r}")
        services[spec.id] = spec

    edges = set()
    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        _fail("'edges' must be an array")
    for e in raw_edges:
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e)):
            _fail(f"edge {e!r} must be a [from, to] pair of service ids")
        edges.add((e[0], e[1]))

    widths = doc.get("attr_widths", {})
    if not isinstance(widths, dict):
        _fail("'attr_widths' must be an object")
    for k in widths:
        _number(widths, k, "attr_widths")

    psel = {}
    raw_psel = doc.get("predicate_selectivities", {})
    if not isinstance(raw_psel, dict):
        _fail("'predicate_selectivities' must be an object")
    for key in raw_psel:
        attr, sep, op = key.rpartition(":")
        if not sep or not attr or op not in COMPARATORS:
            _fail(f"predicate_selectivities key {key!r} must look like 'attr:op'")
        psel[(attr, op)] = _number(raw_psel, key, "predicate_selectivities")

    return Catalog(
        services=dict(sorted(services.items())),
        explicit_edges=frozenset(edges),
        attr_widths=dict(widths),
        predicate_selectivities=psel,
    )


def _find_cycles(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[tuple[str, ...]]:
    """Return the node sets of every cycle found by repeated peeling, sorted."""
    graph: dict[str, set[str]] = {n: set() for n in sorted(nodes)}
    for a, b in edges:
        graph.setdefault(b, set()).add(a)
        graph.setdefault(a, set())
    cycles = []
    while True:
        try:
            tuple(graphlib.TopologicalSorter(graph).static_order())
            return cycles
        except graphlib.CycleError as e:
            members = tuple(sorted(set(e.args[1])))
            cycles.append(members)
            # break the reported cycle and look for more
            graph[members[0]] = {p for p in graph[members[0]] if p not in members}


def validate_catalog(c: Catalog) -> list[Violation]:
    out: list[Violation] = []
    missing_width: dict[str, str] = {}
    for sid, ws in c.services.items():
        overlap = set(ws.input_attrs) & set(ws.output_attrs)
        if overlap:
            out.append(Violation(sid, "disjoint-io", f"attributes both input and output: {sorted(overlap)}"))
        if not (isinstance(ws.selectivity, (int, float)) and math.isfinite(ws.selectivity) and ws.selectivity > 0):
            out.append(Violation(sid, "selectivity", f"selectivity must be positive, got {ws.selectivity}"))
        if ws.avg_callsize < 0:
            out.append(Violation(sid, "callsize", f"avg_callsize must be >= 0, got {ws.avg_callsize}"))
        if ws.avg_resultsize < 0:
            out.append(Violation(sid, "resultsize", f"avg_resultsize must be >= 0, got {ws.avg_resultsize}"))
        bad = ws.profile.problems()
        if bad:
            out.append(Violation(sid, "profile", f"negative or non-finite profile field(s) {bad}"))
        if set(ws.dataset.schema) != set(ws.schema):
            out.append(Violation(
                sid, "dataset-schema",
                f"dataset attributes {sorted(ws.dataset.schema)} differ from inputs+outputs {sorted(ws.schema)}",
            ))
        if any(not is_value(v) for row in ws.dataset.rows for v in row):
            out.append(Violation(sid, "dataset-values", "dataset values must be integers or strings"))
        for a in ws.schema:
            if a not in c.attr_widths and a not in missing_width:
                missing_width[a] = sid
    for a, sid in missing_width.items():
        out.append(Violation(sid, "attr-width", f"no width declared for attribute {a!r}"))
    for a, w in c.attr_widths.items():
        if not math.isfinite(w) or w < 0:
            out.append(Violation("", "attr-width", f"width of {a!r} must be nonnegative, got {w}"))
    for (a, op), f in c.predicate_selectivities.items():
        if not (0 < f <= 1):
            out.append(Violation("", "predicate-selectivity", f"factor for '{a}:{op}' must be in (0, 1], got {f}"))
    known_edges = []
    for a, b in sorted(c.explicit_edges):
        unknown = [x for x in (a, b) if x not in c.services]
        if unknown:
            out.append(Violation(a, "edge-endpoint", f"edge {a}->{b} names unknown service(s) {unknown}"))
        else:
            known_edges.append((a, b))
    for members in _find_cycles(c.services, known_edges):
        out.append(Violation(members[0], "cycle", "precedence cycle among {" + ", ".join(members) + "}", members))
    return sorted(out)


def load_catalog(text: str) -> Catalog:
    c = parse_catalog(text)
    problems = validate_catalog(c)
    cycles = [v for v in problems if v.rule == "cycle"]
    if cycles:
        raise CycleError(cycles[0].members)
    if problems:
        raise CatalogError("; ".join(str(v) for v in problems))
    return c


def bundled_catalog_text(name: str = "cat1") -> str:
    return resources.files("wsms").joinpath("data", f"{name}.json").read_text()


def map_services(c: Catalog, required_capabilities: Iterable[str]) -> dict[str, tuple[ServiceSpec, ...]]:
    """Candidates per requested capability, sorted by service id."""
    return {
        cap: tuple(ws for ws in c.services.values() if ws.capability == cap)
        for cap in sorted(set(required_capabilities))
    }


def select_service(candidates: Iterable[ServiceSpec], cm: CostModel = DEFAULT_COST_MODEL) -> ServiceSpec:
    ranked = sorted(candidates, key=lambda ws: (cm.call_cost(ws), ws.id))
    if not ranked:
        raise PlanningError("no candidate service provides the capability")
    return ranked[0]


def dependency_edges(chosen: Mapping[str, ServiceSpec]) -> set[tuple[str, str]]:
    """Edges producer -> consumer implied by attribute flow among ``chosen``.

    An input produced by several chosen services gets an edge from each of
    them, so every binding is fully joined before the consumer is probed.
    """
    edges = set()
    for sid, ws in chosen.items():
        for a in ws.input_attrs:
            for pid, producer in chosen.items():
                if pid != sid and a in producer.output_attrs:
                    edges.add((pid, sid))
    return edges


def compose(chosen: Iterable[ServiceSpec], c: Catalog) -> ServiceGraph:
    specs = {}
    for ws in chosen:
        if c.services.get(ws.id) != ws:
            raise PlanningError(f"service {ws.id!r} is not in the catalog")
        specs[ws.id] = ws
    specs = dict(sorted(specs.items()))
    edges = {(a, b) for a, b in c.explicit_edges if a in specs and b in specs}
    edges |= dependency_edges(specs)
    cycles = _find_cycles(specs, edges)
    if cycles:
        raise CycleError(cycles[0])
    return ServiceGraph(specs, frozenset(edges))
