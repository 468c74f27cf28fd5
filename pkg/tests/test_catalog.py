import json

import pytest

from wsms.catalog import (
    ServiceGraph,
    compose,
    dependency_edges,
    load_catalog,
    map_services,
    parse_catalog,
    select_service,
    validate_catalog,
)
from wsms.errors import CatalogError, CycleError, PlanningError
from wsms.generator import P0

from conftest import make_catalog


def _doc(cat1_text):
    return json.loads(cat1_text)


def test_empty_services_list():
    c = load_catalog('{"services": []}')
    assert len(c.services) == 0


def test_cat1_loads(cat1):
    assert list(cat1.services) == ["ws_addr", "ws_credit", "ws_src"]
    assert cat1.explicit_edges == {("ws_src", "ws_credit"), ("ws_src", "ws_addr")}
    assert cat1.service("ws_src").dataset.multiset()[(1, "Pune")] == 1
    assert validate_catalog(cat1) == []


def test_two_service_cycle_is_named():
    text = json.dumps({
        "services": [
            {"id": "a", "capability": "a", "outputs": ["x"], "selectivity": 1, "profile": {}},
            {"id": "b", "capability": "b", "outputs": ["y"], "selectivity": 1, "profile": {}},
        ],
        "edges": [["a", "b"], ["b", "a"]],
        "attr_widths": {"x": 1, "y": 1},
    })
    with pytest.raises(CycleError) as err:
        load_catalog(text)
    assert err.value.members == ("a", "b")
    assert "{a, b}" in str(err.value)


def test_zero_selectivity_is_one_violation(cat1_text):
    doc = _doc(cat1_text)
    doc["services"][1]["selectivity"] = 0
    problems = validate_catalog(parse_catalog(json.dumps(doc)))
    assert [(v.subject, v.rule) for v in problems] == [("ws_credit", "selectivity")]
    with pytest.raises(CatalogError, match="selectivity"):
        load_catalog(json.dumps(doc))


def test_missing_width_names_attribute(cat1_text):
    doc = _doc(cat1_text)
    del doc["attr_widths"]["zip"]
    problems = validate_catalog(parse_catalog(json.dumps(doc)))
    assert len(problems) == 1
    assert "'zip'" in problems[0].message


@pytest.mark.parametrize("mutate, rule", [
    (lambda d: d["services"][1].__setitem__("outputs", ["score", "cid"]), "disjoint-io"),
    (lambda d: d["services"][1].__setitem__("avg_callsize", -1), "callsize"),
    (lambda d: d["services"][1].__setitem__("avg_resultsize", -1), "resultsize"),
    (lambda d: d["services"][1]["profile"].__setitem__("packing", -0.5), "profile"),
    (lambda d: [r.pop("city") for r in d["services"][0]["dataset"]], "dataset-schema"),
    (lambda d: d["services"][0]["dataset"][0].__setitem__("cid", 1.5), "dataset-values"),
    (lambda d: d["edges"].append(["ws_src", "ghost"]), "edge-endpoint"),
    (lambda d: d.__setitem__("predicate_selectivities", {"score:>": 1.5}), "predicate-selectivity"),
])
def test_each_invariant_reported(cat1_text, mutate, rule):
    doc = _doc(cat1_text)
    mutate(doc)
    rules = {v.rule for v in validate_catalog(parse_catalog(json.dumps(doc)))}
    assert rule in rules


@pytest.mark.parametrize("text, fragment", [
    ("not json", "malformed"),
    ("[]", "JSON object"),
    ('{"services": [], "extra": 1}', "unknown top-level"),
    ('{"services": [{"id": "a", "capability": "a", "outputs": [], "selectivity": 1, "profile": {}, "x": 1}]}',
     "unknown key"),
    ('{"services": [{"id": "a", "capability": "a", "outputs": [], "selectivity": 1, "profile": {"speed": 1}}]}',
     "unknown profile key"),
    ('{"services": [{"id": "a", "capability": "a", "outputs": [], "selectivity": 1}]}', "missing 'profile'"),
    ('{"services": [], "predicate_selectivities": {"score": 0.5}}', "attr:op"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(CatalogError, match=fragment):
        parse_catalog(text)


def test_duplicate_ids_rejected(cat1_text):
    doc = _doc(cat1_text)
    doc["services"].append(dict(doc["services"][0]))
    with pytest.raises(CatalogError, match="duplicate service id"):
        parse_catalog(json.dumps(doc))


def test_predicate_selectivities_parsed(cat1_text):
    doc = _doc(cat1_text)
    doc["predicate_selectivities"] = {"score:>": 0.25, "city:=": 0.1}
    c = load_catalog(json.dumps(doc))
    assert c.predicate_selectivity("score", ">") == 0.25
    assert c.predicate_selectivity("score", "<") == 0.5


def test_map_services(cat1):
    assert map_services(cat1, {"customers"}) == {"customers": (cat1.service("ws_src"),)}
    assert map_services(cat1, {"unknown"}) == {"unknown": ()}


def _credit_providers(serviceexec_b=30):
    return make_catalog([
        {"id": "src", "outputs": ["cid"]},
        {"id": "cr_a", "capability": "credit", "inputs": ["cid"], "outputs": ["score"]},
        {"id": "cr_b", "capability": "credit", "inputs": ["cid"], "outputs": ["score"],
         "profile": dict(P0, serviceexec=serviceexec_b)},
    ])


def test_map_returns_competing_providers():
    c = _credit_providers()
    assert [ws.id for ws in map_services(c, ["credit"])["credit"]] == ["cr_a", "cr_b"]


def test_select_service_cheapest_and_ties():
    c = _credit_providers(serviceexec_b=44)  # 76.0 vs 90.0
    a, b = c.service("cr_a"), c.service("cr_b")
    assert select_service([b, a]).id == "cr_a"
    assert select_service([b]).id == "cr_b"
    tie = _credit_providers()
    assert select_service([tie.service("cr_b"), tie.service("cr_a")]).id == "cr_a"
    with pytest.raises(PlanningError):
        select_service([])


def test_compose_cat1(cat1):
    g = compose(cat1.services.values(), cat1)
    assert g.edges == {("ws_src", "ws_credit"), ("ws_src", "ws_addr")}
    assert g.topological_order() == ("ws_src", "ws_addr", "ws_credit")


def test_compose_single_source(cat1):
    g = compose([cat1.service("ws_src")], cat1)
    assert g.edges == frozenset()


def test_compose_infers_dependency_edges_without_explicit_ones():
    c = make_catalog([
        {"id": "p", "outputs": ["k"]},
        {"id": "q", "inputs": ["k"], "outputs": ["v"]},
    ])
    assert compose(c.services.values(), c).edges == {("p", "q")}


def test_compose_contradicting_edge_is_cycle():
    c = make_catalog(
        [{"id": "p", "outputs": ["k"]}, {"id": "q", "inputs": ["k"], "outputs": ["v"]}],
        edges=[("q", "p")],
    )
    with pytest.raises(CycleError):
        compose(c.services.values(), c)


def test_multiple_producers_all_precede_consumer():
    chosen = {
        ws.id: ws
        for ws in make_catalog([
            {"id": "p1", "outputs": ["k"]},
            {"id": "p2", "outputs": ["k", "w"]},
            {"id": "q", "inputs": ["k"], "outputs": ["v"]},
        ]).services.values()
    }
    assert dependency_edges(chosen) == {("p1", "q"), ("p2", "q")}


def test_topological_order_is_lexicographic(cat1):
    g = ServiceGraph({s: cat1.service("ws_src") for s in ("c", "a", "b")}, frozenset({("c", "a")}))
    assert g.topological_order() == ("b", "c", "a")
    assert g.is_linear_extension(("c", "a", "b"))
    assert not g.is_linear_extension(("a", "c", "b"))
    assert not g.is_linear_extension(("a", "b"))
