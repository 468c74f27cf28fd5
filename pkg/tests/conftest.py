from __future__ import annotations

import json

import pytest

from wsms.catalog import Catalog, bundled_catalog_text, load_catalog
from wsms.generator import P0, generate_corpus
from wsms.simfabric import SimFabric
from wsms.sqlfront import ValidatedQuery, parse_query, validate_query

CORPUS_SIZE = 200
CORPUS_SEED = 42

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        _criteria[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} [{status}] {title}")


@pytest.fixture(scope="session")
def cat1_text() -> str:
    return bundled_catalog_text("cat1")


@pytest.fixture(scope="session")
def cat1(cat1_text) -> Catalog:
    return load_catalog(cat1_text)


@pytest.fixture
def fabric(cat1) -> SimFabric:
    return SimFabric(cat1, seed=0)


def vq_of(catalog: Catalog, query: str) -> ValidatedQuery:
    return validate_query(parse_query(query), catalog)


def make_catalog(services: list[dict], edges=(), widths=None, psel=None) -> Catalog:
    """Catalog from compact service dicts; P0 profile and width 8 unless given."""
    docs = []
    attrs = set()
    for s in services:
        d = {
            "id": s["id"],
            "capability": s.get("capability", s["id"]),
            "inputs": s.get("inputs", []),
            "outputs": s["outputs"],
            "selectivity": s.get("selectivity", 1.0),
            "profile": s.get("profile", P0),
            "avg_callsize": s.get("avg_callsize", 200),
            "avg_resultsize": s.get("avg_resultsize", 1000),
            "dataset": s.get("dataset", []),
        }
        attrs.update(d["inputs"], d["outputs"])
        docs.append(d)
    doc = {
        "services": docs,
        "edges": [list(e) for e in edges],
        "attr_widths": widths if widths is not None else {a: 8 for a in sorted(attrs)},
        "predicate_selectivities": psel or {},
    }
    return load_catalog(json.dumps(doc))


@pytest.fixture(scope="session")
def corpus():
    return generate_corpus(CORPUS_SIZE, CORPUS_SEED)
