import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsms.errors import LexError, QuerySyntaxError, ValidationError
from wsms.relation import Column, Predicate
from wsms.sqlfront import KEYWORDS, Query, parse, parse_query, render, tokenize

from conftest import make_catalog, vq_of

PARSE_EXAMPLES = [
    "SELECT * FROM customers",
    "SELECT cid, score FROM customers, credit WHERE score > 600 AND city = 'Pune'",
    "SELECT cid FROM customers",
]


def kinds(text):
    return [(t.kind, t.text) for t in tokenize(text)]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_simple_select():
    assert kinds("SELECT cid FROM customers") == [
        ("keyword", "SELECT"), ("identifier", "cid"), ("keyword", "FROM"), ("identifier", "customers"),
    ]


def test_tokenize_comparison():
    assert [k for k, _ in kinds("score >= 5")] == ["identifier", "comparator", "number"]


def test_keywords_case_insensitive():
    assert kinds("select a from b where x = 1 and y = 2")[0] == ("keyword", "SELECT")


def test_token_positions_are_byte_offsets():
    toks = tokenize("SELECT x FROM t WHERE c = 'é' AND d = 1")
    text = "SELECT x FROM t WHERE c = 'é' AND d = 1".encode()
    for t in toks:
        assert text[t.position:].startswith(t.text.encode())


@pytest.mark.parametrize("op", ["=", "<", ">", "<=", ">=", "<>"])
def test_every_comparator(op):
    q = parse_query(f"SELECT a FROM t WHERE a {op} 3")
    assert q.predicates == (Predicate("a", op, 3),)


def test_parse_star():
    q = parse(tokenize("SELECT * FROM customers"))
    assert q == Query(None, ("customers",), ())


def test_parse_two_sources_two_predicates():
    q = parse_query(PARSE_EXAMPLES[1])
    assert q.sources == ("customers", "credit")
    assert q.predicates == (Predicate("score", ">", 600), Predicate("city", "=", "Pune"))


def test_parse_attribute_rhs_and_negative_number():
    q = parse_query("SELECT a FROM t WHERE a = b AND c < -4")
    assert q.predicates == (Predicate("a", "=", Column("b")), Predicate("c", "<", -4))


def test_string_escape():
    q = parse_query("SELECT a FROM t WHERE s = 'it''s'")
    assert q.predicates[0].rhs == "it's"
    assert render(q) == "SELECT a FROM t WHERE s = 'it''s'"


def test_syntax_error_at_from():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("SELECT FROM x")
    assert err.value.position == 7
    assert "FROM" in str(err.value)
    assert set(err.value.expected) == {"*", "identifier"}


@pytest.mark.parametrize("text, position", [
    ("SELECT a FROM", 13),
    ("SELECT a FROM t WHERE", 21),
    ("SELECT a FROM t WHERE a >", 25),
    ("SELECT a FROM t x", 16),
    ("SELECT a, FROM t", 10),
    ("FROM t", 0),
])
def test_syntax_error_positions(text, position):
    with pytest.raises(QuerySyntaxError) as err:
        parse_query(text)
    assert err.value.position == position


def test_lex_errors():
    with pytest.raises(LexError) as err:
        parse_query("SELECT a FROM t WHERE s = 'open")
    assert err.value.position == 26
    with pytest.raises(LexError):
        tokenize("SELECT a; FROM t")


@pytest.mark.parametrize("text", PARSE_EXAMPLES)
def test_round_trip_examples(text):
    q = parse_query(text)
    assert parse_query(render(q)) == q


def test_render_star_prefix():
    assert render(parse_query("select * from t")).startswith("SELECT *")


def test_validate_binds_source(cat1):
    vq = vq_of(cat1, "SELECT cid FROM customers")
    assert vq.bindings["customers"].id == "ws_src"
    assert vq.columns == ("cid",)


def test_validate_unknown_attribute(cat1):
    with pytest.raises(ValidationError, match="nope"):
        vq_of(cat1, "SELECT nope FROM customers")


def test_validate_unproducible_attribute(cat1):
    with pytest.raises(ValidationError, match="score"):
        vq_of(cat1, "SELECT score FROM customers")


def test_validate_star_columns(cat1):
    assert vq_of(cat1, "SELECT * FROM credit, customers").columns == ("score", "cid", "city")


@pytest.mark.parametrize("query, fragment", [
    ("SELECT cid FROM customers, customers", "twice"),
    ("SELECT cid FROM ghosts", "unknown capability"),
    ("SELECT score FROM credit", "not produced"),
    ("SELECT cid, cid FROM customers", "projected twice"),
    ("SELECT cid FROM customers WHERE nope = 1", "nope"),
])
def test_validate_errors(cat1, query, fragment):
    with pytest.raises(ValidationError, match=fragment):
        vq_of(cat1, query)


def test_ambiguous_reference_rejected():
    c = make_catalog([{"id": "a", "outputs": ["k", "x"]}, {"id": "b", "outputs": ["k", "y"]}])
    with pytest.raises(ValidationError, match="ambiguous"):
        vq_of(c, "SELECT k FROM a, b")
    # unreferenced shared attributes are fine
    assert vq_of(c, "SELECT x, y FROM a, b").columns == ("x", "y")


def test_cross_service_inequality_rejected():
    c = make_catalog([{"id": "a", "outputs": ["x"]}, {"id": "b", "outputs": ["y"]}])
    with pytest.raises(ValidationError, match="must use '='"):
        vq_of(c, "SELECT x FROM a, b WHERE x < y")
    assert vq_of(c, "SELECT x FROM a, b WHERE x = y").ast.predicates[0].is_join


idents = st.from_regex(r"[a-z_][a-zA-Z0-9_]{0,6}", fullmatch=True).filter(lambda s: s.upper() not in KEYWORDS)
values = st.one_of(idents.map(Column), st.integers(-10**9, 10**9), st.text(alphabet="ab '_,9", max_size=6))
preds = st.builds(Predicate, idents, st.sampled_from(["=", "<", ">", "<=", ">=", "<>"]), values)
queries = st.builds(
    Query,
    st.one_of(st.none(), st.lists(idents, min_size=1, max_size=4).map(tuple)),
    st.lists(idents, min_size=1, max_size=3).map(tuple),
    st.lists(preds, max_size=4).map(tuple),
)


@settings(max_examples=300, deadline=None)
@given(queries)
def test_round_trip_property(q):
    assert parse(tokenize(render(q))) == q
