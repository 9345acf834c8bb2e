import pathlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tickgraph.bigraph import validate
from tickgraph.canon import is_iso
from tickgraph.elaborate import ElabError, elaborate, load_model
from tickgraph.lang import ParseError, parse, pretty

MODELS = pathlib.Path(__file__).resolve().parent.parent / "models"


def read(name: str) -> str:
    return (MODELS / name).read_text()


def test_parse_pta_shape():
    ast = parse(read("pta.big"))
    assert len(ast.controls) == 6
    assert len(ast.reacts) == 6
    assert {c.name for c in ast.controls} == {"X", "S", "Init", "Send", "Wait", "Done"}
    assert ast.abrs is not None
    assert ast.abrs.init_name == "example_PTA"
    assert len(ast.abrs.classes) == 2


def test_parse_precedence():
    ast = parse("ctrl S = 1;\natomic fun ctrl X(n) = 1;\nbig b = /c (S{c}.id || X(0){c});\n")
    (decl,) = [b for b in ast.bigs if b.name == "b"]
    body = decl.body
    assert type(body).__name__ == "EClose" and body.name == "c"
    assert type(body.body).__name__ == "EPar"
    nest_part, ion_part = body.body.parts
    assert type(nest_part).__name__ == "ENest"
    assert type(ion_part).__name__ == "EIon" and ion_part.param == 0


def test_closure_scopes_rightward():
    ast = parse("atomic ctrl A = 1;\natomic ctrl B = 1;\nbig b = /c A{c} | B{c};\n")
    body = ast.bigs[0].body
    assert type(body).__name__ == "EClose"
    assert type(body.body).__name__ == "EMerge"


def test_nesting_binds_tighter_than_merge():
    ast = parse("ctrl A = 0;\natomic ctrl B = 0;\natomic ctrl C = 0;\nbig b = A.B | C;\n")
    body = ast.bigs[0].body
    assert type(body).__name__ == "EMerge"
    assert type(body.parts[0]).__name__ == "ENest"


def test_parse_error_missing_reactum():
    with pytest.raises(ParseError) as exc:
        parse("atomic ctrl A = 0;\nreact r = A -[0.5]-> ;\n")
    assert exc.value.line == 2


def test_parse_error_position_and_expectation():
    with pytest.raises(ParseError) as exc:
        parse("ctrl S = ;\n")
    assert exc.value.line == 1 and "integer" in str(exc.value)


def test_empty_file_no_abrs():
    with pytest.raises(ElabError, match="no abrs block"):
        elaborate(parse(""))


def test_round_trip_all_corpus_models():
    for name in ("pta.big", "sensor.big", "cloud.big"):
        ast = parse(read(name))
        again = parse(pretty(ast))
        assert again == ast, name


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=120))
def test_parser_never_panics(text):
    try:
        parse(text)
    except ParseError as exc:
        assert exc.line >= 1 and exc.col >= 1


@settings(max_examples=120, deadline=None)
@given(st.binary(max_size=120))
def test_parser_survives_octets(blob):
    try:
        parse(blob.decode("utf-8", errors="replace"))
    except ParseError:
        pass


# ---------------------------------------------------------------------------
# elaboration


@pytest.fixture(scope="module")
def pta_parsed():
    return load_model(MODELS / "pta.big")


def test_elaborate_pta_counts(pta_parsed):
    assert len(pta_parsed.controls) == 6
    assert pta_parsed.rule_count() == 20  # init 3, succ 1, fail 1, wait 5, done 1, tick 9
    assert [a for a, _ in pta_parsed.actions] == ["send", "retry", "rec", "deadlock", "tick"]
    names = [n for n, _ in pta_parsed.predicates]
    assert "in_Done_state" in names and "clock_X_0" in names and "clock_X_9" in names
    assert len(names) == 14
    assert validate(pta_parsed.init) == [] and pta_parsed.init.is_ground()


def test_elaborate_pta_priorities(pta_parsed):
    spec = pta_parsed.priority_spec()
    assert spec.classes[0] == frozenset(
        {
            "done_done",
            "init_transition(2)",
            "send_transition_fail(0)",
            "send_transition_success(0)",
            "wait_transition(8)",
        }
    )
    assert len(spec.classes[1]) == 15


def test_parsed_pta_matches_programmatic(pta_parsed, pta_model_prog):
    # rule-for-rule isomorphism between the DSL model and the built one
    from tickgraph.rules import expand

    def instances(model):
        out = {}
        for cls in model.classes:
            for e in cls:
                for r in expand(e.family, dict(zip(e.family.formal, e.domains))):
                    out[r.name] = r
        return out

    prog = instances(pta_model_prog)
    parsed = instances(pta_parsed)
    assert set(prog) == set(parsed)
    for name in prog:
        assert is_iso(prog[name].redex, parsed[name].redex), name
        assert is_iso(prog[name].reactum, parsed[name].reactum), name
        assert prog[name].weight == parsed[name].weight
    assert is_iso(pta_parsed.init, pta_model_prog.init)


def test_elaborate_cloud(tmp_path):
    model = load_model(MODELS / "cloud.big")
    assert len(model.controls) == 18
    # tick entry stays lazy: 9^4 * 13 valuations
    tick_entries = [
        e for cls in model.classes for e in cls if e.family.base == "clock_advance"
    ]
    assert len(tick_entries) == 1 and not tick_entries[0].eager
    assert tick_entries[0].size == 9**4 * 13
    assert model.init.is_ground() and validate(model.init) == []
    names = [n for n, _ in model.predicates]
    assert "req1_waiting_clock1" in names and "req1_processing" in names
    assert "request_Sent_to_S1_at_1_0" in names
    assert len(names) == 4 * 12 * 2 + 2


def test_elaborate_sensor():
    model = load_model(MODELS / "sensor.big")
    assert model.rule_count() == 2
    assert model.init.nnodes == 9


def test_cloud_fragment_lazy_eager_equivalence():
    # shrink the clock domains so the tick family is eagerly expandable,
    # then check both modes give identical outcome distributions
    from tickgraph.canon import canonical_form
    from tickgraph.rules import action_distribution, enabled_outcomes

    text = read("cloud.big")
    for name in ("request1Clock", "request2Clock", "request3Clock", "request4Clock"):
        text = text.replace(f"int {name} = {{0,1,2,3,4,5,6,7,8}};", f"int {name} = {{0,1,2}};")
    text = text.replace("int gc = {0,1,2,3,4,5,6,7,8,9,10,11,12};", "int gc = {0,1,2};")
    lazy = elaborate(parse(text), eager_limit=0)
    eager = elaborate(parse(text), eager_limit=10**6)
    assert all(not e.eager for cls in lazy.classes for e in cls)
    assert all(e.eager for cls in eager.classes for e in cls)

    state = lazy.init
    for _step in range(3):
        ol, oe = enabled_outcomes(state, lazy), enabled_outcomes(state, eager)
        assert list(ol) == list(oe)
        assert {oc.name for a in ol for oc in ol[a]} == {oc.name for a in oe for oc in oe[a]}
        action = next(iter(ol))
        dl = action_distribution(state, ol[action])
        de = action_distribution(state, oe[action])
        assert [(canonical_form(g), round(p, 12)) for g, p, _ in dl] == [
            (canonical_form(g), round(p, 12)) for g, p, _ in de
        ]
        state = dl[0][0]


def test_elaboration_errors():
    base = "atomic ctrl A = 0;\nreact r = A -[1]-> A;\n"

    def abrs(rules="{r}", actions="a = {r}", extra=""):
        return base + extra + (
            "big init0 = A;\nbegin abrs\n  init init0;\n"
            f"  rules = [ {rules} ];\n  actions = [ {actions} ];\nend\n"
        )

    elaborate(parse(abrs()))  # sanity: the well-formed version is fine

    with pytest.raises(ElabError, match="unknown control"):
        elaborate(parse("big b = Zz;\n" + abrs()))
    with pytest.raises(ElabError, match="undefined rule"):
        elaborate(parse(abrs(rules="{nope}")))
    with pytest.raises(ElabError, match="no action"):
        elaborate(parse(abrs(rules="{r, r2}", extra="react r2 = A -[1]-> A;\n")))
    with pytest.raises(ElabError, match="no priority class"):
        elaborate(parse(abrs(extra="react unused = A -[1]-> A;\n")))
    with pytest.raises(ElabError, match="two actions"):
        elaborate(parse(abrs(actions="a = {r}, b = {r}")))
    with pytest.raises(ElabError, match="empty"):
        elaborate(parse(base + "big i0 = A;\nbegin abrs\n  int d = {};\n  init i0;\n  rules = [ {r} ];\n  actions = [ a = {r} ];\nend\n"))


def test_arity_mismatch_position():
    with pytest.raises(ElabError, match="arity"):
        elaborate(parse("ctrl S = 2;\nbig b = S{c};\n" +
                        "react r = S{c,d}.id -[1]-> S{c,d}.id;\n" +
                        "big i0 = /c /d S{c,d}.b0;\natomic ctrl b0 = 0;\n" +
                        "begin abrs\n  init i0;\n  rules = [ {r} ];\n  actions = [ a = {r} ];\nend\n"))


def test_redex_arithmetic_rejected():
    text = (
        "atomic fun ctrl X(n) = 0;\n"
        "fun react r(n) = X(n + 1) -[1]-> X(n);\n"
        "big i0 = X(0);\n"
        "begin abrs\n  int n = {0,1};\n  init i0;\n  rules = [ {r(n)} ];\n  actions = [ a = {r} ];\nend\n"
    )
    with pytest.raises(ElabError, match="arithmetic"):
        elaborate(parse(text))


def test_scalar_int_binding():
    text = (
        "atomic fun ctrl X(n) = 0;\n"
        "fun react r(n) = X(n) -[1]-> X(n);\n"
        "big i0 = X(0);\n"
        "begin abrs\n  int k = 0;\n  init i0;\n  rules = [ {r(k)} ];\n  actions = [ a = {r} ];\nend\n"
    )
    model = elaborate(parse(text))
    assert model.rule_count() == 1
    assert model.priority_spec().classes[0] == frozenset({"r(0)"})
