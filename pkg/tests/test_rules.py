import math

import pytest

from tickgraph.bigraph import Control, close, ion, merge, nest, parallel, site, validate
from tickgraph.canon import is_iso
from tickgraph.match import occurrences
from tickgraph.params import Arith, Var
from tickgraph.rules import (
    Model,
    RuleEntry,
    RuleFamily,
    ReactionRule,
    action_distribution,
    apply,
    enabled_outcomes,
    expand,
)

from .conftest import (
    DONE,
    INIT,
    SEND,
    WAIT,
    X,
    S,
    build_pta_model,
    loc_state,
    pta_families,
    pta_state,
)


def test_expand_clock_advance():
    fam = pta_families()["clock_advance"]
    rules = expand(fam, {"n": tuple(range(9))})
    assert len(rules) == 9
    r3 = next(r for r in rules if r.name == "clock_advance(3)")
    assert r3.redex.nodes[0][1] == 3
    assert r3.reactum.nodes[0][1] == 4  # arithmetic evaluated


def test_expand_wait_domain():
    fam = pta_families()["wait_transition"]
    assert len(expand(fam, {"n": (4, 5, 6, 7, 8)})) == 5


def test_expand_empty_domain():
    fam = pta_families()["clock_advance"]
    with pytest.raises(ValueError, match="empty"):
        expand(fam, {"n": ()})


def test_rule_shape_validation():
    with pytest.raises(ValueError, match="outer names"):
        ReactionRule("bad", ion(S, ["c"]), ion(S, ["d"]), 1.0)
    with pytest.raises(ValueError, match="regions"):
        ReactionRule(
            "bad2", parallel(ion(INIT), ion(SEND)), merge(ion(INIT), ion(SEND)), 1.0
        )
    with pytest.raises(ValueError, match="weight"):
        ReactionRule("bad3", ion(INIT), ion(INIT), 0.0)
    with pytest.raises(ValueError, match="arithmetic in redex"):
        RuleFamily(
            "bad4", ("n",),
            ion(X, ["c"], param=Arith("+", Var("n"), 1)),
            ion(X, ["c"], param=Var("n")),
            1.0,
        )


def test_apply_init_transition():
    rule = pta_families()["init_transition"].instantiate({"n": 2})
    agent = pta_state(INIT, 2)
    (m,) = occurrences(agent, rule.redex)
    out = apply(agent, rule, m)
    assert validate(out) == []
    assert is_iso(out, pta_state(SEND, 0))  # clock reset


def test_apply_keeps_clock_on_success():
    rule = pta_families()["send_transition_success"].instantiate({"n": 0})
    agent = pta_state(SEND, 0)
    (m,) = occurrences(agent, rule.redex)
    assert is_iso(apply(agent, rule, m), pta_state(DONE, 0))


def test_apply_symbolic_family_uses_binding():
    fam = pta_families()["clock_advance"]
    agent = pta_state(INIT, 5)
    (m,) = occurrences(agent, fam.redex, domains={"n": set(range(9))})
    assert m.binding_env() == {"n": 5}
    assert is_iso(apply(agent, fam, m), pta_state(INIT, 6))


def test_apply_stale_match():
    rule = pta_families()["init_transition"].instantiate({"n": 0})
    agent = pta_state(INIT, 0)
    (m,) = occurrences(agent, rule.redex)
    other = merge(ion(INIT), ion(DONE))
    with pytest.raises(ValueError, match="stale"):
        apply(other, rule, m)


def test_apply_condition_violated():
    stop = Control("Stop", atomic=True)
    a = Control("A", atomic=True)
    b = Control("B", atomic=True)
    fam = RuleFamily("go", (), ion(a), ion(b), 1.0, condition=ion(stop))
    agent = merge(ion(a), ion(stop))
    (m,) = occurrences(agent, fam.redex)
    with pytest.raises(ValueError, match="condition"):
        apply(agent, fam, m)


def test_negative_condition_sees_site_content():
    # captured site content lies outside the image, so a marker inside it
    # still blocks the rule
    stop = Control("Stop", atomic=True)
    box = Control("Box")
    out = Control("Out", atomic=True)
    fam = RuleFamily(
        "empty_box",
        (),
        nest(ion(box), site()),
        nest(ion(box), site()),
        1.0,
        condition=ion(stop),
    )
    agent = nest(ion(box), ion(stop))
    (m,) = occurrences(agent, fam.redex)
    assert m.site_images == ((0,),) or len(m.site_images[0]) == 1
    assert occurrences(agent, ion(stop), excluded=m.image)  # Stop is in the context
    model = Model(
        controls={c.name: c for c in (stop, box, out)},
        classes=[[RuleEntry(fam, ())]],
        actions=[("a", ("empty_box",))],
        predicates=[],
        init=agent,
        name="t",
    )
    assert enabled_outcomes(agent, model) == {}


def test_negative_condition_blocks():
    stop = Control("Stop", atomic=True)
    a = Control("A", atomic=True)
    b = Control("B", atomic=True)
    fam = RuleFamily("go", (), ion(a), ion(b), 1.0, condition=ion(stop))
    model = Model(
        controls={c.name: c for c in (stop, a, b)},
        classes=[[RuleEntry(fam, ())]],
        actions=[("go", ("go",))],
        predicates=[],
        init=merge(ion(a), ion(stop)),
        name="t",
    )
    assert enabled_outcomes(merge(ion(a), ion(stop)), model) == {}
    out = enabled_outcomes(ion(a), model)
    assert list(out) == ["go"] and len(out["go"]) == 1


def test_condition_blocked_class_falls_through():
    # a higher class whose only rule is condition-blocked does not preempt
    stop = Control("Stop", atomic=True)
    a = Control("A", atomic=True)
    b = Control("B", atomic=True)
    hi = RuleFamily("hi", (), ion(a), ion(b), 1.0, condition=ion(stop))
    lo = RuleFamily("lo", (), ion(a), ion(a), 1.0)
    model = Model(
        controls={c.name: c for c in (stop, a, b)},
        classes=[[RuleEntry(hi, ())], [RuleEntry(lo, ())]],
        actions=[("hi", ("hi",)), ("lo", ("lo",))],
        predicates=[],
        init=merge(ion(a), ion(stop)),
        name="t",
    )
    agent = merge(ion(a), ion(stop))
    out = enabled_outcomes(agent, model)
    assert list(out) == ["lo"]
    # without the blocker the higher class wins again
    out2 = enabled_outcomes(ion(a), model)
    assert list(out2) == ["hi"]


def test_enabled_outcomes_pta_initial(pta_model_prog):
    out = enabled_outcomes(pta_state(INIT, 0), pta_model_prog)
    assert set(out) == {"rec", "tick"}
    assert [oc.name for oc in out["rec"]] == ["init_transition(0)"]
    assert [oc.name for oc in out["tick"]] == ["clock_advance(0)"]


def test_enabled_outcomes_pta_clock1(pta_model_prog):
    out = enabled_outcomes(pta_state(INIT, 1), pta_model_prog)
    assert set(out) == {"rec", "tick"}
    assert [oc.name for oc in out["rec"]] == ["init_transition(1)"]


def test_priority_suppresses_tick_at_deadline(pta_model_prog):
    out = enabled_outcomes(pta_state(INIT, 2), pta_model_prog)
    assert set(out) == {"rec"}
    assert [oc.name for oc in out["rec"]] == ["init_transition(2)"]


def test_send_state_weighted_outcomes(pta_model_prog):
    out = enabled_outcomes(pta_state(SEND, 0), pta_model_prog)
    assert set(out) == {"send"}
    weights = sorted(oc.weight for oc in out["send"])
    assert weights == [0.01, 0.99]


def test_action_distribution_normalises(pta_model_prog):
    agent = pta_state(SEND, 0)
    out = enabled_outcomes(agent, pta_model_prog)
    dist = action_distribution(agent, out["send"])
    assert len(dist) == 2
    probs = {n[0]: p for _g, p, n in dist}
    assert math.isclose(probs["send_transition_success(0)"], 0.99, abs_tol=1e-15)
    assert math.isclose(probs["send_transition_fail(0)"], 0.01, abs_tol=1e-15)
    assert abs(sum(p for _g, p, _n in dist) - 1.0) < 1e-12


def test_action_distribution_singleton(pta_model_prog):
    agent = pta_state(INIT, 0)
    out = enabled_outcomes(agent, pta_model_prog)
    dist = action_distribution(agent, out["tick"])
    assert len(dist) == 1 and dist[0][1] == 1.0
    assert is_iso(dist[0][0], pta_state(INIT, 1))


def test_action_distribution_merges_isomorphic_results():
    # one rule, two symmetric matches, isomorphic successors: single entry, p=1
    a = Control("A", atomic=True)
    b = Control("B", atomic=True)
    rule = RuleFamily("flip", (), ion(a), ion(b), 1.0)
    model = Model(
        controls={"A": a, "B": b},
        classes=[[RuleEntry(rule, ())]],
        actions=[("flip", ("flip",))],
        predicates=[],
        init=merge(ion(a), ion(a)),
        name="t",
    )
    agent = merge(ion(a), ion(a))
    out = enabled_outcomes(agent, model)
    assert len(out["flip"]) == 2
    dist = action_distribution(agent, out["flip"])
    assert len(dist) == 1
    assert abs(dist[0][1] - 1.0) < 1e-12


def test_lazy_eager_equivalence():
    from tickgraph.canon import canonical_form

    eager = build_pta_model(eager=True)
    lazy = build_pta_model(eager=False)
    for state in [pta_state(INIT, 0), pta_state(INIT, 2), pta_state(SEND, 0), pta_state(WAIT, 5)]:
        oe = enabled_outcomes(state, eager)
        ol = enabled_outcomes(state, lazy)
        assert list(oe) == list(ol)
        for action in oe:
            de = action_distribution(state, oe[action])
            dl = action_distribution(state, ol[action])
            assert [(canonical_form(g), round(p, 12)) for g, p, _ in de] == [
                (canonical_form(g), round(p, 12)) for g, p, _ in dl
            ]


def test_out_of_range_clock_matches_nothing(pta_model_prog):
    # X(9) exceeds the clock_advance domain: time is up, no further tick
    agent = pta_state(WAIT, 9)
    out = enabled_outcomes(agent, pta_model_prog)
    assert "tick" not in out


def test_overlapping_priority_classes_rejected():
    fam = pta_families()
    with pytest.raises(ValueError, match="two priority classes"):
        Model(
            controls={},
            classes=[
                [RuleEntry(fam["init_transition"], ((1, 2),))],
                [RuleEntry(fam["init_transition"], ((2, 3),))],
            ],
            actions=[("rec", ("init_transition",))],
            predicates=[],
            init=pta_state(INIT, 0),
        )


def test_rule_in_no_action_rejected():
    fam = pta_families()
    with pytest.raises(ValueError, match="no action"):
        Model(
            controls={},
            classes=[[RuleEntry(fam["done_done"], ())]],
            actions=[],
            predicates=[],
            init=pta_state(DONE, 0),
        )


def test_priority_spec_instance_names(pta_model_prog):
    spec = pta_model_prog.priority_spec()
    assert spec.classes[0] == frozenset(
        {
            "done_done",
            "init_transition(2)",
            "send_transition_fail(0)",
            "send_transition_success(0)",
            "wait_transition(8)",
        }
    )
    assert "clock_advance(0)" in spec.classes[1]
    assert pta_model_prog.rule_count() == 20
