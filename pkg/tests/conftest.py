import pytest

from tickgraph.bigraph import Control, close, ion, merge, merge_all, nest, parallel, site
from tickgraph.params import Arith, Var
from tickgraph.rules import Model, RuleEntry, RuleFamily

# --- programmatic PTA model (mirrors models/pta.big) -----------------------

X = Control("X", arity=1, atomic=True, parameterised=True)
S = Control("S", arity=1)
INIT = Control("Init", atomic=True)
SEND = Control("Send", atomic=True)
WAIT = Control("Wait", atomic=True)
DONE = Control("Done", atomic=True)

PTA_CONTROLS = {c.name: c for c in (X, S, INIT, SEND, WAIT, DONE)}


def loc_state(loc: Control, clock):
    """S{c}.<loc> || X(<clock>){c} with c open (patterns / rule sides)."""
    return parallel(nest(ion(S, ["c"]), ion(loc)), ion(X, ["c"], param=clock))


def pta_state(loc: Control, clock: int):
    """A ground PTA state with the clock link closed."""
    return close("c", loc_state(loc, clock))


def move_rule(base, src, dst, weight, reset):
    n = Var("n")
    return RuleFamily(
        base=base,
        formal=("n",),
        redex=loc_state(src, n),
        reactum=loc_state(dst, 0 if reset else n),
        weight=weight,
    )


def pta_families():
    return {
        "init_transition": move_rule("init_transition", INIT, SEND, 1.0, reset=True),
        "send_transition_success": move_rule("send_transition_success", SEND, DONE, 0.99, reset=False),
        "send_transition_fail": move_rule("send_transition_fail", SEND, WAIT, 0.01, reset=False),
        "wait_transition": move_rule("wait_transition", WAIT, SEND, 1.0, reset=True),
        "done_done": RuleFamily(
            "done_done", (), nest(ion(S, ["c"]), ion(DONE)), nest(ion(S, ["c"]), ion(DONE)), 1.0
        ),
        "clock_advance": RuleFamily(
            "clock_advance",
            ("n",),
            ion(X, ["c"], param=Var("n")),
            ion(X, ["c"], param=Arith("+", Var("n"), 1)),
            1.0,
        ),
    }


def build_pta_model(eager=True) -> Model:
    fam = pta_families()
    entry = lambda name, *doms: RuleEntry(fam[name], tuple(tuple(d) for d in doms), eager=eager)
    classes = [
        [
            entry("done_done"),
            entry("init_transition", [2]),
            entry("send_transition_fail", [0]),
            entry("send_transition_success", [0]),
            entry("wait_transition", [8]),
        ],
        [
            entry("clock_advance", range(9)),
            entry("wait_transition", [4, 5, 6, 7]),
            entry("init_transition", [0, 1]),
        ],
    ]
    actions = [
        ("send", ("send_transition_success", "send_transition_fail")),
        ("retry", ("wait_transition",)),
        ("rec", ("init_transition",)),
        ("deadlock", ("done_done",)),
        ("tick", ("clock_advance",)),
    ]
    preds = [(f"in_{c.name}_state", nest(ion(S, ["c"]), ion(c))) for c in (INIT, SEND, WAIT, DONE)]
    preds += [(f"clock_X_{v}", ion(X, ["c"], param=v)) for v in range(10)]
    return Model(
        controls=dict(PTA_CONTROLS),
        classes=classes,
        actions=actions,
        predicates=preds,
        init=pta_state(INIT, 0),
        name="pta",
    )


@pytest.fixture(scope="session")
def pta_model_prog():
    return build_pta_model()


# --- programmatic two-rule weighted sensor model (bias example) ------------

SN = Control("Sn", arity=2)
DATA = Control("Data", atomic=True)
ACTIVE = Control("Active", atomic=True)
IDC = Control("ID", atomic=True, parameterised=True)


def sensor_initial():
    a = nest(ion(SN, ["ab", "ac"]), merge(ion(IDC, param=0), ion(DATA)))
    b = nest(ion(SN, ["ab", "bc"]), merge(ion(IDC, param=1), ion(ACTIVE)))
    c = nest(ion(SN, ["ac", "bc"]), merge(ion(IDC, param=2), ion(ACTIVE)))
    g = merge_all([a, b, c])
    for nm in ("ab", "ac", "bc"):
        g = close(nm, g)
    return g


def send_rule(target_id: int, weight: float) -> RuleFamily:
    snd_l = nest(ion(SN, ["x", "y"]), merge_all([ion(IDC, param=0), ion(DATA), site()]))
    rcv_l = nest(ion(SN, ["x", "z"]), merge_all([ion(IDC, param=target_id), ion(ACTIVE), site()]))
    snd_r = nest(ion(SN, ["x", "y"]), merge_all([ion(IDC, param=0), site()]))
    rcv_r = nest(
        ion(SN, ["x", "z"]),
        merge_all([ion(IDC, param=target_id), ion(ACTIVE), ion(DATA), site()]),
    )
    return RuleFamily(
        f"send_data_{target_id}", (), merge(snd_l, rcv_l), merge(snd_r, rcv_r), weight
    )


def build_sensor_model() -> Model:
    classes = [
        [
            RuleEntry(send_rule(1, 0.7), ()),
            RuleEntry(send_rule(2, 0.3), ()),
        ]
    ]
    actions = [("send", ("send_data_1", "send_data_2"))]
    preds = [
        ("data_at_b", nest(ion(SN, ["x", "y"]), merge_all([ion(IDC, param=1), ion(DATA), site()]))),
        ("data_at_c", nest(ion(SN, ["x", "y"]), merge_all([ion(IDC, param=2), ion(DATA), site()]))),
    ]
    return Model(
        controls={c.name: c for c in (SN, DATA, ACTIVE, IDC)},
        classes=classes,
        actions=actions,
        predicates=preds,
        init=sensor_initial(),
        name="sensor",
    )


@pytest.fixture(scope="session")
def sensor_model_prog():
    return build_sensor_model()
