"""Construction of the digital-clocks layer.

Clocks are ordinary entities living in their own parallel region (the
*clocks perspective*): one local clock per timed entity, linked to it
through a dedicated closed link, plus an optional global wall-time clock
that is never reset.  A single parameterised rule family advances every
clock together by one tick, so time is a point distribution.  Upper-bound
location invariants ("must leave by n") are encoded purely with priorities:
the rule instance at the bound goes strictly above the class holding the
tick rule and the earlier instances.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bigraph import Bigraph, Control, close, ion, merge_all, nest, parallel
from .params import Arith, Var
from .rules import RuleFamily

# canonical clock controls; models may register their own (the PTA uses X)
LC = Control("LC", arity=1, atomic=True, parameterised=True)
GC = Control("GC", arity=0, atomic=True, parameterised=True)
LOCAL_CLOCKS = Control("LocalClocks")


@dataclass(frozen=True)
class ClockConfig:
    """How to attach clocks to a model.

    ``timed`` lists (control name, link name) pairs, one per timed entity;
    the link name must already appear as an open name on a reserved port of
    that entity (arity raised by one beforehand).  Clock values are bounded
    by ``max_t``; each tick advances every clock by ``tick_step``.
    """

    max_t: int
    timed: tuple[tuple[str, str], ...] = ()
    tick_step: int = 1
    global_clock: bool = True
    container: bool = True  # wrap local clocks in a LocalClocks entity
    clock_control: Control = LC
    global_control: Control = GC
    container_control: Control = LOCAL_CLOCKS

    def __post_init__(self):
        if self.max_t < 1:
            raise ValueError("max_t must be at least 1")
        if self.tick_step < 1:
            raise ValueError("tick_step must be at least 1")
        links = [link for _ctrl, link in self.timed]
        if len(set(links)) != len(links):
            raise ValueError(f"duplicate clock link names: {links}")

    def advance_values(self) -> tuple[int, ...]:
        """Clock values from which a tick may fire: multiples of the step up to max_t - step."""
        return tuple(range(0, self.max_t - self.tick_step + 1, self.tick_step))


@dataclass(frozen=True)
class GuardSpec:
    """Non-strict interval constraint t <= clock <= n on one rule family."""

    rule_base: str
    lower: int
    upper: int
    deadline: bool = True  # upper bound forces the transition

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("guard interval is empty")


def build_clock_perspective(system: Bigraph, cfg: ClockConfig) -> Bigraph:
    """Attach the clocks region to `system` and close every clock link.

    Every timed entity must expose its reserved port on the configured open
    link name; all clocks start at 0.
    """
    names = system.outer_names()
    for ctrl_name, link in cfg.timed:
        if link not in names:
            raise ValueError(f"timed {ctrl_name}: no reserved port on open link {link!r}")
        holder = next(
            (
                system.nodes[v][0].name
                for lk in system.links
                if lk.name == link
                for v, _p in lk.ports
            ),
            None,
        )
        if holder != ctrl_name:
            raise ValueError(
                f"timed {ctrl_name}: link {link!r} is reserved by {holder!r} instead"
            )

    locals_ = [
        ion(cfg.clock_control, [link], param=0) for _ctrl, link in cfg.timed
    ]
    parts = []
    if cfg.global_clock:
        parts.append(ion(cfg.global_control, param=0))
    if locals_:
        clocks = merge_all(locals_)
        parts.append(nest(ion(cfg.container_control), clocks) if cfg.container else clocks)
    if not parts:
        raise ValueError("clock perspective needs at least one clock")
    out = parallel(system, merge_all(parts))
    for _ctrl, link in cfg.timed:
        out = close(link, out)
    return out


def gen_clock_advance(
    cfg: ClockConfig, condition: Bigraph | None = None
) -> tuple[RuleFamily, dict[str, tuple[int, ...]]]:
    """The tick family advancing all clocks simultaneously, with its domains.

    Parameters are one per local clock plus one for the global clock; only
    one valuation can ever match a state, so the tick action always advances
    time with probability one.
    """
    if not cfg.timed and not cfg.global_clock:
        raise ValueError("no clocks configured")
    formal: list[str] = [f"n{i + 1}" for i in range(len(cfg.timed))]

    def side(offset: int) -> Bigraph:
        locals_ = [
            ion(cfg.clock_control, [link], param=Var(v) if offset == 0 else Arith("+", Var(v), offset))
            for v, (_c, link) in zip(formal, cfg.timed)
        ]
        parts = []
        if cfg.global_clock:
            parts.append(
                ion(cfg.global_control, param=Var("n") if offset == 0 else Arith("+", Var("n"), offset))
            )
        if locals_:
            clocks = merge_all(locals_)
            parts.append(nest(ion(cfg.container_control), clocks) if cfg.container else clocks)
        return merge_all(parts)

    if cfg.global_clock:
        formal_all = formal + ["n"]
    else:
        formal_all = formal
    family = RuleFamily(
        base="clock_advance",
        formal=tuple(formal_all),
        redex=side(0),
        reactum=side(cfg.tick_step),
        weight=1.0,
        condition=condition,
    )
    domains = {v: cfg.advance_values() for v in formal_all}
    return family, domains


def timed_rule(
    base: RuleFamily,
    clock_link: str,
    domain: tuple[int, ...],
    reset: bool,
    clock_control: Control = LC,
    var: str = "n",
) -> tuple[RuleFamily, dict[str, tuple[int, ...]]]:
    """Turn an (arity-raised) rule into a clock-guarded family over `domain`.

    Both sides gain a parallel region holding the local clock on the shared
    open link; the reactum clock is reset to 0 or keeps the matched value.
    The clock value can change nowhere else except the tick rule.
    """
    if not domain:
        raise ValueError(f"timed_rule {base.base}: empty domain")
    if clock_link not in base.redex.outer_names():
        raise ValueError(
            f"timed_rule {base.base}: redex has no port on clock link {clock_link!r}"
        )
    if var in base.formal:
        raise ValueError(f"timed_rule {base.base}: parameter {var!r} already taken")
    redex = parallel(base.redex, ion(clock_control, [clock_link], param=Var(var)))
    reactum = parallel(
        base.reactum,
        ion(clock_control, [clock_link], param=0 if reset else Var(var)),
    )
    family = RuleFamily(
        base=base.base,
        formal=base.formal + (var,),
        redex=redex,
        reactum=reactum,
        weight=base.weight,
        condition=base.condition,
        site_map=base.site_map,
    )
    return family, {var: tuple(domain)}


def encode_invariant(
    guarded: RuleFamily,
    guard: GuardSpec,
    tick: tuple[RuleFamily, dict[str, tuple[int, ...]]] | None,
    var: str = "n",
    tick_step: int = 1,
) -> list[list[tuple[RuleFamily, dict[str, tuple[int, ...]]]]]:
    """Priority classes (highest first) realising a deadline guard.

    The instance at the upper bound preempts the class holding the tick rule
    and the earlier instances; a non-deadline guard yields one class with
    everything at tick priority.
    """
    if guard.rule_base != guarded.base:
        raise ValueError(f"guard names {guard.rule_base!r}, family is {guarded.base!r}")
    if var not in guarded.formal:
        raise ValueError(f"family {guarded.base} has no clock parameter {var!r}")
    if tick_step > 1 and (guard.lower % tick_step or guard.upper % tick_step):
        # a deadline between ticks would be skipped over
        raise ValueError(
            f"guard bounds [{guard.lower}, {guard.upper}] must be multiples of the "
            f"tick step {tick_step}"
        )
    step = tick_step
    below: list[tuple[RuleFamily, dict[str, tuple[int, ...]]]] = []
    if tick is not None:
        below.append(tick)
    if not guard.deadline:
        span = tuple(range(guard.lower, guard.upper + 1, step))
        return [below + [(guarded, {var: span})]]
    early = tuple(range(guard.lower, guard.upper, step))
    if early:
        below.append((guarded, {var: early}))
    return [
        [(guarded, {var: (guard.upper,)})],
        below,
    ]


def lint_clock_resets(
    family: RuleFamily, clock_controls: tuple[str, ...], tick_step: int = 1
) -> list[str]:
    """Check the reset discipline: a reactum clock carries the matched value,
    the literal 0, or (tick rule only) the matched value plus the step."""
    problems = []
    for ctrl, param in family.reactum.nodes:
        if ctrl.name not in clock_controls:
            continue
        ok = (
            param == 0
            or isinstance(param, Var)
            or (
                isinstance(param, Arith)
                and param.op == "+"
                and isinstance(param.left, Var)
                and param.right == tick_step
                and family.base == "clock_advance"
            )
        )
        if not ok:
            problems.append(f"{family.base}: reactum clock parameter {param} breaks reset discipline")
    return problems
