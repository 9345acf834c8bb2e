"""Reaction rules with weights, actions, priorities and negative conditions.

A :class:`RuleFamily` is a parameterised rule template whose redex carries
parameter variables; instantiating a valuation gives a concrete
:class:`ReactionRule`.  Family entries in a model either pre-expand over
their domains (eager) or match the symbolic redex directly against a state,
binding parameters from the matched entities (lazy); both give the same
observable behaviour, the lazy path just avoids materialising huge
parameter products.

Priority classes are global and ordered: a rule may fire only when no rule
of any earlier class has a condition-satisfying match.  Weights turn the
matches of one action in one state into a probability distribution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .bigraph import Bigraph, Control, Link, Ref
from .canon import canonical_form
from .match import Match, occurrences
from .params import Term, Var, is_concrete, term_eval, term_vars


def _check_rule_shape(redex: Bigraph, reactum: Bigraph, site_map, weight: float, label: str):
    if weight <= 0:
        raise ValueError(f"rule {label}: weight must be positive, got {weight}")
    if redex.nregions != reactum.nregions:
        raise ValueError(
            f"rule {label}: redex has {redex.nregions} regions, reactum {reactum.nregions}"
        )
    if redex.outer_names() != reactum.outer_names():
        raise ValueError(
            f"rule {label}: outer names differ "
            f"({sorted(redex.outer_names())} vs {sorted(reactum.outer_names())})"
        )
    if redex.nsites != reactum.nsites:
        raise ValueError(
            f"rule {label}: redex has {redex.nsites} sites, reactum {reactum.nsites}"
        )
    if site_map is not None:
        if sorted(site_map) != list(range(redex.nsites)) or len(site_map) != reactum.nsites:
            raise ValueError(f"rule {label}: site map must be a bijection on sites")
    for lk in redex.links:
        if lk.name is not None and not lk.ports:
            raise ValueError(f"rule {label}: redex outer name {lk.name!r} has no ports")
    for _ctrl, param in redex.nodes:
        if not (param is None or isinstance(param, (int, Var))):
            raise ValueError(
                f"rule {label}: arithmetic in redex parameters is not allowed ({param})"
            )


@dataclass(frozen=True)
class ReactionRule:
    """Concrete rule: every entity parameter is a literal."""

    name: str
    redex: Bigraph
    reactum: Bigraph
    weight: float
    condition: Bigraph | None = None  # no occurrence of this outside the image
    site_map: tuple[int, ...] | None = None  # reactum site -> redex site, identity if None

    def __post_init__(self):
        _check_rule_shape(self.redex, self.reactum, self.site_map, self.weight, self.name)


def _subst(g: Bigraph, env: dict[str, int]) -> Bigraph:
    nodes = []
    for ctrl, param in g.nodes:
        if param is None or isinstance(param, int):
            nodes.append((ctrl, param))
        else:
            nodes.append((ctrl, term_eval(param, env)))
    return Bigraph(
        nodes,
        [list(cs) for cs in g.node_children],
        [list(cs) for cs in g.region_children],
        g.nsites,
        list(g.links),
    )


@dataclass(frozen=True)
class RuleFamily:
    """Parameterised redex -> reactum template over named integer parameters."""

    base: str
    formal: tuple[str, ...]
    redex: Bigraph
    reactum: Bigraph
    weight: float
    condition: Bigraph | None = None
    site_map: tuple[int, ...] | None = None

    def __post_init__(self):
        _check_rule_shape(self.redex, self.reactum, self.site_map, self.weight, self.base)
        free = set()
        for g in (self.redex, self.reactum):
            for _ctrl, param in g.nodes:
                if param is not None and not isinstance(param, int):
                    free |= term_vars(param)
        missing = free - set(self.formal)
        if missing:
            raise ValueError(f"rule {self.base}: unbound parameters {sorted(missing)}")

    def instance_name(self, env: dict[str, int]) -> str:
        if not self.formal:
            return self.base
        return f"{self.base}({','.join(str(env[v]) for v in self.formal)})"

    def instantiate(self, env: dict[str, int]) -> ReactionRule:
        return ReactionRule(
            name=self.instance_name(env),
            redex=_subst(self.redex, env),
            reactum=_subst(self.reactum, env),
            weight=self.weight,
            condition=self.condition,
            site_map=self.site_map,
        )


def expand(family: RuleFamily, domains: dict[str, tuple[int, ...]]) -> list[ReactionRule]:
    """One concrete rule per valuation in the cartesian product of the domains."""
    for v in family.formal:
        if v not in domains or not domains[v]:
            raise ValueError(f"rule {family.base}: empty or missing domain for {v!r}")
    axes = [tuple(domains[v]) for v in family.formal]
    out = []
    for combo in itertools.product(*axes):
        out.append(family.instantiate(dict(zip(family.formal, combo))))
    return out


# ---------------------------------------------------------------------------
# application


def apply(agent: Bigraph, rule: ReactionRule | RuleFamily, m: Match) -> Bigraph:
    """Replace the matched occurrence of the redex with the reactum.

    The context is preserved as-is, site contents are re-parented to the
    reactum's sites, reactum ports on an outer name reattach to the agent
    hyperedge that name matched, and fully consumed closed edges vanish.
    """
    if not agent.is_ground():
        raise ValueError("apply: agent must be ground")
    redex, reactum = rule.redex, rule.reactum
    image = set(m.nodes)
    for p, u in enumerate(m.nodes):
        if u >= agent.nnodes or agent.nodes[u][0].name != redex.nodes[p][0].name:
            raise ValueError("apply: stale match for this agent")
    label = getattr(rule, "name", None) or getattr(rule, "base", "rule")
    if not _condition_holds(agent, rule.condition, m):
        raise ValueError(f"apply: context condition of {label} violated")
    env = m.binding_env()
    emap = m.edge_map()

    survivors = [v for v in range(agent.nnodes) if v not in image]
    new_id = {old: i for i, old in enumerate(survivors)}
    nodes: list[tuple[Control, Term | None]] = [agent.nodes[v] for v in survivors]
    node_children: list[list[Ref]] = []
    for v in survivors:
        node_children.append(
            [("n", new_id[c]) for k, c in agent.node_children[v] if c not in image]
        )
    region_children: list[list[Ref]] = []
    for r in range(agent.nregions):
        region_children.append(
            [("n", new_id[c]) for k, c in agent.region_children[r] if c not in image]
        )

    react_id: dict[int, int] = {}
    for j in range(reactum.nnodes):
        ctrl, param = reactum.nodes[j]
        value = param if is_concrete(param) else term_eval(param, env)
        react_id[j] = len(nodes)
        nodes.append((ctrl, value))
        node_children.append([])

    site_map = rule.site_map or tuple(range(redex.nsites))

    def place(target: list[Ref], children):
        for k, c in children:
            if k == "n":
                target.append(("n", react_id[c]))
            else:
                for root in m.site_images[site_map[c]]:
                    target.append(("n", new_id[root]))

    for j in range(reactum.nnodes):
        place(node_children[react_id[j]], reactum.node_children[j])
    for r in range(reactum.nregions):
        anchor = m.anchors[r]
        if anchor is None:
            target = region_children[r if r < len(region_children) else 0]
        elif anchor[0] == "r":
            target = region_children[anchor[1]]
        else:
            target = node_children[new_id[anchor[1]]]
        place(target, reactum.region_children[r])

    # links: surviving agent ports keep their edges; reactum ports join the
    # matched edge of their outer name or form fresh closed edges
    new_ports: list[list[tuple[int, int]]] = [
        [(new_id[v], p) for v, p in lk.ports if v not in image] for lk in agent.links
    ]
    redex_edge_of_name = {
        lk.name: e for e, lk in enumerate(redex.links) if lk.name is not None
    }
    fresh: list[Link] = []
    for lk in reactum.links:
        ports = [(react_id[v], p) for v, p in lk.ports]
        if lk.name is not None:
            E = emap[redex_edge_of_name[lk.name]]
            new_ports[E].extend(ports)
        elif ports:
            fresh.append(Link(None, tuple(ports)))

    links: list[Link] = []
    for E, lk in enumerate(agent.links):
        if new_ports[E] or lk.name is not None:
            links.append(Link(lk.name, tuple(new_ports[E]), lk.inner))
    links.extend(fresh)

    return Bigraph(nodes, node_children, region_children, 0, links)


# ---------------------------------------------------------------------------
# model structure


@dataclass(frozen=True)
class PrioritySpec:
    """Ordered rule-name classes, first class binds tightest (highest)."""

    classes: tuple[frozenset[str], ...]

    def __post_init__(self):
        seen: set[str] = set()
        for cls in self.classes:
            dup = seen & cls
            if dup:
                raise ValueError(f"rule(s) {sorted(dup)} appear in two priority classes")
            seen |= cls


@dataclass
class RuleEntry:
    """One occurrence of a rule family inside a priority class, with domains."""

    family: RuleFamily
    domains: tuple[tuple[int, ...], ...]  # aligned with family.formal
    eager: bool = True
    _expanded: list[ReactionRule] | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.domains) != len(self.family.formal):
            raise ValueError(
                f"rule {self.family.base}: {len(self.domains)} argument(s), "
                f"family takes {len(self.family.formal)}"
            )
        for v, dom in zip(self.family.formal, self.domains):
            if not dom:
                raise ValueError(f"rule {self.family.base}: empty domain for {v!r}")

    @property
    def size(self) -> int:
        n = 1
        for dom in self.domains:
            n *= len(dom)
        return n

    def instance_names(self) -> list[str]:
        names = []
        for combo in itertools.product(*self.domains):
            names.append(self.family.instance_name(dict(zip(self.family.formal, combo))))
        return names

    def overlaps(self, other: "RuleEntry") -> bool:
        if self.family.base != other.family.base:
            return False
        if not self.family.formal:
            return True
        return all(
            set(a) & set(b) for a, b in zip(self.domains, other.domains)
        )

    def outcomes(self, agent: Bigraph) -> list["Outcome"]:
        out: list[Outcome] = []
        if self.eager:
            if self._expanded is None:
                self._expanded = expand(
                    self.family, dict(zip(self.family.formal, self.domains))
                )
            for rule in self._expanded:
                for m in occurrences(agent, rule.redex):
                    if _condition_holds(agent, rule.condition, m):
                        out.append(Outcome(rule.name, rule, m, rule.weight))
        else:
            domains = {v: set(dom) for v, dom in zip(self.family.formal, self.domains)}
            for m in occurrences(agent, self.family.redex, domains=domains):
                env = m.binding_env()
                if set(env) != set(self.family.formal):
                    # a formal parameter not pinned by the redex cannot be bound lazily
                    raise ValueError(
                        f"rule {self.family.base}: parameter(s) "
                        f"{sorted(set(self.family.formal) - set(env))} do not occur in the redex"
                    )
                if _condition_holds(agent, self.family.condition, m):
                    out.append(
                        Outcome(self.family.instance_name(env), self.family, m, self.family.weight)
                    )
        return out


@dataclass(frozen=True)
class Outcome:
    """An enabled (rule instance, match) pair with its weight."""

    name: str
    rule: ReactionRule | RuleFamily
    match: Match
    weight: float

    @property
    def base(self) -> str:
        return self.name.split("(", 1)[0]


def _condition_holds(agent: Bigraph, condition: Bigraph | None, m: Match) -> bool:
    if condition is None:
        return True
    return not occurrences(agent, condition, excluded=m.image)


@dataclass
class Model:
    """Elaborated model: controls, prioritised rule entries, actions, predicates."""

    controls: dict[str, Control]
    classes: list[list[RuleEntry]]
    actions: list[tuple[str, tuple[str, ...]]]  # (action label, rule base names)
    predicates: list[tuple[str, Bigraph]]
    init: Bigraph
    name: str = "model"

    def __post_init__(self):
        self.action_of: dict[str, str] = {}
        for label, bases in self.actions:
            for b in bases:
                if b in self.action_of:
                    raise ValueError(f"rule {b} belongs to two actions")
                self.action_of[b] = label
        for cls in self.classes:
            for entry in cls:
                if entry.family.base not in self.action_of:
                    raise ValueError(f"rule {entry.family.base} belongs to no action")
        flat = [e for cls in self.classes for e in cls]
        for i, a in enumerate(flat):
            for b in flat[i + 1 :]:
                if a.overlaps(b):
                    raise ValueError(
                        f"rule instances of {a.family.base} appear in two priority classes"
                    )

    @property
    def action_order(self) -> list[str]:
        return [label for label, _ in self.actions]

    def priority_spec(self) -> PrioritySpec:
        return PrioritySpec(
            tuple(
                frozenset(n for e in cls for n in e.instance_names()) for cls in self.classes
            )
        )

    def rule_count(self) -> int:
        return sum(e.size for cls in self.classes for e in cls)


def enabled_outcomes(agent: Bigraph, model: Model) -> dict[str, list[Outcome]]:
    """Outcomes of the highest priority class with any valid match, by action.

    Actions appear in declaration order; the mapping is empty iff no rule
    matches at all.
    """
    for cls in model.classes:
        found: list[Outcome] = []
        for entry in cls:
            found.extend(entry.outcomes(agent))
        if found:
            grouped: dict[str, list[Outcome]] = {}
            for oc in found:
                grouped.setdefault(model.action_of[oc.base], []).append(oc)
            out: dict[str, list[Outcome]] = {}
            for label in model.action_order:
                if label in grouped:
                    out[label] = grouped[label]
            return out
    return {}


def action_distribution(
    agent: Bigraph, outcomes: list[Outcome]
) -> list[tuple[Bigraph, float, tuple[str, ...]]]:
    """Normalise one action's outcomes into a distribution over result states.

    Each outcome's probability is weight / total weight; outcomes whose
    results are isomorphic merge by summing.  Entries keep first-appearance
    order and carry the contributing rule names.
    """
    if not outcomes:
        raise ValueError("action_distribution: empty outcome list")
    total = sum(oc.weight for oc in outcomes)
    acc: dict[bytes, int] = {}
    entries: list[tuple[Bigraph, float, list[str]]] = []
    for oc in outcomes:
        succ = apply(agent, oc.rule, oc.match)
        key = canonical_form(succ)
        p = oc.weight / total
        if key in acc:
            g, p0, names = entries[acc[key]]
            entries[acc[key]] = (g, p0 + p, names + [oc.name])
        else:
            acc[key] = len(entries)
            entries.append((succ, p, [oc.name]))
    return [(g, p, tuple(dict.fromkeys(names))) for g, p, names in entries]
