"""Bigraph-pattern state labelling and a small probabilistic property checker.

A pattern labels every state it occurs in.  Properties range over boolean
combinations of labels: probabilistic reachability with a bound, safety
("never bad"), inevitability ("always eventually goal"), and the forced-next
idiom ("whenever the trigger holds, every possible next state satisfies the
target" plus the trigger being inevitable).

Reachability values come from value iteration after qualitative
precomputation: prob-0 states are removed graph-theoretically (and prob-1
states for the minimum), so 0 and 1 answers are exact rather than
approximate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .bigraph import Bigraph
from .kernels import as_arrays, sweep
from .match import occurrences
from .mdp import Mdp

VI_TOL = 1e-9
VI_MAX_SWEEPS = 1_000_000


@dataclass(frozen=True)
class Pattern:
    """A named bigraph used as a state predicate."""

    name: str
    body: Bigraph


def label(mdp: Mdp, patterns: list[Pattern]) -> Mdp:
    """Attach to every state the set of pattern names occurring in it."""
    mdp.labels = [
        {p.name for p in patterns if occurrences(g, p.body)} for g in mdp.states
    ]
    mdp.label_names = {p.name for p in patterns}
    return mdp


# ---------------------------------------------------------------------------
# label expressions


class UnknownLabel(Exception):
    pass


# expression AST: ("name", s) | ("not", e) | ("and", a, b) | ("or", a, b)


def expr_names(expr) -> set[str]:
    if expr[0] == "name":
        return {expr[1]}
    if expr[0] == "not":
        return expr_names(expr[1])
    return expr_names(expr[1]) | expr_names(expr[2])


def eval_expr(expr, labels: set[str]) -> bool:
    op = expr[0]
    if op == "name":
        return expr[1] in labels
    if op == "not":
        return not eval_expr(expr[1], labels)
    if op == "and":
        return eval_expr(expr[1], labels) and eval_expr(expr[2], labels)
    return eval_expr(expr[1], labels) or eval_expr(expr[2], labels)


def satisfying(mdp: Mdp, expr) -> list[bool]:
    if mdp.label_names is not None:
        missing = expr_names(expr) - mdp.label_names
        if missing:
            raise UnknownLabel(f"unknown pattern name(s): {sorted(missing)}")
    return [eval_expr(expr, labels) for labels in mdp.labels]


# ---------------------------------------------------------------------------
# properties


@dataclass(frozen=True)
class Reach:
    bound: str  # one of >= > <= <
    p: float
    target: tuple
    mode: str  # min or max
    source: str = ""


@dataclass(frozen=True)
class Safety:
    bad: tuple
    source: str = ""


@dataclass(frozen=True)
class Inevitable:
    goal: tuple
    source: str = ""


@dataclass(frozen=True)
class ForcedNext:
    trigger: tuple
    next: tuple
    source: str = ""


Property = Reach | Safety | Inevitable | ForcedNext


@dataclass(frozen=True)
class Verdict:
    holds: bool
    value: float | None = None
    detail: str = ""


# ---------------------------------------------------------------------------
# reachability


def _predecessors(mdp: Mdp) -> list[list[int]]:
    pred: list[list[int]] = [[] for _ in range(mdp.n_states)]
    for s, cs in enumerate(mdp.choices):
        for c in cs:
            for t, _p in c.dist:
                pred[t].append(s)
    return pred


def _backward_reach(mdp: Mdp, seeds: set[int], allowed=None) -> set[int]:
    pred = _predecessors(mdp)
    seen = set(seeds)
    todo = list(seeds)
    while todo:
        t = todo.pop()
        for s in pred[t]:
            if s not in seen and (allowed is None or allowed[s]):
                seen.add(s)
                todo.append(s)
    return seen


def _prob0_avoid_set(mdp: Mdp, target: list[bool]) -> set[int]:
    """States from which some scheduler avoids the target forever (Pmin = 0)."""
    avoid = {s for s in range(mdp.n_states) if not target[s]}
    changed = True
    while changed:
        changed = False
        for s in list(avoid):
            cs = mdp.choices[s]
            if not cs:
                continue  # deadlock: absorbing, avoids forever
            if not any(all(t in avoid for t, _p in c.dist) for c in cs):
                avoid.discard(s)
                changed = True
    return avoid


def _prob1_sure_set(mdp: Mdp, target: list[bool]) -> set[int]:
    """States where the best scheduler reaches the target with probability one.

    Greatest fixpoint over candidate sets X of the least fixpoint growing from
    the target through choices that stay inside X and touch the grown set.
    """
    n = mdp.n_states
    tset = {s for s in range(n) if target[s]}
    X = set(range(n))
    while True:
        Y = set(tset)
        changed = True
        while changed:
            changed = False
            for s in range(n):
                if s in Y:
                    continue
                for c in mdp.choices[s]:
                    supp = {t for t, _p in c.dist}
                    if supp <= X and supp & Y:
                        Y.add(s)
                        changed = True
                        break
        if Y == X:
            return X
        X = Y


def reach_vector(mdp: Mdp, target: list[bool], mode: str) -> np.ndarray:
    """Per-state probability of eventually reaching the target set."""
    if mode not in ("min", "max"):
        raise ValueError("mode must be min or max")
    n = mdp.n_states
    values = np.zeros(n, dtype=np.float64)
    fixed = np.zeros(n, dtype=np.bool_)
    tset = {s for s in range(n) if target[s]}
    for s in tset:
        values[s] = 1.0
        fixed[s] = True

    if mode == "max":
        can_reach = _backward_reach(mdp, tset)
        for s in range(n):
            if s not in can_reach:
                fixed[s] = True  # exact 0
        for s in _prob1_sure_set(mdp, target):
            values[s] = 1.0
            fixed[s] = True  # exact 1
    else:
        avoid = _prob0_avoid_set(mdp, target)
        for s in avoid:
            fixed[s] = True  # exact 0
        escape = _backward_reach(mdp, avoid, allowed=[not target[s] for s in range(n)])
        for s in range(n):
            if s not in escape and not target[s]:
                values[s] = 1.0  # Pmin = 1, exact
                fixed[s] = True

    choice_ptr, trans_ptr, targets, probs = as_arrays(
        [[(c.action, c.dist) for c in cs] for cs in mdp.choices]
    )
    minimize = mode == "min"
    for _ in range(VI_MAX_SWEEPS):
        delta = sweep(values, fixed, minimize, choice_ptr, trans_ptr, targets, probs)
        if delta < VI_TOL:
            break
    else:
        raise RuntimeError(f"value iteration did not converge within {VI_MAX_SWEEPS} sweeps")
    return values


def reach_prob(mdp: Mdp, target_expr, mode: str) -> float:
    """Probability of reaching states satisfying the expression, from state 0."""
    return float(reach_vector(mdp, satisfying(mdp, target_expr), mode)[0])


# ---------------------------------------------------------------------------
# checking


def check(mdp: Mdp, prop: Property) -> Verdict:
    if isinstance(prop, Reach):
        v = reach_prob(mdp, prop.target, prop.mode)
        holds = {
            ">=": v >= prop.p,
            ">": v > prop.p,
            "<=": v <= prop.p,
            "<": v < prop.p,
        }[prop.bound]
        return Verdict(holds, v, f"P{prop.mode} = {v:.10g}")
    if isinstance(prop, Safety):
        v = reach_prob(mdp, prop.bad, "max")
        return Verdict(v == 0.0, v, f"Pmax(bad) = {v:.10g}")
    if isinstance(prop, Inevitable):
        v = reach_prob(mdp, prop.goal, "min")
        return Verdict(v == 1.0, v, f"Pmin = {v:.10g}")
    if isinstance(prop, ForcedNext):
        trig = satisfying(mdp, prop.trigger)
        nxt = satisfying(mdp, prop.next)
        v = float(reach_vector(mdp, trig, "min")[0])
        if v != 1.0:
            return Verdict(False, v, f"trigger not inevitable (Pmin = {v:.10g})")
        for s in range(mdp.n_states):
            if not trig[s]:
                continue
            if not mdp.choices[s]:
                return Verdict(False, None, f"trigger state {s} is a deadlock")
            for c in mdp.choices[s]:
                for t, _p in c.dist:
                    if not nxt[t]:
                        return Verdict(
                            False,
                            None,
                            f"state {s}, action {c.action} reaches {t} without the target",
                        )
        return Verdict(True, 1.0, "trigger inevitable and every successor satisfies next")
    raise TypeError(f"unknown property {prop!r}")


# ---------------------------------------------------------------------------
# property file parsing

_TOKEN = re.compile(
    r'\s*(?:(?P<str>"[^"]*")|(?P<num>\d+(?:\.\d+)?)|(?P<op><=|>=|->|[<>!&|()\[\]])|(?P<word>[A-Za-z_]\w*))'
)


class PropertyError(Exception):
    pass


def _tokenize(line: str) -> list[str]:
    out = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if not m:
            if line[pos:].strip():
                raise PropertyError(f"cannot read property near {line[pos:]!r}")
            break
        out.append(m.group().strip())
        pos = m.end()
    return out


class _PropParser:
    def __init__(self, tokens: list[str], source: str):
        self.toks = tokens
        self.pos = 0
        self.source = source

    def peek(self) -> str | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, want: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (want is not None and tok != want):
            raise PropertyError(f"{self.source}: expected {want or 'more input'}, got {tok!r}")
        self.pos += 1
        return tok

    # expr := term ('|' term)* ; term := factor ('&' factor)* ;
    # factor := '!' factor | '(' expr ')' | quoted-name
    def expr(self):
        e = self.term()
        while self.peek() == "|":
            self.take()
            e = ("or", e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.peek() == "&":
            self.take()
            e = ("and", e, self.factor())
        return e

    def factor(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return ("not", self.factor())
        if tok == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if tok and tok.startswith('"'):
            self.take()
            return ("name", tok[1:-1])
        raise PropertyError(f"{self.source}: expected a quoted pattern name, got {tok!r}")

    def parse(self) -> Property:
        head = self.take()
        if head == "P":
            bound = self.take()
            if bound not in (">=", ">", "<=", "<"):
                raise PropertyError(f"{self.source}: bad bound {bound!r}")
            p = float(self.take())
            self.take("[")
            self.take("F")
            e = self.expr()
            self.take("]")
            self._done()
            mode = "min" if bound in (">=", ">") else "max"
            return Reach(bound, p, e, mode, self.source)
        if head == "A":
            self.take("[")
            kind = self.take()
            if kind == "G":
                if self.peek() == "!":
                    self.take()
                    bad = self.factor()
                else:
                    raise PropertyError(f"{self.source}: A [ G ... ] takes a negated expression")
                self.take("]")
                self._done()
                return Safety(bad, self.source)
            if kind == "F":
                e = self.expr()
                self.take("]")
                self._done()
                return Inevitable(e, self.source)
            raise PropertyError(f"{self.source}: expected F or G after A [")
        if head == "E":
            self.take("[")
            self.take("F")
            e = self.expr()
            self.take("]")
            self._done()
            # E F phi  <=>  Pmax(F phi) > 0
            return Reach(">", 0.0, e, "max", self.source)
        if head == "FORCEDNEXT":
            trig = self.expr()
            self.take("->")
            nxt = self.expr()
            self._done()
            return ForcedNext(trig, nxt, self.source)
        raise PropertyError(f"{self.source}: unknown property form {head!r}")

    def _done(self):
        if self.peek() is not None:
            raise PropertyError(f"{self.source}: trailing input {self.peek()!r}")


def parse_properties(text: str) -> list[Property]:
    """One property per line; `#` comments and blank lines are skipped."""
    props = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        props.append(_PropParser(_tokenize(line), line).parse())
    return props
