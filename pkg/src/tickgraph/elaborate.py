"""Elaboration of a parsed `.big` document into an executable model.

Rule families are closed over the integer sets named at their use sites in
the `rules` list, priority classes keep their listed order (first class is
highest), actions must partition the rule base names, and predicate
families expand into one named pattern per valuation (`base_v1_v2...`).
Large parameter products stay symbolic and are matched lazily; small ones
pre-expand.  Every diagnostic carries a source position.
"""

from __future__ import annotations

import itertools

from . import lang
from .bigraph import Bigraph, Control, close, ion, merge_all, nest, parallel_all, site
from .params import Arith, Term, Var
from .rules import Model, RuleEntry, RuleFamily

EAGER_LIMIT = 512  # expanded-instance budget per rules-list entry


class ElabError(Exception):
    def __init__(self, msg: str, pos=(0, 0)):
        super().__init__(f"{pos[0]}:{pos[1]}: {msg}")
        self.pos = pos


def _fold(term: Term) -> Term:
    if isinstance(term, Arith):
        left, right = _fold(term.left), _fold(term.right)
        if isinstance(left, int) and isinstance(right, int):
            return {"+": left + right, "-": left - right, "*": left * right}[term.op]
        return Arith(term.op, left, right)
    return term


class _Elaborator:
    def __init__(self, ast):
        self.ast = ast
        self.controls: dict[str, Control] = {}
        self.bigs = {}
        self.reacts = {}
        self.families: dict[str, RuleFamily] = {}

    def run(self, eager_limit: int = EAGER_LIMIT, name: str = "model") -> Model:
        for c in self.ast.controls:
            if c.name in self.controls:
                raise ElabError(f"control {c.name} declared twice", c.pos)
            if len(c.params) > 1:
                raise ElabError(f"control {c.name}: at most one integer parameter", c.pos)
            self.controls[c.name] = Control(
                c.name, c.arity, atomic=c.atomic, parameterised=bool(c.params)
            )
        for b in self.ast.bigs:
            if b.name in self.bigs:
                raise ElabError(f"big {b.name} declared twice", b.pos)
            self.bigs[b.name] = b
            self.check_expr(b.body, set(b.params))
        for r in self.ast.reacts:
            if r.name in self.reacts:
                raise ElabError(f"react {r.name} declared twice", r.pos)
            self.reacts[r.name] = r
            self.check_expr(r.redex, set(r.params))
            self.check_expr(r.reactum, set(r.params))
            if r.condition is not None:
                self.check_expr(r.condition, set())

        abrs = self.ast.abrs
        if abrs is None:
            raise ElabError("no abrs block")
        ints: dict[str, tuple[int, ...]] = {}
        for d in abrs.ints:
            if d.name in ints:
                raise ElabError(f"int {d.name} bound twice", d.pos)
            if not d.values:
                raise ElabError(f"int {d.name} is empty", d.pos)
            ints[d.name] = d.values

        if abrs.init_name not in self.bigs:
            raise ElabError(f"init references undefined big {abrs.init_name!r}", abrs.pos)
        init_decl = self.bigs[abrs.init_name]
        if init_decl.params:
            raise ElabError(f"init bigraph {abrs.init_name} must not be parameterised", init_decl.pos)
        init = self.eval_big(init_decl.body, {}, symbolic=False)
        if not init.is_ground():
            raise ElabError(f"initial bigraph {abrs.init_name} is not ground", init_decl.pos)

        classes: list[list[RuleEntry]] = []
        used_reacts: set[str] = set()
        for cls in abrs.classes:
            entries: list[RuleEntry] = []
            for ref in cls:
                entries.append(self.rule_entry(ref, ints, eager_limit))
                used_reacts.add(ref.name)
            classes.append(entries)
        for rname, decl in self.reacts.items():
            if rname not in used_reacts:
                raise ElabError(f"rule {rname} is in no priority class", decl.pos)

        actions: list[tuple[str, tuple[str, ...]]] = []
        for a in abrs.actions:
            for rname in a.rules:
                if rname not in self.reacts:
                    raise ElabError(f"action {a.name} references undefined rule {rname}", a.pos)
            actions.append((a.name, a.rules))

        predicates: list[tuple[str, Bigraph]] = []
        seen_preds: set[str] = set()
        for ref in abrs.preds:
            for pname, body in self.pred_instances(ref, ints):
                if pname in seen_preds:
                    raise ElabError(f"predicate {pname} defined twice", ref.pos)
                seen_preds.add(pname)
                predicates.append((pname, body))

        try:
            return Model(
                controls=self.controls,
                classes=classes,
                actions=actions,
                predicates=predicates,
                init=init,
                name=name,
            )
        except ValueError as exc:
            raise ElabError(str(exc), abrs.pos) from exc

    # -- rule machinery ------------------------------------------------------

    def family(self, name: str) -> RuleFamily:
        if name in self.families:
            return self.families[name]
        decl = self.reacts[name]
        env = {p: Var(p) for p in decl.params}
        redex = self.eval_big(decl.redex, env, symbolic=True)
        for _ctrl, param in redex.nodes:
            if isinstance(param, Arith):
                raise ElabError(
                    f"rule {name}: parameter arithmetic is only allowed in reactums", decl.pos
                )
        reactum = self.eval_big(decl.reactum, env, symbolic=True)
        condition = None
        if decl.condition is not None:
            condition = self.eval_big(decl.condition, {}, symbolic=False)
        try:
            fam = RuleFamily(
                base=name,
                formal=decl.params,
                redex=redex,
                reactum=reactum,
                weight=decl.weight,
                condition=condition,
            )
        except ValueError as exc:
            raise ElabError(f"rule {name}: {exc}", decl.pos) from exc
        self.families[name] = fam
        return fam

    def rule_entry(self, ref, ints, eager_limit: int) -> RuleEntry:
        if ref.name not in self.reacts:
            raise ElabError(f"undefined rule {ref.name!r}", ref.pos)
        fam = self.family(ref.name)
        if len(ref.args) != len(fam.formal):
            raise ElabError(
                f"rule {ref.name} takes {len(fam.formal)} argument(s), got {len(ref.args)}",
                ref.pos,
            )
        domains = []
        size = 1
        for arg in ref.args:
            if isinstance(arg, int):
                domains.append((arg,))
            else:
                if arg not in ints:
                    raise ElabError(f"undefined int set {arg!r} in rule reference", ref.pos)
                domains.append(ints[arg])
            size *= len(domains[-1])
        return RuleEntry(fam, tuple(domains), eager=size <= eager_limit)

    def pred_instances(self, ref, ints):
        if ref.name not in self.bigs:
            raise ElabError(f"undefined predicate big {ref.name!r}", ref.pos)
        decl = self.bigs[ref.name]
        if len(ref.args) != len(decl.params):
            raise ElabError(
                f"predicate {ref.name} takes {len(decl.params)} argument(s), got {len(ref.args)}",
                ref.pos,
            )
        axes = []
        for arg in ref.args:
            if isinstance(arg, int):
                axes.append((arg,))
            elif arg in ints:
                axes.append(ints[arg])
            else:
                raise ElabError(f"undefined int set {arg!r} in predicate reference", ref.pos)
        for combo in itertools.product(*axes):
            env = dict(zip(decl.params, combo))
            name = ref.name if not combo else ref.name + "_" + "_".join(str(v) for v in combo)
            yield name, self.eval_big(decl.body, env, symbolic=False)

    # -- bigraph expression evaluation ----------------------------------------

    def check_expr(self, e, params: set[str]):
        """Structural pass over a declaration body: every control resolves,
        name counts match arities, parameters are declared formals."""
        if isinstance(e, lang.EIon):
            if e.ctrl not in self.controls:
                raise ElabError(f"unknown control {e.ctrl!r}", e.pos)
            ctrl = self.controls[e.ctrl]
            if len(e.names) != ctrl.arity:
                raise ElabError(
                    f"{e.ctrl}: {len(e.names)} link name(s), arity is {ctrl.arity}", e.pos
                )
            if ctrl.parameterised and e.param is None:
                raise ElabError(f"{e.ctrl} requires an integer parameter", e.pos)
            if not ctrl.parameterised and e.param is not None:
                raise ElabError(f"{e.ctrl} takes no parameter", e.pos)
            if e.param is not None:
                self.check_iexpr(e.param, params)
        elif isinstance(e, lang.ENest):
            self.check_expr(e.head, params)
            self.check_expr(e.child, params)
        elif isinstance(e, (lang.EMerge, lang.EPar)):
            for p in e.parts:
                self.check_expr(p, params)
        elif isinstance(e, lang.EClose):
            self.check_expr(e.body, params)

    def check_iexpr(self, e, params: set[str]):
        if isinstance(e, lang.IVar):
            if e.name not in params:
                raise ElabError(f"undefined parameter {e.name!r}", e.pos)
        elif isinstance(e, lang.IBin):
            self.check_iexpr(e.left, params)
            self.check_iexpr(e.right, params)

    def eval_iexpr(self, e, env) -> Term:
        if isinstance(e, int):
            return e
        if isinstance(e, lang.IVar):
            if e.name not in env:
                raise ElabError(f"undefined parameter {e.name!r}", e.pos)
            return env[e.name]
        left = self.eval_iexpr(e.left, env)
        right = self.eval_iexpr(e.right, env)
        return _fold(Arith(e.op, left, right))

    def eval_big(self, e, env, symbolic: bool) -> Bigraph:
        if isinstance(e, lang.EId):
            return site()
        if isinstance(e, lang.EIon):
            return self.eval_ion(e, env, symbolic)
        if isinstance(e, lang.ENest):
            outer = self.eval_ion(e.head, env, symbolic)
            inner = self.eval_big(e.child, env, symbolic)
            try:
                return nest(outer, inner)
            except ValueError as exc:
                raise ElabError(str(exc), e.pos) from exc
        if isinstance(e, lang.EMerge):
            return merge_all([self.eval_big(p, env, symbolic) for p in e.parts])
        if isinstance(e, lang.EPar):
            return parallel_all([self.eval_big(p, env, symbolic) for p in e.parts])
        if isinstance(e, lang.EClose):
            return close(e.name, self.eval_big(e.body, env, symbolic))
        raise TypeError(e)

    def eval_ion(self, e, env, symbolic: bool) -> Bigraph:
        if e.ctrl not in self.controls:
            raise ElabError(f"unknown control {e.ctrl!r}", e.pos)
        ctrl = self.controls[e.ctrl]
        param = None
        if e.param is not None:
            param = self.eval_iexpr(e.param, env)
            if not symbolic and not isinstance(param, int):
                raise ElabError(f"parameter of {e.ctrl} must be a concrete integer here", e.pos)
        try:
            return ion(ctrl, e.names, param=param)
        except ValueError as exc:
            raise ElabError(str(exc), e.pos) from exc


def elaborate(ast, eager_limit: int = EAGER_LIMIT, name: str = "model") -> Model:
    """Turn an AST into a Model; raises ElabError with a source position."""
    return _Elaborator(ast).run(eager_limit=eager_limit, name=name)


def load_model(path, eager_limit: int = EAGER_LIMIT) -> Model:
    import os

    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    ast = lang.parse(text)
    name = os.path.splitext(os.path.basename(path))[0]
    return elaborate(ast, eager_limit=eager_limit, name=name)
