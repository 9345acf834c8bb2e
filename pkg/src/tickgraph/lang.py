"""The `.big` modelling language: lexer, AST and parser.

Controls, bigraph definitions, weighted reaction rules (optionally with a
negative context condition) and one `begin abrs ... end` block with integer
set bindings, the initial bigraph, ordered priority classes, the action map
and the predicate set.  Bigraph expressions use ion `K(e){a,b}`, nesting `.`
(tightest), merge `|`, parallel `||` (loosest), prefix closure `/x` scoping
rightward, `id` for a site, and parentheses.  `#` starts a comment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

KEYWORDS = {
    "atomic", "fun", "ctrl", "react", "big", "begin", "end", "abrs",
    "int", "init", "rules", "actions", "preds", "if", "in", "ctx", "id",
}

_PUNCT = ("||", "-[", "]->", "{", "}", "(", ")", "[", "]", "=", ";", ",", ".",
          "|", "/", "+", "-", "*", "!")


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int, expected: tuple[str, ...] = ()):
        loc = f"{line}:{col}"
        hint = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{loc}: {msg}{hint}")
        self.line = line
        self.col = col
        self.expected = expected


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT KEYWORD INT FLOAT PUNCT EOF
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            kind = "INT"
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                kind = "FLOAT"
            toks.append(Token(kind, text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(Token("KEYWORD" if word in KEYWORDS else "IDENT", word, line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(Token("PUNCT", p, line, col))
                col += len(p)
                i += len(p)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# AST

Pos = tuple[int, int]


def _pos_field() -> Pos:
    return (0, 0)


@dataclass(frozen=True)
class IVar:
    name: str
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class IBin:
    op: str
    left: "IExpr"
    right: "IExpr"
    pos: Pos = field(default_factory=_pos_field, compare=False)


IExpr = int | IVar | IBin


@dataclass(frozen=True)
class EId:
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class EIon:
    ctrl: str
    param: IExpr | None
    names: tuple[str, ...]
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class ENest:
    head: EIon
    child: "BExpr"
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class EMerge:
    parts: tuple["BExpr", ...]
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class EPar:
    parts: tuple["BExpr", ...]
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class EClose:
    name: str
    body: "BExpr"
    pos: Pos = field(default_factory=_pos_field, compare=False)


BExpr = EId | EIon | ENest | EMerge | EPar | EClose


@dataclass(frozen=True)
class CtrlDecl:
    name: str
    params: tuple[str, ...]
    arity: int
    atomic: bool
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class BigDecl:
    name: str
    params: tuple[str, ...]
    body: BExpr
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class ReactDecl:
    name: str
    params: tuple[str, ...]
    redex: BExpr
    weight: float
    reactum: BExpr
    condition: BExpr | None
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class IntDecl:
    name: str
    values: tuple[int, ...]
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class RuleRef:
    name: str
    args: tuple["int | str", ...]
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class ActionDecl:
    name: str
    rules: tuple[str, ...]
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class AbrsBlock:
    ints: tuple[IntDecl, ...]
    init_name: str
    classes: tuple[tuple[RuleRef, ...], ...]
    actions: tuple[ActionDecl, ...]
    preds: tuple[RuleRef, ...]
    pos: Pos = field(default_factory=_pos_field, compare=False)


@dataclass(frozen=True)
class Ast:
    controls: tuple[CtrlDecl, ...]
    bigs: tuple[BigDecl, ...]
    reacts: tuple[ReactDecl, ...]
    abrs: AbrsBlock | None


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        return self.cur.text == text and self.cur.kind in ("PUNCT", "KEYWORD")

    def bump(self) -> Token:
        tok = self.cur
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"found {self.cur.text!r}", (text,))
        return self.bump()

    def ident(self, what="identifier") -> Token:
        if self.cur.kind != "IDENT":
            self.fail(f"found {self.cur.text or 'end of input'!r}", (what,))
        return self.bump()

    def fail(self, msg: str, expected: tuple[str, ...] = ()):
        raise ParseError(msg, self.cur.line, self.cur.col, expected)

    # -- declarations -------------------------------------------------------

    def program(self) -> Ast:
        controls: list[CtrlDecl] = []
        bigs: list[BigDecl] = []
        reacts: list[ReactDecl] = []
        abrs: AbrsBlock | None = None
        while self.cur.kind != "EOF":
            tok = self.cur
            atomic = False
            funny = False
            if self.at("atomic"):
                atomic = True
                self.bump()
            if self.at("fun"):
                funny = True
                self.bump()
            if self.at("ctrl"):
                controls.append(self.ctrl_decl(atomic, funny, (tok.line, tok.col)))
            elif self.at("big"):
                if atomic:
                    self.fail("'atomic' only applies to controls")
                bigs.append(self.big_decl(funny, (tok.line, tok.col)))
            elif self.at("react"):
                if atomic:
                    self.fail("'atomic' only applies to controls")
                reacts.append(self.react_decl(funny, (tok.line, tok.col)))
            elif self.at("begin"):
                if atomic or funny:
                    self.fail("unexpected modifier before 'begin'")
                if abrs is not None:
                    self.fail("duplicate abrs block")
                abrs = self.abrs_block()
            else:
                self.fail(
                    f"found {self.cur.text!r}",
                    ("ctrl", "big", "react", "begin abrs"),
                )
        return Ast(tuple(controls), tuple(bigs), tuple(reacts), abrs)

    def _formals(self) -> tuple[str, ...]:
        if not self.at("("):
            return ()
        self.bump()
        names = [self.ident("parameter name").text]
        while self.at(","):
            self.bump()
            names.append(self.ident("parameter name").text)
        self.expect(")")
        return tuple(names)

    def ctrl_decl(self, atomic: bool, funny: bool, pos: Pos) -> CtrlDecl:
        self.expect("ctrl")
        name = self.ident("control name")
        params = self._formals()
        if funny and not params:
            self.fail(f"fun ctrl {name.text} needs a parameter list")
        if not funny and params:
            self.fail(f"ctrl {name.text} with parameters must be declared 'fun ctrl'")
        self.expect("=")
        if self.cur.kind != "INT":
            self.fail("arity must be an integer", ("integer",))
        arity = int(self.bump().text)
        self.expect(";")
        return CtrlDecl(name.text, params, arity, atomic, pos)

    def big_decl(self, funny: bool, pos: Pos) -> BigDecl:
        self.expect("big")
        name = self.ident("bigraph name")
        params = self._formals() if funny else ()
        self.expect("=")
        body = self.bexpr()
        self.expect(";")
        return BigDecl(name.text, params, body, pos)

    def react_decl(self, funny: bool, pos: Pos) -> ReactDecl:
        self.expect("react")
        name = self.ident("rule name")
        params = self._formals() if funny else ()
        self.expect("=")
        redex = self.bexpr()
        self.expect("-[")
        weight = self.number()
        self.expect("]->")
        reactum = self.bexpr()
        condition = None
        if self.at("if"):
            self.bump()
            self.expect("!")
            condition = self.bexpr()
            self.expect("in")
            self.expect("ctx")
        self.expect(";")
        return ReactDecl(name.text, params, redex, weight, reactum, condition, pos)

    def number(self) -> float:
        if self.cur.kind not in ("INT", "FLOAT"):
            self.fail("expected a numeric weight", ("number",))
        return float(self.bump().text)

    # -- abrs block ----------------------------------------------------------

    def abrs_block(self) -> AbrsBlock:
        pos = (self.cur.line, self.cur.col)
        self.expect("begin")
        self.expect("abrs")
        ints: list[IntDecl] = []
        init_name = None
        classes = None
        actions = None
        preds = None
        while not self.at("end"):
            if self.cur.kind == "EOF":
                self.fail("abrs block not closed", ("end",))
            if self.at("int"):
                ints.append(self.int_decl())
            elif self.at("init"):
                self.bump()
                init_name = self.ident("initial bigraph name").text
                self.expect(";")
            elif self.at("rules"):
                self.bump()
                self.expect("=")
                self.expect("[")
                classes = [self.rule_class()]
                while self.at(","):
                    self.bump()
                    classes.append(self.rule_class())
                self.expect("]")
                self.expect(";")
            elif self.at("actions"):
                self.bump()
                self.expect("=")
                self.expect("[")
                actions = [self.action_decl()]
                while self.at(","):
                    self.bump()
                    actions.append(self.action_decl())
                self.expect("]")
                self.expect(";")
            elif self.at("preds"):
                self.bump()
                self.expect("=")
                self.expect("{")
                preds = [self.rule_ref()]
                while self.at(","):
                    self.bump()
                    preds.append(self.rule_ref())
                self.expect("}")
                self.expect(";")
            else:
                self.fail(
                    f"found {self.cur.text!r}",
                    ("int", "init", "rules", "actions", "preds", "end"),
                )
        self.expect("end")
        if init_name is None:
            self.fail("abrs block has no init")
        if classes is None:
            self.fail("abrs block has no rules")
        if actions is None:
            self.fail("abrs block has no actions")
        return AbrsBlock(
            tuple(ints),
            init_name,
            tuple(tuple(c) for c in classes),
            tuple(actions),
            tuple(preds or ()),
            pos,
        )

    def int_decl(self) -> IntDecl:
        pos = (self.cur.line, self.cur.col)
        self.expect("int")
        name = self.ident("int binding name").text
        self.expect("=")
        values: list[int] = []
        if self.at("{"):
            self.bump()
            if not self.at("}"):
                values.append(self.int_lit())
                while self.at(","):
                    self.bump()
                    values.append(self.int_lit())
            self.expect("}")
        else:
            values.append(self.int_lit())
        self.expect(";")
        return IntDecl(name, tuple(values), pos)

    def int_lit(self) -> int:
        if self.cur.kind != "INT":
            self.fail("expected an integer", ("integer",))
        return int(self.bump().text)

    def rule_class(self) -> list[RuleRef]:
        self.expect("{")
        refs = [self.rule_ref()]
        while self.at(","):
            self.bump()
            refs.append(self.rule_ref())
        self.expect("}")
        return refs

    def rule_ref(self) -> RuleRef:
        tok = self.ident("rule name")
        args: list[int | str] = []
        if self.at("("):
            self.bump()
            args.append(self.ref_arg())
            while self.at(","):
                self.bump()
                args.append(self.ref_arg())
            self.expect(")")
        return RuleRef(tok.text, tuple(args), (tok.line, tok.col))

    def ref_arg(self) -> int | str:
        if self.cur.kind == "INT":
            return int(self.bump().text)
        return self.ident("int binding or literal").text

    def action_decl(self) -> ActionDecl:
        tok = self.ident("action name")
        self.expect("=")
        self.expect("{")
        rules = [self.ident("rule name").text]
        while self.at(","):
            self.bump()
            rules.append(self.ident("rule name").text)
        self.expect("}")
        return ActionDecl(tok.text, tuple(rules), (tok.line, tok.col))

    # -- bigraph expressions --------------------------------------------------
    # bexpr := ('/' name)* par ; par := mer ('||' mer)* ; mer := prim ('|' prim)*
    # prim := 'id' | '(' bexpr ')' | ion ['.' prim]

    def bexpr(self) -> BExpr:
        if self.at("/"):
            pos = (self.cur.line, self.cur.col)
            self.bump()
            name = self.ident("link name").text
            return EClose(name, self.bexpr(), pos)
        return self.par()

    def par(self) -> BExpr:
        pos = (self.cur.line, self.cur.col)
        parts = [self.mer()]
        while self.at("||"):
            self.bump()
            parts.append(self.mer())
        return parts[0] if len(parts) == 1 else EPar(tuple(parts), pos)

    def mer(self) -> BExpr:
        pos = (self.cur.line, self.cur.col)
        parts = [self.prim()]
        while self.at("|"):
            self.bump()
            parts.append(self.prim())
        return parts[0] if len(parts) == 1 else EMerge(tuple(parts), pos)

    def prim(self) -> BExpr:
        if self.at("id"):
            tok = self.bump()
            return EId((tok.line, tok.col))
        if self.at("("):
            self.bump()
            inner = self.bexpr()
            self.expect(")")
            return inner
        ion = self.ion()
        if self.at("."):
            pos = (self.cur.line, self.cur.col)
            self.bump()
            return ENest(ion, self.prim(), pos)
        return ion

    def ion(self) -> EIon:
        tok = self.ident("control name")
        param = None
        if self.at("("):
            self.bump()
            param = self.iexpr()
            self.expect(")")
        names: tuple[str, ...] = ()
        if self.at("{"):
            self.bump()
            acc = [self.ident("link name").text]
            while self.at(","):
                self.bump()
                acc.append(self.ident("link name").text)
            self.expect("}")
            names = tuple(acc)
        return EIon(tok.text, param, names, (tok.line, tok.col))

    # -- integer expressions ---------------------------------------------------

    def iexpr(self) -> IExpr:
        left = self.iterm()
        while self.at("+") or self.at("-"):
            op = self.bump()
            left = IBin(op.text, left, self.iterm(), (op.line, op.col))
        return left

    def iterm(self) -> IExpr:
        left = self.ifactor()
        while self.at("*"):
            op = self.bump()
            left = IBin("*", left, self.ifactor(), (op.line, op.col))
        return left

    def ifactor(self) -> IExpr:
        if self.cur.kind == "INT":
            return int(self.bump().text)
        if self.cur.kind == "IDENT":
            tok = self.bump()
            return IVar(tok.text, (tok.line, tok.col))
        if self.at("("):
            self.bump()
            inner = self.iexpr()
            self.expect(")")
            return inner
        self.fail("expected an integer expression", ("integer", "parameter", "("))


def parse(text: str) -> Ast:
    """Parse a `.big` document into an AST with source positions."""
    return _Parser(tokenize(text)).program()


# ---------------------------------------------------------------------------
# pretty printer (round-trips through parse)


def _pp_iexpr(e: IExpr) -> str:
    if isinstance(e, int):
        return str(e)
    if isinstance(e, IVar):
        return e.name
    return f"({_pp_iexpr(e.left)} {e.op} {_pp_iexpr(e.right)})"


def _pp_bexpr(e: BExpr, level: int = 0) -> str:
    # level: 0 par, 1 merge, 2 primary
    if isinstance(e, EClose):
        s = f"/{e.name} {_pp_bexpr(e.body, 0)}"
        return f"({s})" if level > 0 else s
    if isinstance(e, EPar):
        s = " || ".join(_pp_bexpr(p, 1) for p in e.parts)
        return f"({s})" if level > 0 else s
    if isinstance(e, EMerge):
        s = " | ".join(_pp_bexpr(p, 2) for p in e.parts)
        return f"({s})" if level > 1 else s
    if isinstance(e, ENest):
        return f"{_pp_bexpr(e.head, 2)}.{_pp_bexpr(e.child, 3)}"
    if isinstance(e, EIon):
        s = e.ctrl
        if e.param is not None:
            s += f"({_pp_iexpr(e.param)})"
        if e.names:
            s += "{" + ",".join(e.names) + "}"
        return s
    if isinstance(e, EId):
        return "id"
    raise TypeError(e)


def _pp_ruleref(r: RuleRef) -> str:
    if not r.args:
        return r.name
    return f"{r.name}({', '.join(str(a) for a in r.args)})"


def pretty(ast: Ast) -> str:
    out: list[str] = []
    for c in ast.controls:
        head = "ctrl"
        if c.params:
            head = f"fun {head}"
        if c.atomic:
            head = f"atomic {head}"
        params = f"({', '.join(c.params)})" if c.params else ""
        out.append(f"{head} {c.name}{params} = {c.arity};")
    out.append("")
    for r in ast.reacts:
        head = "fun react" if r.params else "react"
        params = f"({', '.join(r.params)})" if r.params else ""
        w = f"{r.weight:g}"
        cond = f" if ! {_pp_bexpr(r.condition)} in ctx" if r.condition is not None else ""
        out.append(
            f"{head} {r.name}{params} = {_pp_bexpr(r.redex)} -[{w}]-> {_pp_bexpr(r.reactum)}{cond};"
        )
    out.append("")
    for b in ast.bigs:
        head = "fun big" if b.params else "big"
        params = f"({', '.join(b.params)})" if b.params else ""
        out.append(f"{head} {b.name}{params} = {_pp_bexpr(b.body)};")
    if ast.abrs is not None:
        a = ast.abrs
        out.append("")
        out.append("begin abrs")
        for d in a.ints:
            out.append(f"  int {d.name} = {{{','.join(str(v) for v in d.values)}}};")
        out.append(f"  init {a.init_name};")
        cls = ",\n".join(
            "    {" + ", ".join(_pp_ruleref(r) for r in c) + "}" for c in a.classes
        )
        out.append("  rules = [\n" + cls + "\n  ];")
        acts = ",\n".join(
            f"    {d.name} = {{{', '.join(d.rules)}}}" for d in a.actions
        )
        out.append("  actions = [\n" + acts + "\n  ];")
        if a.preds:
            out.append(
                "  preds = {" + ", ".join(_pp_ruleref(r) for r in a.preds) + "};"
            )
        out.append("end")
    return "\n".join(out) + "\n"
