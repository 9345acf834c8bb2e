"""Integer parameter terms used in rule templates.

A concrete entity parameter is a plain ``int``.  Rule families keep symbolic
terms instead: a :class:`Var` bound at match time, or an :class:`Arith`
expression (reactum side only) evaluated once the variables are bound.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Arith:
    op: str  # one of + - *
    left: "Term"
    right: "Term"

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


Term = int | Var | Arith

_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
}


def term_eval(term: Term, env: dict[str, int]) -> int:
    """Evaluate a term under a variable valuation."""
    if isinstance(term, int):
        return term
    if isinstance(term, Var):
        if term.name not in env:
            raise KeyError(f"unbound parameter {term.name!r}")
        return env[term.name]
    return _OPS[term.op](term_eval(term.left, env), term_eval(term.right, env))


def term_vars(term: Term) -> set[str]:
    if isinstance(term, int):
        return set()
    if isinstance(term, Var):
        return {term.name}
    return term_vars(term.left) | term_vars(term.right)


def is_concrete(term: Term | None) -> bool:
    return term is None or isinstance(term, int)
