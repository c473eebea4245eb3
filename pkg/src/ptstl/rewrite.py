"""Rewriting into shift normal form, negation normal form and clause form.

The pipeline mirrors the controllability argument for cause formulas:

1. ``to_x_normal_form`` expands every temporal window into a chain of
   ``X^d`` shifts and pushes the shifts through ``&&`` and ``||`` until they
   sit directly above atoms.
2. ``push_negations`` moves ``!`` down to the literals.
3. ``to_cnf`` distributes ``||`` over ``&&`` and tags each clause that only
   depends on control inputs.

Every step is exact under the boundary rule of the evaluator (anything
evaluated before time 0 is false).  That rule breaks the textbook identities
``X^n !p == !X^n p``, so two extra literal forms appear: the *guard*
``X^n T`` ("at least n steps of history") and its negation ``!(X^n T)``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BudgetError
from .formula import (
    ATOMS,
    And,
    CtrlEQ,
    Formula,
    Historically,
    Not,
    Or,
    Previously,
    Shift,
    Since,
    TrueConst,
    canonical_key,
    shift,
    walk,
)

DEFAULT_NODE_BUDGET = 10**6


class _Counter:
    def __init__(self, budget):
        self.budget = budget
        self.used = 0

    def charge(self, k=1):
        self.used += k
        if self.used > self.budget:
            raise BudgetError(f"rewrite exceeded the node budget of {self.budget}")


def _balanced(op, parts):
    # balanced trees keep recursion depth logarithmic for long window chains
    if len(parts) == 1:
        return parts[0]
    mid = len(parts) // 2
    return op(_balanced(op, parts[:mid]), _balanced(op, parts[mid:]))


def to_x_normal_form(phi: Formula, budget: int = DEFAULT_NODE_BUDGET) -> Formula:
    """Eliminate ``S``, ``P`` and ``H`` in favour of shifted atoms.

    ``H[a,b] p`` becomes ``X^b p && ... && X^a p``, ``P[a,b]`` the same with
    ``||``, and ``p S[a,b] q`` becomes the disjunction over ``d = b..a`` of
    ``X^d q && X^b p && ... && X^d p``.  A shift above a negation is
    rewritten as ``!(X^n p) && X^n T``.
    """
    counter = _Counter(budget)

    def at(node, n):
        # returns a formula equivalent to X^n node
        counter.charge()
        if isinstance(node, (TrueConst,) + ATOMS):
            return shift(n, node)
        if isinstance(node, Shift):
            return at(node.arg, n + node.n)
        if isinstance(node, Not):
            inner = Not(at(node.arg, n))
            return inner if n == 0 else And(inner, Shift(n, TrueConst()))
        if isinstance(node, (And, Or)):
            return type(node)(at(node.left, n), at(node.right, n))
        a, b = node.a, node.b
        counter.charge(a - b + 1)
        if isinstance(node, Previously):
            return _balanced(Or, [at(node.arg, n + d) for d in range(b, a + 1)])
        if isinstance(node, Historically):
            return _balanced(And, [at(node.arg, n + d) for d in range(b, a + 1)])
        if isinstance(node, Since):
            counter.charge((a - b + 1) * (a - b + 2) // 2)
            terms = []
            for d in range(b, a + 1):
                hold = [at(node.left, n + e) for e in range(b, d + 1)]
                terms.append(And(at(node.right, n + d), _balanced(And, hold)))
            return _balanced(Or, terms)
        raise TypeError(f"cannot normalize {node!r}")

    return at(phi, 0)


def is_guard(lit: Formula) -> bool:
    """True for ``X^n T`` and ``!(X^n T)``."""
    if isinstance(lit, Not):
        lit = lit.arg
    return isinstance(lit, Shift) and isinstance(lit.arg, TrueConst)


def push_negations(phi: Formula) -> Formula:
    """Negation normal form.

    ``!`` ends up directly above atoms, except for the guard ``!(X^n T)``
    which ``!(X^n p) == X^n !p || !(X^n T)`` introduces.
    """

    def nnf(node, neg):
        if isinstance(node, (TrueConst,) + ATOMS):
            return Not(node) if neg else node
        if isinstance(node, Not):
            return nnf(node.arg, not neg)
        if isinstance(node, (And, Or)):
            op = type(node)
            if neg:
                op = Or if op is And else And
            return op(nnf(node.left, neg), nnf(node.right, neg))
        if isinstance(node, Shift):
            if not neg:
                return Shift(node.n, nnf(node.arg, False))
            guard = Not(Shift(node.n, TrueConst()))
            if isinstance(node.arg, TrueConst):
                return guard
            return Or(Shift(node.n, nnf(node.arg, True)), guard)
        raise ValueError(f"push_negations expects X-normal form, found {type(node).__name__}")

    return nnf(phi, False)


def _mentions_state(lit: Formula) -> bool:
    return any(isinstance(n, ATOMS) and not isinstance(n, CtrlEQ) for n in walk(lit))


@dataclass(frozen=True)
class Clause:
    """A disjunction of literals.

    ``pure_control`` holds when no literal mentions a state variable, i.e. the
    clause's truth is fixed by control inputs (and guards) alone.
    """

    literals: tuple
    pure_control: bool

    def to_formula(self) -> Formula:
        if not self.literals:
            return Not(TrueConst())
        return _balanced(Or, list(self.literals))


def _is_true(lit):
    return isinstance(lit, TrueConst)


def _is_false(lit):
    return isinstance(lit, Not) and isinstance(lit.arg, TrueConst)


def _clean(lits: dict):
    """Drop false literals; ``None`` for a tautological clause."""
    out = {}
    for k, l in lits.items():
        if _is_true(l):
            return None
        if not _is_false(l):
            out[k] = l
    for l in out.values():
        if not isinstance(l, Not) and canonical_key(Not(l)) in out:
            return None
    return out


_SUBSUMPTION_LIMIT = 4000


def _reduce(clauses: list) -> list:
    """Deduplicate and, for moderate sizes, remove subsumed clauses."""
    uniq = {}
    for c in clauses:
        uniq.setdefault(frozenset(c), c)
    if len(uniq) > _SUBSUMPTION_LIMIT:
        return list(uniq.values())
    keys = sorted(uniq, key=len)
    kept = []
    for k in keys:
        if not any(s <= k for s in kept):
            kept.append(k)
    order = {k: i for i, k in enumerate(uniq)}
    return [uniq[k] for k in sorted(kept, key=order.__getitem__)]


def to_cnf(phi: Formula, budget: int = DEFAULT_NODE_BUDGET) -> list:
    """Clause list whose conjunction is equivalent to ``phi``.

    ``phi`` must be in shift and negation normal form.  Tautological and
    subsumed clauses are dropped; an empty list means ``T``, an empty clause
    means false.
    """
    counter = _Counter(budget)

    def cnf(node):
        if isinstance(node, And):
            return _reduce(cnf(node.left) + cnf(node.right))
        if isinstance(node, Or):
            left, right = cnf(node.left), cnf(node.right)
            counter.charge(len(left) * len(right))
            out = []
            for a in left:
                for b in right:
                    c = _clean({**a, **b})
                    if c is not None:
                        out.append(c)
            return _reduce(out)
        if isinstance(node, (Since, Previously, Historically)):
            raise ValueError("to_cnf expects X-normal form")
        counter.charge()
        c = _clean({canonical_key(node): node})
        return [] if c is None else [c]

    clauses = []
    for lits in cnf(phi):
        ordered = tuple(lits[k] for k in sorted(lits))
        clauses.append(Clause(ordered, not any(_mentions_state(l) for l in ordered)))
    return clauses


def cnf_formula(clauses) -> Formula:
    if not clauses:
        return TrueConst()
    return _balanced(And, [c.to_formula() for c in clauses])


def normalize(phi: Formula, budget: int = DEFAULT_NODE_BUDGET) -> list:
    """Full pipeline: shift normal form, negation normal form, clauses."""
    return to_cnf(push_negations(to_x_normal_form(phi, budget)), budget)
