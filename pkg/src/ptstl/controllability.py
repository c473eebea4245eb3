"""Controllability of pure-control formulas by exhaustive search.

A pure-control formula is controllable when some choice of control values
over its horizon makes it false.  The search walks every assignment of the
inputs the formula mentions, over lags ``0..H``, in lexicographic order
(lag 0 most significant, inputs by index) and stops at the first falsifying
one.  Assignments are decoded and evaluated in vectorized chunks.

A cause ``phi_u && phi_xu`` with a controllable ``phi_u`` is controllable
too: the same witness falsifies the conjunction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BudgetError, ValidationError
from .formula import (
    PURE_CONTROL,
    And,
    CtrlEQ,
    Formula,
    Historically,
    Not,
    Or,
    Previously,
    Shift,
    Since,
    SystemSignature,
    TrueConst,
    classify,
    conjoin,
    disjoin,
    flatten,
    map_formula,
    walk,
)
from .monitor import Trace, signal
from .rewrite import cnf_formula, normalize

DEFAULT_SEARCH_CAP = 2**20
_CHUNK = 4096


@dataclass(frozen=True)
class ControlAssignment:
    """``values[d][i]`` is the value of input ``i`` at time ``k - d``."""

    values: tuple

    @property
    def horizon(self):
        return len(self.values) - 1

    def controls(self) -> np.ndarray:
        """Control rows in time order, oldest first (row ``H`` is time ``k``)."""
        return np.array(self.values[::-1], dtype=float).reshape(len(self.values), -1)

    def as_trace(self, states=None) -> Trace:
        ctrl = self.controls()
        if states is None:
            states = np.zeros((len(ctrl), 0))
        return Trace(states, ctrl)

    def describe(self, inputs=None) -> str:
        """``u1=0`` style text; lags other than 0 are written ``u1@k-2=0``."""
        from .parser import format_number

        parts = []
        for d, row in enumerate(self.values):
            for i, v in enumerate(row):
                if inputs is not None and i not in inputs:
                    continue
                where = "" if d == 0 else f"@k-{d}"
                parts.append(f"u{i}{where}={format_number(v)}")
        return ", ".join(parts)


@dataclass(frozen=True)
class ControllabilityVerdict:
    controllable: bool
    witness: Optional[ControlAssignment]
    search_size: int
    horizon: int = 0
    inputs: tuple = ()

    def describe(self) -> str:
        if not self.controllable:
            return "not controllable"
        return f"controllable, witness {self.witness.describe(set(self.inputs))}"


def horizon(phi: Formula) -> int:
    """Deepest time lag ``phi`` looks back, i.e. the largest shift after X-normalization."""
    if isinstance(phi, Shift):
        return phi.n + horizon(phi.arg)
    if isinstance(phi, (Previously, Historically)):
        return phi.a + horizon(phi.arg)
    if isinstance(phi, Since):
        return phi.a + max(horizon(phi.left), horizon(phi.right))
    if isinstance(phi, Not):
        return horizon(phi.arg)
    if isinstance(phi, (And, Or)):
        return max(horizon(phi.left), horizon(phi.right))
    return 0


def _control_inputs(phi):
    return tuple(sorted({n.var for n in walk(phi) if isinstance(n, CtrlEQ)}))


def _exhaustive(phi, sig, cap, state_fill=None):
    h = horizon(phi)
    inputs = _control_inputs(phi)
    for i in inputs:
        if i >= sig.m:
            raise ValidationError(f"formula mentions u{i} but the system has {sig.m} inputs")
    doms = [np.asarray(d, dtype=float) for d in sig.control_domains]
    # positions in significance order: lag 0 first, then inputs by index
    positions = [(d, i) for d in range(h + 1) for i in inputs]
    radices = [len(doms[i]) for _, i in positions]
    total = math.prod(radices)
    if total > cap:
        raise BudgetError(
            f"controllability search needs {total} assignments, cap is {cap}"
        )
    t = h + 1
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        b = len(idx)
        us = []
        for i in range(sig.m):
            us.append(np.full((b, t), doms[i][0]))
        rem = idx.copy()
        for (d, i), r in zip(reversed(positions), reversed(radices)):
            us[i][:, h - d] = doms[i][rem % r]
            rem //= r
        if state_fill is None:
            xs = [np.zeros((1, t))] * sig.n
        else:
            fill = np.asarray(state_fill, dtype=float).reshape(t, sig.n)
            xs = [fill[:, j][None, :] for j in range(sig.n)]
        sat = signal(phi, xs, us, (b, t))[:, h]
        if not sat.all():
            hit = int(np.argmin(sat))
            values = tuple(
                tuple(float(us[i][hit, h - d]) for i in range(sig.m)) for d in range(t)
            )
            return ControllabilityVerdict(
                True, ControlAssignment(values), start + hit + 1, h, inputs
            )
    return ControllabilityVerdict(False, None, total, h, inputs)


def is_controllable_pure(
    phi: Formula, sig: SystemSignature, cap: int = DEFAULT_SEARCH_CAP, state_fill=None
) -> ControllabilityVerdict:
    """Exhaustive falsifiability check of a pure-control formula at ``k = H``.

    ``state_fill`` optionally supplies the ``(H+1, n)`` state rows of the
    synthetic trace; they cannot influence the verdict.
    """
    if classify(phi) != PURE_CONTROL:
        raise ValidationError("is_controllable_pure needs a formula over control inputs only")
    return _exhaustive(phi, sig, cap, state_fill)


def is_controllable_cause(
    phi_u: Formula, phi_xu: Formula, sig: SystemSignature, cap: int = DEFAULT_SEARCH_CAP
) -> ControllabilityVerdict:
    """Sufficient test for ``phi_u && phi_xu``: the verdict on ``phi_u``."""
    return is_controllable_pure(phi_u, sig, cap)


def expand_ctrl_negation(phi: Formula, sig: SystemSignature) -> Formula:
    """Replace each ``!(u_i == c)`` by the disjunction of the other domain values."""

    def expand(node):
        if isinstance(node, Not) and isinstance(node.arg, CtrlEQ):
            atom = node.arg
            dom = sig.control_domains[atom.var]
            if atom.value not in dom:
                return TrueConst()
            return disjoin([CtrlEQ(atom.var, c) for c in dom if c != atom.value])
        return node

    return map_formula(phi, expand)


@dataclass(frozen=True)
class CauseCheck:
    """Outcome of certifying an arbitrary formula as a controllable cause."""

    verdict: ControllabilityVerdict
    phi_u: Optional[Formula]
    phi_xu: Optional[Formula]
    route: str


def check_formula(phi: Formula, sig: SystemSignature, cap: int = DEFAULT_SEARCH_CAP) -> CauseCheck:
    """Certify ``phi`` through its pure-control part.

    Tried in order: ``phi`` itself when pure-control; the pure-control
    top-level conjuncts; the pure-control clauses of its clause form.  A
    formula with no pure-control part gets a negative verdict, meaning
    "not certified" rather than "proved uncontrollable".
    """
    if classify(phi) == PURE_CONTROL:
        return CauseCheck(is_controllable_pure(phi, sig, cap), phi, TrueConst(), "pure-control")
    conjuncts = flatten(phi, And)
    pure = [c for c in conjuncts if classify(c) == PURE_CONTROL]
    if pure:
        rest = [c for c in conjuncts if classify(c) != PURE_CONTROL]
        phi_u, phi_xu = conjoin(pure), conjoin(rest)
        return CauseCheck(is_controllable_cause(phi_u, phi_xu, sig, cap), phi_u, phi_xu, "conjunct")
    clauses = normalize(phi)
    ctrl = [c for c in clauses if c.pure_control]
    if not ctrl:
        return CauseCheck(ControllabilityVerdict(False, None, 0), None, None, "none")
    phi_u = expand_ctrl_negation(cnf_formula(ctrl), sig)
    phi_xu = cnf_formula([c for c in clauses if not c.pure_control])
    return CauseCheck(_exhaustive(phi_u, sig, cap), phi_u, phi_xu, "clause")
