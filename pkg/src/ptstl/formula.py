"""Abstract syntax of past-time STL formulas and templates.

Formulas are immutable trees of frozen dataclasses.  A *template* is a formula
in which some thresholds, control values or temporal windows are ``Slot``
placeholders; ``substitute`` turns a template plus a valuation into a plain
formula.

Temporal windows are ``(a, b)`` pairs with ``a >= b >= 0`` and refer to the
past interval ``[k - a, k - b]`` of the evaluation instant ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Real
from typing import Iterator, Mapping, Sequence, Union

from .errors import ValidationError

THRESHOLD = "threshold"
CONTROL = "control"
WINDOW = "window"
SLOT_KINDS = (THRESHOLD, CONTROL, WINDOW)


@dataclass(frozen=True)
class Slot:
    """Named parameter placeholder inside a template."""

    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in SLOT_KINDS:
            raise ValueError(f"unknown slot kind {self.kind!r}")


class Formula:
    """Base class of all formula nodes."""

    __slots__ = ()

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def __str__(self):
        from .parser import to_text

        return to_text(self)


@dataclass(frozen=True)
class TrueConst(Formula):
    pass


@dataclass(frozen=True)
class StateLT(Formula):
    var: int
    threshold: Union[float, Slot]


@dataclass(frozen=True)
class StateGT(Formula):
    var: int
    threshold: Union[float, Slot]


@dataclass(frozen=True)
class CtrlEQ(Formula):
    var: int
    value: Union[float, Slot]


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


def _check_window(window):
    if isinstance(window, Slot):
        if window.kind != WINDOW:
            raise ValueError(f"slot {window.name} of kind {window.kind} used as a window")
        return window
    a, b = window
    if int(a) != a or int(b) != b:
        raise ValueError(f"window bounds must be integers, got {window!r}")
    a, b = int(a), int(b)
    if not a >= b >= 0:
        raise ValueError(f"window [{a},{b}] violates a >= b >= 0")
    return (a, b)


class _Temporal:
    """Shared accessors for nodes carrying a window."""

    __slots__ = ()

    @property
    def a(self) -> int:
        if isinstance(self.window, Slot):
            raise ValueError("window is an unfilled slot")
        return self.window[0]

    @property
    def b(self) -> int:
        if isinstance(self.window, Slot):
            raise ValueError("window is an unfilled slot")
        return self.window[1]


@dataclass(frozen=True)
class Since(_Temporal, Formula):
    left: Formula
    right: Formula
    window: Union[tuple, Slot]

    def __post_init__(self):
        object.__setattr__(self, "window", _check_window(self.window))


@dataclass(frozen=True)
class Previously(_Temporal, Formula):
    arg: Formula
    window: Union[tuple, Slot]

    def __post_init__(self):
        object.__setattr__(self, "window", _check_window(self.window))


@dataclass(frozen=True)
class Historically(_Temporal, Formula):
    arg: Formula
    window: Union[tuple, Slot]

    def __post_init__(self):
        object.__setattr__(self, "window", _check_window(self.window))


@dataclass(frozen=True)
class Shift(Formula):
    """``X^n arg``: the value of ``arg`` ``n`` steps earlier."""

    n: int
    arg: Formula

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"shift amount must be a natural number, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        inner = self.arg
        if isinstance(inner, Shift):
            object.__setattr__(self, "n", self.n + inner.n)
            object.__setattr__(self, "arg", inner.arg)


ATOMS = (StateLT, StateGT, CtrlEQ)
TEMPORAL = (Since, Previously, Historically)


def shift(n: int, phi: Formula) -> Formula:
    """``X^n phi``, with ``X^0 phi`` collapsed to ``phi``."""
    return phi if n == 0 else Shift(n, phi)


def children(phi: Formula) -> tuple:
    if isinstance(phi, (Not, Previously, Historically, Shift)):
        return (phi.arg,)
    if isinstance(phi, (And, Or, Since)):
        return (phi.left, phi.right)
    return ()


def walk(phi: Formula) -> Iterator[Formula]:
    """Pre-order traversal."""
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def size(phi: Formula) -> int:
    return sum(1 for _ in walk(phi))


def conjoin(parts: Sequence[Formula]) -> Formula:
    """Left-nested conjunction; the empty conjunction is ``TrueConst``."""
    if not parts:
        return TrueConst()
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disjoin(parts: Sequence[Formula]) -> Formula:
    """Left-nested disjunction; the empty disjunction is ``Not(TrueConst)``."""
    if not parts:
        return Not(TrueConst())
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def flatten(phi: Formula, op: type) -> list:
    """Operands of a nested chain of ``op`` (And or Or)."""
    if isinstance(phi, op):
        return flatten(phi.left, op) + flatten(phi.right, op)
    return [phi]


_COUNTED = (Not, And, Or, Since, Previously, Historically)


def op_count(phi: Formula) -> int:
    """Number of Boolean and temporal operators; shifts and atoms count 0."""
    return sum(1 for node in walk(phi) if isinstance(node, _COUNTED))


PURE_CONTROL = "pure-control"
MIXED = "mixed"
PURE_STATE = "pure-state"


def classify(phi: Formula) -> str:
    """Classify by the atoms a formula mentions.

    A formula with no atoms at all (e.g. ``TrueConst``) counts as pure-state:
    it mentions no control input.
    """
    kinds = {type(node) for node in walk(phi) if isinstance(node, ATOMS)}
    has_ctrl = CtrlEQ in kinds
    has_state = bool(kinds - {CtrlEQ})
    if has_ctrl and not has_state:
        return PURE_CONTROL
    if has_ctrl:
        return MIXED
    return PURE_STATE


def slots(phi: Formula) -> list:
    """Slots of a template in pre-order, each listed once."""
    seen = {}
    for node in walk(phi):
        if isinstance(node, (StateLT, StateGT)):
            val = node.threshold
        elif isinstance(node, CtrlEQ):
            val = node.value
        elif isinstance(node, TEMPORAL):
            val = node.window
        else:
            continue
        if isinstance(val, Slot):
            if val.name in seen and seen[val.name] != val:
                raise ValidationError(f"slot {val.name} reused with a different kind")
            seen.setdefault(val.name, val)
    return list(seen.values())


def is_template(phi: Formula) -> bool:
    return bool(slots(phi))


def slot_uses(phi: Formula) -> dict:
    """Map slot name to the atom or temporal node that owns it."""
    uses = {}
    for node in walk(phi):
        for attr in ("threshold", "value", "window"):
            val = getattr(node, attr, None)
            if isinstance(val, Slot):
                if val.name in uses:
                    raise ValidationError(f"slot {val.name} appears more than once")
                uses[val.name] = node
    return uses


def map_formula(phi: Formula, fn) -> Formula:
    """Rebuild bottom-up, applying ``fn`` to every rebuilt node."""
    if isinstance(phi, (Not, Previously, Historically, Shift)):
        arg = map_formula(phi.arg, fn)
        if isinstance(phi, Not):
            node = Not(arg)
        elif isinstance(phi, Shift):
            node = Shift(phi.n, arg)
        else:
            node = type(phi)(arg, phi.window)
    elif isinstance(phi, (And, Or)):
        node = type(phi)(map_formula(phi.left, fn), map_formula(phi.right, fn))
    elif isinstance(phi, Since):
        node = Since(map_formula(phi.left, fn), map_formula(phi.right, fn), phi.window)
    else:
        node = phi
    return fn(node)


@dataclass(frozen=True)
class SystemSignature:
    """Dimensions and finite control domains of a control system."""

    n: int
    m: int
    control_domains: tuple
    state_bounds: tuple = field(default=())

    def __post_init__(self):
        doms = tuple(tuple(d) for d in self.control_domains)
        if len(doms) != self.m:
            raise ValidationError(f"expected {self.m} control domains, got {len(doms)}")
        for i, d in enumerate(doms):
            if not d:
                raise ValidationError(f"control domain of u{i} is empty")
            if len(set(d)) != len(d):
                raise ValidationError(f"control domain of u{i} has duplicate values")
        object.__setattr__(self, "control_domains", doms)
        bounds = tuple(tuple(b) for b in self.state_bounds)
        if bounds and len(bounds) != self.n:
            raise ValidationError(f"expected {self.n} state bounds, got {len(bounds)}")
        for lo, hi in bounds:
            if lo > hi:
                raise ValidationError(f"state bound [{lo}, {hi}] is empty")
        object.__setattr__(self, "state_bounds", bounds)


def _check_value(slot: Slot, node: Formula, value, sig):
    if slot.kind == WINDOW:
        try:
            return _check_window(value)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"slot {slot.name}: {exc}") from None
    if not isinstance(value, Real):
        raise ValidationError(f"slot {slot.name}: expected a number, got {value!r}")
    if slot.kind == CONTROL and sig is not None:
        if value not in sig.control_domains[node.var]:
            raise ValidationError(
                f"slot {slot.name}: {value!r} is not in the domain of u{node.var}"
            )
    if slot.kind == THRESHOLD and sig is not None and sig.state_bounds:
        lo, hi = sig.state_bounds[node.var]
        if not lo <= value <= hi:
            raise ValidationError(
                f"slot {slot.name}: {value!r} outside the bounds of x{node.var}"
            )
    return value


def substitute(template: Formula, valuation: Mapping, sig: SystemSignature = None) -> Formula:
    """Fill every slot of ``template`` from ``valuation`` (slot name -> value).

    With a signature, control values must lie in their input's domain and
    thresholds within the state bounds (when bounds are declared).
    """
    uses = slot_uses(template)
    missing = sorted(set(uses) - set(valuation))
    if missing:
        raise ValidationError(f"no value for slot(s) {', '.join(missing)}")

    def fill(node):
        if isinstance(node, (StateLT, StateGT)) and isinstance(node.threshold, Slot):
            v = _check_value(node.threshold, node, valuation[node.threshold.name], sig)
            return type(node)(node.var, v)
        if isinstance(node, CtrlEQ) and isinstance(node.value, Slot):
            v = _check_value(node.value, node, valuation[node.value.name], sig)
            return CtrlEQ(node.var, v)
        if isinstance(node, TEMPORAL) and isinstance(node.window, Slot):
            w = _check_value(node.window, node, valuation[node.window.name], sig)
            if isinstance(node, Since):
                return Since(node.left, node.right, w)
            return type(node)(node.arg, w)
        return node

    return map_formula(template, fill)


def rename_slots(template: Formula, prefix: str = "c") -> Formula:
    """Give every slot occurrence a fresh name ``prefix0, prefix1, ...`` in pre-order."""
    counter = iter(range(10**9))

    def fresh(val):
        if isinstance(val, Slot):
            return Slot(f"{prefix}{next(counter)}", val.kind)
        return val

    def rebuild(node):
        if isinstance(node, (StateLT, StateGT)):
            return type(node)(node.var, fresh(node.threshold))
        if isinstance(node, CtrlEQ):
            return CtrlEQ(node.var, fresh(node.value))
        if isinstance(node, Since):
            w = fresh(node.window)
            return Since(rebuild(node.left), rebuild(node.right), w)
        if isinstance(node, (Previously, Historically)):
            w = fresh(node.window)
            return type(node)(rebuild(node.arg), w)
        if isinstance(node, Not):
            return Not(rebuild(node.arg))
        if isinstance(node, Shift):
            return Shift(node.n, rebuild(node.arg))
        if isinstance(node, (And, Or)):
            return type(node)(rebuild(node.left), rebuild(node.right))
        return node

    return rebuild(template)


def _num_key(v) -> str:
    return repr(float(v))


def _key(phi: Formula) -> str:
    if isinstance(phi, TrueConst):
        return "T"
    if isinstance(phi, (StateLT, StateGT, CtrlEQ)):
        tag = {StateLT: "lt", StateGT: "gt", CtrlEQ: "eq"}[type(phi)]
        val = phi.threshold if not isinstance(phi, CtrlEQ) else phi.value
        sval = f"?{val.kind}" if isinstance(val, Slot) else _num_key(val)
        return f"({tag} {phi.var} {sval})"
    if isinstance(phi, Not):
        return f"(not {_key(phi.arg)})"
    if isinstance(phi, Shift):
        return f"(X {phi.n} {_key(phi.arg)})"
    if isinstance(phi, (And, Or)):
        tag = "and" if isinstance(phi, And) else "or"
        a, b = sorted((_key(phi.left), _key(phi.right)))
        return f"({tag} {a} {b})"
    w = phi.window
    sw = "?window" if isinstance(w, Slot) else f"{w[0]} {w[1]}"
    if isinstance(phi, Since):
        return f"(S {sw} {_key(phi.left)} {_key(phi.right)})"
    tag = "P" if isinstance(phi, Previously) else "H"
    return f"({tag} {sw} {_key(phi.arg)})"


def canonical_key(phi: Formula) -> bytes:
    """Byte string identifying ``phi`` up to commutativity of ``&&`` and ``||``.

    Slots are keyed by kind only, so templates that differ just in slot names
    share a key.
    """
    return _key(phi).encode("ascii")
