"""Boolean monitoring of formulas over finite traces, and F-beta scoring.

Two evaluators live here.  ``eval_at`` is the direct recursive reading of
the semantics and serves as the reference.  ``eval_signal`` computes the
whole satisfaction signal bottom-up with prefix sums, so each window costs
O(N) no matter how wide it is; it works on arrays with arbitrary leading
batch axes (time is always the last axis), which the miner and the
controllability check use to score many traces or assignments at once.

Boundary rule: a sub-formula evaluated at a time before 0 is false.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ValidationError
from .formula import (
    And,
    CtrlEQ,
    Formula,
    Historically,
    Not,
    Or,
    Previously,
    Shift,
    Since,
    Slot,
    StateGT,
    StateLT,
    SystemSignature,
    TrueConst,
)


def _frozen(a, ndim, what):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValidationError(f"{what} must be a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class Trace:
    """States ``(N+1, n)`` and controls ``(N+1, m)`` of one run."""

    __slots__ = ("states", "controls")

    def __init__(self, states, controls):
        states = _frozen(states, 2, "states")
        controls = _frozen(controls, 2, "controls")
        if len(states) != len(controls) or len(states) < 1:
            raise ValidationError(
                f"states and controls need equal non-zero length, got {len(states)} and {len(controls)}"
            )
        self.states = states
        self.controls = controls

    def __len__(self):
        return len(self.states)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return np.array_equal(self.states, other.states) and np.array_equal(
            self.controls, other.controls
        )

    def __repr__(self):
        return f"Trace(len={len(self)}, n={self.states.shape[1]}, m={self.controls.shape[1]})"

    def check(self, sig: SystemSignature):
        if self.states.shape[1] != sig.n or self.controls.shape[1] != sig.m:
            raise ValidationError(
                f"trace has {self.states.shape[1]} states / {self.controls.shape[1]} controls, "
                f"signature has {sig.n} / {sig.m}"
            )
        for i, dom in enumerate(sig.control_domains):
            bad = ~np.isin(self.controls[:, i], dom)
            if bad.any():
                k = int(np.argmax(bad))
                raise ValidationError(
                    f"u{i}={self.controls[k, i]:g} at k={k} is outside its domain {list(dom)}"
                )


def _labels(bits, length):
    arr = np.asarray(bits)
    if arr.shape != (length,):
        raise ValidationError(f"labels must have length {length}, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    out = arr.astype(bool)
    out.setflags(write=False)
    return out


class Dataset:
    """Labeled traces of one system.

    ``arrays`` stacks the traces into ``(D, T_max)`` blocks padded at the end;
    past-time evaluation never looks forward, so padding cannot leak into
    real time points and is masked out when counting.
    """

    def __init__(self, signature: SystemSignature, items):
        self.signature = signature
        checked = []
        for trace, labels in items:
            trace.check(signature)
            checked.append((trace, _labels(labels, len(trace))))
        self.items = tuple(checked)

    def __len__(self):
        return len(self.items)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.signature == other.signature
            and len(self.items) == len(other.items)
            and all(
                t1 == t2 and np.array_equal(l1, l2)
                for (t1, l1), (t2, l2) in zip(self.items, other.items)
            )
        )

    @property
    def n_points(self):
        return sum(len(t) for t, _ in self.items)

    @property
    def positive_rate(self):
        return sum(int(l.sum()) for _, l in self.items) / max(self.n_points, 1)

    @cached_property
    def arrays(self):
        sig = self.signature
        d = len(self.items)
        tmax = max((len(t) for t, _ in self.items), default=0)
        xs = np.zeros((sig.n, d, tmax))
        us = np.zeros((sig.m, d, tmax))
        labels = np.zeros((d, tmax), dtype=bool)
        mask = np.zeros((d, tmax), dtype=bool)
        for r, (trace, lab) in enumerate(self.items):
            t = len(trace)
            xs[:, r, :t] = trace.states.T
            us[:, r, :t] = trace.controls.T
            # repeat the last control row so padding stays inside the domains
            us[:, r, t:] = trace.controls[-1][:, None]
            labels[r, :t] = lab
            mask[r, :t] = True
        return _Arrays(list(xs), list(us), labels, mask)


@dataclass(frozen=True)
class _Arrays:
    xs: list
    us: list
    labels: np.ndarray
    mask: np.ndarray


# -- reference semantics ---------------------------------------------------


def eval_at(tr: Trace, phi: Formula, k: int) -> bool:
    """Whether ``phi`` holds on ``tr`` at time ``k``, by direct recursion."""
    n = len(tr)
    if not 0 <= k < n:
        raise IndexError(f"time {k} outside trace of length {n}")
    memo = {}

    def holds(node, t):
        if t < 0:
            return False
        key = (id(node), t)
        if key in memo:
            return memo[key]
        if isinstance(node, TrueConst):
            out = True
        elif isinstance(node, StateLT):
            out = bool(tr.states[t, node.var] < node.threshold)
        elif isinstance(node, StateGT):
            out = bool(tr.states[t, node.var] > node.threshold)
        elif isinstance(node, CtrlEQ):
            out = bool(tr.controls[t, node.var] == node.value)
        elif isinstance(node, Not):
            out = not holds(node.arg, t)
        elif isinstance(node, And):
            out = holds(node.left, t) and holds(node.right, t)
        elif isinstance(node, Or):
            out = holds(node.left, t) or holds(node.right, t)
        elif isinstance(node, Shift):
            out = holds(node.arg, t - node.n)
        elif isinstance(node, Previously):
            out = any(holds(node.arg, s) for s in range(t - node.a, t - node.b + 1))
        elif isinstance(node, Historically):
            out = all(holds(node.arg, s) for s in range(t - node.a, t - node.b + 1))
        elif isinstance(node, Since):
            out = any(
                holds(node.right, s)
                and all(holds(node.left, s2) for s2 in range(s, t - node.b + 1))
                for s in range(t - node.a, t - node.b + 1)
            )
        else:
            raise TypeError(f"cannot evaluate {node!r}")
        memo[key] = out
        return out

    return holds(phi, k)


# -- vectorized semantics --------------------------------------------------


def _prefix(sig):
    """Prefix counts with a leading zero: ``c[..., t] = sum(sig[..., :t])``."""
    c = np.zeros(sig.shape[:-1] + (sig.shape[-1] + 1,), dtype=np.int32)
    np.cumsum(sig, axis=-1, out=c[..., 1:])
    return c


def shift_signal(sig, n):
    out = np.zeros_like(sig)
    if n < sig.shape[-1]:
        out[..., n:] = sig[..., : sig.shape[-1] - n]
    return out


def previously_signal(sig, a, b):
    t = sig.shape[-1]
    ks = np.arange(t)
    hi = ks - b
    valid = hi >= 0
    hi = np.maximum(hi, 0)
    lo = np.maximum(ks - a, 0)
    c = _prefix(sig)
    return valid & ((c[..., hi + 1] - c[..., lo]) > 0)


def historically_signal(sig, a, b):
    t = sig.shape[-1]
    ks = np.arange(t)
    valid = ks - a >= 0
    hi = np.maximum(ks - b, 0)
    lo = np.maximum(ks - a, 0)
    c = _prefix(sig)
    return valid & ((c[..., hi + 1] - c[..., lo]) == (a - b + 1))


def since_signal(left, right, a, b):
    left, right = np.broadcast_arrays(left, right)
    t = left.shape[-1]
    ks = np.arange(t)
    hi = ks - b
    valid = hi >= 0
    hi = np.maximum(hi, 0)
    # start of the run of `left` ending at each index (index + 1 if left is false there)
    idx = np.broadcast_to(ks, left.shape)
    last_false = np.maximum.accumulate(np.where(left, -1, idx), axis=-1)
    run_start = last_false[..., hi] + 1
    lo = np.maximum(run_start, np.maximum(ks - a, 0))
    c = _prefix(right)
    lo_c = np.take_along_axis(c, np.minimum(lo, t), axis=-1)
    return valid & (lo <= hi) & ((c[..., hi + 1] - lo_c) > 0)


def signal(phi: Formula, xs, us, shape) -> np.ndarray:
    """Satisfaction signal of ``phi``.

    ``xs[j]`` and ``us[i]`` are arrays broadcastable to ``shape`` whose last
    axis is time.
    """

    def ev(node):
        if isinstance(node, TrueConst):
            return np.ones(shape, dtype=bool)
        if isinstance(node, (StateLT, StateGT, CtrlEQ)):
            val = node.value if isinstance(node, CtrlEQ) else node.threshold
            if isinstance(val, Slot):
                raise ValidationError(f"cannot evaluate unfilled slot ?{val.name}")
            if isinstance(node, StateLT):
                out = xs[node.var] < val
            elif isinstance(node, StateGT):
                out = xs[node.var] > val
            else:
                out = us[node.var] == val
            return np.broadcast_to(out, shape)
        if isinstance(node, Not):
            return ~ev(node.arg)
        if isinstance(node, And):
            return ev(node.left) & ev(node.right)
        if isinstance(node, Or):
            return ev(node.left) | ev(node.right)
        if isinstance(node, Shift):
            return shift_signal(ev(node.arg), node.n)
        if isinstance(node, Previously):
            return previously_signal(ev(node.arg), node.a, node.b)
        if isinstance(node, Historically):
            return historically_signal(ev(node.arg), node.a, node.b)
        if isinstance(node, Since):
            return since_signal(ev(node.left), ev(node.right), node.a, node.b)
        raise TypeError(f"cannot evaluate {node!r}")

    return ev(phi)


def eval_signal(tr: Trace, phi: Formula) -> np.ndarray:
    """Satisfaction of ``phi`` at every time point of ``tr``."""
    shape = (len(tr),)
    return signal(phi, list(tr.states.T), list(tr.controls.T), shape)


def dataset_signal(ds: Dataset, phi: Formula) -> np.ndarray:
    """``(D, T_max)`` satisfaction block; padded entries are meaningless."""
    arr = ds.arrays
    return signal(phi, arr.xs, arr.us, arr.mask.shape)


# -- scoring ---------------------------------------------------------------


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def confusion_from_signal(pred, labels, mask) -> Confusion:
    pred = pred & mask
    tp = int(np.count_nonzero(pred & labels))
    fp = int(np.count_nonzero(pred & ~labels))
    pos = int(np.count_nonzero(labels & mask))
    total = int(np.count_nonzero(mask))
    fn = pos - tp
    return Confusion(tp, fp, fn, total - tp - fp - fn)


def confusion(ds: Dataset, phi: Formula) -> Confusion:
    """Pooled confusion counts over every time point of every trace."""
    arr = ds.arrays
    return confusion_from_signal(dataset_signal(ds, phi), arr.labels, arr.mask)


def f_beta(c: Confusion, beta: float = 1.0) -> float:
    """``(1+b^2) tp / ((1+b^2) tp + b^2 fn + fp)``, 0 when the denominator is 0."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return f_beta_counts(c.tp, c.fp, c.fn, beta)


def f_beta_counts(tp, fp, fn, beta=1.0):
    b2 = beta * beta
    num = (1 + b2) * tp
    den = num + b2 * fn + fp
    return num / den if den else 0.0
