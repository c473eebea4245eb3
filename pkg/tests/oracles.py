"""Independent reference procedures used as test oracles."""

import itertools

import numpy as np

from ptstl.monitor import Trace, eval_at


def lag_depth(phi):
    """Longest look-back, recomputed from the reference evaluator's point of view."""
    from ptstl.formula import walk, Shift, Previously, Historically, Since, children

    def depth(node):
        sub = max((depth(c) for c in children(node)), default=0)
        if isinstance(node, Shift):
            return node.n + sub
        if isinstance(node, (Previously, Historically, Since)):
            return node.window[0] + sub
        return sub

    return depth(phi)


def brute_force_controllable(phi, sig, extra_history=0):
    """Some full control history makes ``phi`` false at the final instant.

    Every input at every time point is enumerated with ``itertools.product``
    and checked with the recursive reference semantics.
    """
    t = lag_depth(phi) + 1 + extra_history
    cells = [sig.control_domains[i] for _ in range(t) for i in range(sig.m)]
    for combo in itertools.product(*cells):
        ctrl = np.array(combo, dtype=float).reshape(t, sig.m)
        tr = Trace(np.zeros((t, sig.n)), ctrl)
        if not eval_at(tr, phi, t - 1):
            return True
    return False


_HISTORIES = {}


def _histories(domains, t):
    key = (tuple(map(tuple, domains)), t)
    if key not in _HISTORIES:
        cells = [d for _ in range(t) for d in domains]
        arr = np.array(list(itertools.product(*cells)), dtype=float)
        _HISTORIES[key] = arr.reshape(-1, t, len(domains))
    return _HISTORIES[key]


def truth_table_controllable(phi, sig):
    """Same question as :func:`brute_force_controllable`, answered by truth tables.

    Each subformula at each instant is a boolean vector over all control
    histories, built directly from the textbook definitions (explicit loops
    over window positions).
    """
    from ptstl.formula import (
        And, CtrlEQ, Historically, Not, Or, Previously, Shift, Since, TrueConst,
    )

    t = lag_depth(phi) + 1
    hist = _histories(sig.control_domains, t)
    n = len(hist)
    memo = {}

    def val(node, k):
        if k < 0:
            return np.zeros(n, dtype=bool)
        key = (id(node), k)
        if key in memo:
            return memo[key]
        if isinstance(node, TrueConst):
            out = np.ones(n, dtype=bool)
        elif isinstance(node, CtrlEQ):
            out = hist[:, k, node.var] == node.value
        elif isinstance(node, Not):
            out = ~val(node.arg, k)
        elif isinstance(node, And):
            out = val(node.left, k) & val(node.right, k)
        elif isinstance(node, Or):
            out = val(node.left, k) | val(node.right, k)
        elif isinstance(node, Shift):
            out = val(node.arg, k - node.n)
        elif isinstance(node, Previously):
            a, b = node.window
            out = np.zeros(n, dtype=bool)
            for s in range(k - a, k - b + 1):
                out = out | val(node.arg, s)
        elif isinstance(node, Historically):
            a, b = node.window
            out = np.ones(n, dtype=bool)
            for s in range(k - a, k - b + 1):
                out = out & val(node.arg, s)
        elif isinstance(node, Since):
            a, b = node.window
            out = np.zeros(n, dtype=bool)
            for s in range(k - a, k - b + 1):
                held = val(node.right, s)
                for s2 in range(s, k - b + 1):
                    held = held & val(node.left, s2)
                out = out | held
        else:
            raise TypeError(node)
        memo[key] = out
        return out

    return not val(phi, t - 1).all()
