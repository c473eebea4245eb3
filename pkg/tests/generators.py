"""Random formulas and traces shared by the test modules."""

import numpy as np

from ptstl.formula import (
    And,
    CtrlEQ,
    Historically,
    Not,
    Or,
    Previously,
    Shift,
    Since,
    StateGT,
    StateLT,
    SystemSignature,
    TrueConst,
    op_count,
)
from ptstl.monitor import Trace

SIG = SystemSignature(n=2, m=2, control_domains=((0, 1), (0, 1, 2)))
THRESHOLDS = (2.0, 5.0, 7.5)


def random_atom(rng, sig=SIG, control_only=False):
    pick = rng.integers(0, 4 if not control_only else 1)
    if control_only or pick == 0 or sig.n == 0:
        i = int(rng.integers(sig.m))
        dom = sig.control_domains[i]
        return CtrlEQ(i, dom[int(rng.integers(len(dom)))])
    if pick == 1:
        return TrueConst()
    j = int(rng.integers(sig.n))
    c = float(rng.choice(THRESHOLDS))
    return StateLT(j, c) if pick == 2 else StateGT(j, c)


def random_window(rng, max_window):
    a = int(rng.integers(0, max_window + 1))
    b = int(rng.integers(0, a + 1))
    return (a, b)


def random_formula(rng, ops, sig=SIG, max_window=5, control_only=False, shifts=True):
    """Formula with exactly ``ops`` counted operators (shifts are free extras)."""
    if ops == 0:
        phi = random_atom(rng, sig, control_only)
    else:
        kind = rng.integers(0, 6)
        if kind == 0:
            phi = Not(random_formula(rng, ops - 1, sig, max_window, control_only, shifts))
        elif kind in (1, 2, 3):
            split = int(rng.integers(0, ops))
            left = random_formula(rng, split, sig, max_window, control_only, shifts)
            right = random_formula(rng, ops - 1 - split, sig, max_window, control_only, shifts)
            if kind == 1:
                phi = And(left, right)
            elif kind == 2:
                phi = Or(left, right)
            else:
                phi = Since(left, right, random_window(rng, max_window))
        else:
            arg = random_formula(rng, ops - 1, sig, max_window, control_only, shifts)
            op = Previously if kind == 4 else Historically
            phi = op(arg, random_window(rng, max_window))
    if shifts and rng.random() < 0.15:
        phi = Shift(int(rng.integers(0, 3)), phi)
    assert op_count(phi) == ops
    return phi


def random_trace(rng, length, sig=SIG):
    states = rng.choice(np.arange(0.0, 10.0, 0.5), size=(length, sig.n))
    controls = np.column_stack(
        [rng.choice(np.asarray(d, dtype=float), size=length) for d in sig.control_domains]
    ) if sig.m else np.zeros((length, 0))
    return Trace(states, controls)
