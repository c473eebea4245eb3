"""Bit-packed satisfaction signals for bulk candidate scoring.

All time points of a dataset are laid out as one bit stream (trace after
trace, each padded to the longest trace) packed into ``uint64`` words, bit
``i`` of the stream living in word ``i // 64``.  Boolean connectives become
word-wise operations, ``X^n`` becomes a stream shift followed by a mask that
clears the first ``n`` positions of every trace (so nothing leaks across
trace boundaries), and the windowed operators are unrolled into at most
``a - b + 1`` shifts each.  Counting agreements with a label mask is a
popcount.

Bits at padding positions carry arbitrary values; callers must only count
through masks that exclude them.
"""

from __future__ import annotations

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
    TrueConst,
)

WORD = 64


class BitLayout:
    """Packing geometry for a ``(D, T)`` block of time points."""

    def __init__(self, shape):
        self.shape = tuple(shape)
        d, t = self.shape
        self.n_bits = d * t
        self.n_words = max(1, -(-self.n_bits // WORD))
        self._pos = np.tile(np.arange(t), d)
        self._masks = {}

    def pack(self, bits) -> np.ndarray:
        """``(..., D, T)`` booleans to ``(..., W)`` words."""
        bits = np.asarray(bits, dtype=bool)
        lead = bits.shape[: bits.ndim - 2]
        flat = bits.reshape(lead + (self.n_bits,))
        pad = self.n_words * WORD - self.n_bits
        if pad:
            flat = np.concatenate([flat, np.zeros(lead + (pad,), dtype=bool)], axis=-1)
        packed = np.packbits(flat, axis=-1, bitorder="little")
        return np.ascontiguousarray(packed).view("<u8").reshape(lead + (self.n_words,))

    def unpack(self, words) -> np.ndarray:
        words = np.ascontiguousarray(words, dtype="<u8")
        lead = words.shape[:-1]
        raw = np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little")
        return raw[..., : self.n_bits].astype(bool).reshape(lead + self.shape)

    def history_mask(self, n: int) -> np.ndarray:
        """Words with bit set where the in-trace time index is at least ``n``."""
        if n not in self._masks:
            self._masks[n] = self.pack((self._pos >= n).reshape(self.shape))
        return self._masks[n]

    def shift(self, words, n: int) -> np.ndarray:
        """Packed form of ``X^n``."""
        if n == 0:
            return words
        q, r = divmod(n, WORD)
        w = self.n_words
        out = np.zeros(np.broadcast_shapes(words.shape), dtype=np.uint64)
        if q < w:
            out[..., q:] = words[..., : w - q]
        if r:
            carry = np.zeros_like(out)
            carry[..., 1:] = out[..., :-1] >> np.uint64(WORD - r)
            out = (out << np.uint64(r)) | carry
        return out & self.history_mask(n)

    def previously(self, words, a, b):
        out = self.shift(words, b)
        for d in range(b + 1, a + 1):
            out = out | self.shift(words, d)
        return out

    def historically(self, words, a, b):
        out = self.shift(words, b)
        for d in range(b + 1, a + 1):
            out = out & self.shift(words, d)
        return out

    def since(self, left, right, a, b):
        hold = self.shift(left, b)
        out = self.shift(right, b) & hold
        for d in range(b + 1, a + 1):
            hold = hold & self.shift(left, d)
            out = out | (self.shift(right, d) & hold)
        return out


def popcount(words, axis=-1) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=axis, dtype=np.int64)


def batch_pack(template: Formula, grids: list, xs, us, layout: BitLayout) -> np.ndarray:
    """Packed signals of every grid valuation of ``template``.

    ``grids`` pairs each slot of ``template`` (in :func:`ptstl.formula.slots`
    order) with its value list.  Row ``v`` of the ``(V, W)`` result belongs
    to the ``v``-th valuation of ``itertools.product`` over the grids.
    """
    ns = len(grids)
    axis = {s.name: i for i, (s, _) in enumerate(grids)}
    values = {s.name: g for s, g in grids}
    nw = layout.n_words
    scalar = (1,) * ns + (nw,)

    def on_axis(block, name):
        shape = [1] * ns
        shape[axis[name]] = block.shape[0]
        return block.reshape(tuple(shape) + (nw,))

    def atom(data, op, val):
        if isinstance(val, Slot):
            grid = np.asarray(values[val.name], dtype=float)[:, None, None]
            return on_axis(layout.pack(op(data[None], grid)), val.name)
        return layout.pack(op(data, val)).reshape(scalar)

    def over_windows(w, fn):
        if not isinstance(w, Slot):
            return fn(*w)
        parts = [fn(a, b) for a, b in values[w.name]]
        parts = np.broadcast_arrays(*parts)
        return np.concatenate(parts, axis=axis[w.name])

    def ev(node):
        if isinstance(node, TrueConst):
            return np.full(scalar, np.uint64(2**64 - 1), dtype=np.uint64)
        if isinstance(node, StateGT):
            return atom(xs[node.var], np.greater, node.threshold)
        if isinstance(node, StateLT):
            return atom(xs[node.var], np.less, node.threshold)
        if isinstance(node, CtrlEQ):
            return atom(us[node.var], np.equal, node.value)
        if isinstance(node, Not):
            return ~ev(node.arg)
        if isinstance(node, And):
            return ev(node.left) & ev(node.right)
        if isinstance(node, Or):
            return ev(node.left) | ev(node.right)
        if isinstance(node, Shift):
            return layout.shift(ev(node.arg), node.n)
        if isinstance(node, Previously):
            child = ev(node.arg)
            return over_windows(node.window, lambda a, b: layout.previously(child, a, b))
        if isinstance(node, Historically):
            child = ev(node.arg)
            return over_windows(node.window, lambda a, b: layout.historically(child, a, b))
        if isinstance(node, Since):
            left, right = ev(node.left), ev(node.right)
            return over_windows(node.window, lambda a, b: layout.since(left, right, a, b))
        raise TypeError(f"cannot evaluate {node!r}")

    for s, g in grids:
        if not g:
            raise ValidationError(f"empty grid for slot ?{s.name}")
    full = tuple(len(g) for _, g in grids) + (nw,)
    return np.broadcast_to(ev(template), full).reshape(-1, nw)
