"""Mining controllable cause formulas by template enumeration and grid search.

A cause is ``phi_u && phi_xu`` where ``phi_u`` talks about control inputs
only (``l`` operators) and ``phi_xu`` may use states and controls (``r``
operators).  ``mine`` grows a disjunction of causes one at a time:

* at the current operator budget ``l + r`` every template pair is
  instantiated over the parameter grids, skipping uncontrollable ``phi_u``;
* the candidate maximizing the F-beta score of ``psi || candidate`` wins;
* it is kept if it improves the score by at least ``min_gain``; otherwise
  the budget grows by one, or the search stops if the previous budget was
  already exhausted.

``grid_candidates`` and ``best_candidate`` are the plain formula-at-a-time
interface.  ``mine`` uses an equivalent batched scorer: each template is
evaluated over its whole grid in one numpy pass, and the confusion counts
of every (control instance, mixed instance) pair come out of a single
matrix product.  Both routes share the objective and the tie-break order
(score, then fewer operators, then smaller canonical key), so they pick the
same formula.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .bitset import BitLayout, batch_pack, popcount
from .controllability import DEFAULT_SEARCH_CAP, is_controllable_pure
from .errors import BudgetError, ValidationError
from .formula import (
    CONTROL,
    THRESHOLD,
    WINDOW,
    And,
    CtrlEQ,
    Formula,
    Historically,
    Or,
    Previously,
    Since,
    Slot,
    StateGT,
    StateLT,
    SystemSignature,
    canonical_key,
    disjoin,
    op_count,
    rename_slots,
    slot_uses,
    slots,
    substitute,
)
from .monitor import Dataset, confusion, confusion_from_signal, dataset_signal, f_beta
from .parser import format_number, to_text

log = logging.getLogger(__name__)

DEFAULT_TEMPLATE_CAP = 2


@dataclass(frozen=True)
class ParameterSpace:
    """Finite grids: thresholds per state variable and temporal windows."""

    state_thresholds: tuple
    window_bounds: tuple

    def __post_init__(self):
        thr = tuple(tuple(float(v) for v in row) for row in self.state_thresholds)
        for j, row in enumerate(thr):
            if list(row) != sorted(set(row)):
                raise ValidationError(f"thresholds of x{j} must be strictly ascending")
        object.__setattr__(self, "state_thresholds", thr)
        wins = []
        for w in self.window_bounds:
            a, b = (int(v) for v in w)
            if not a >= b >= 0:
                raise ValidationError(f"window {tuple(w)} violates a >= b >= 0")
            wins.append((a, b))
        object.__setattr__(self, "window_bounds", tuple(wins))

    @classmethod
    def traffic_default(cls):
        main = (10, 15, 20, 25, 30)
        side = (5, 10, 15)
        return cls((main, main, main, side, side), ((1, 0), (2, 0), (3, 0), (2, 1)))

    def grid(self, slot: Slot, owner: Formula, sig: SystemSignature) -> tuple:
        if slot.kind == WINDOW:
            grid = self.window_bounds
        elif slot.kind == CONTROL:
            grid = sig.control_domains[owner.var]
        else:
            if owner.var >= len(self.state_thresholds):
                grid = ()
            else:
                grid = self.state_thresholds[owner.var]
        if not grid:
            raise ValidationError(f"empty grid for slot ?{slot.name}")
        return tuple(grid)


@dataclass(frozen=True)
class MiningConfig:
    total_oc_lo: int = 0
    total_oc_hi: int = 2
    p_max: Optional[int] = None
    min_gain: float = 0.001
    beta: float = 1.0
    tie_break: str = "op_count,canonical_key"
    template_cap: int = DEFAULT_TEMPLATE_CAP
    search_cap: int = DEFAULT_SEARCH_CAP

    def __post_init__(self):
        if not 0 <= self.total_oc_lo <= self.total_oc_hi:
            raise ValidationError("need 0 <= total_oc_lo <= total_oc_hi")
        if self.p_max is not None and self.p_max < 1:
            raise ValidationError("p_max must be positive or unbounded")
        if self.min_gain < 0:
            raise ValidationError("min_gain must be non-negative")
        if self.beta <= 0:
            raise ValidationError("beta must be positive")
        if self.tie_break != "op_count,canonical_key":
            raise ValidationError(f"unknown tie-break policy {self.tie_break!r}")


# -- template enumeration ----------------------------------------------------


def _atom_templates(sig, with_state):
    atoms = []
    if with_state:
        for j in range(sig.n):
            atoms.append(StateGT(j, Slot("t", THRESHOLD)))
            atoms.append(StateLT(j, Slot("t", THRESHOLD)))
    for i in range(sig.m):
        atoms.append(CtrlEQ(i, Slot("v", CONTROL)))
    return atoms


def _grow(by_ops, k):
    w = Slot("w", WINDOW)
    out = []
    for sub in by_ops[k - 1]:
        out.append(Previously(sub, w))
        out.append(Historically(sub, w))
    for i in range(k):
        for left in by_ops[i]:
            for right in by_ops[k - 1 - i]:
                out.append(And(left, right))
                out.append(Or(left, right))
                out.append(Since(left, right, w))
    return out


def _dedup(templates):
    seen, out = set(), []
    for t in templates:
        key = canonical_key(t)
        if key not in seen:
            seen.add(key)
            out.append(t)
    return out


def _enumerate(ops, sig, with_state, cap, prefix):
    if ops > cap:
        raise BudgetError(f"template operator count {ops} exceeds the cap of {cap}")
    by_ops = [_dedup(_atom_templates(sig, with_state))]
    for k in range(1, ops + 1):
        by_ops.append(_dedup(_grow(by_ops, k)))
    return [rename_slots(t, prefix) for t in by_ops[ops]]


def enum_control_templates(l: int, sig: SystemSignature, cap: int = DEFAULT_TEMPLATE_CAP) -> list:
    """Templates over ``u_i == ?`` atoms with exactly ``l`` operators."""
    return _enumerate(l, sig, False, cap, "c")


def enum_mixed_templates(r: int, sig: SystemSignature, cap: int = DEFAULT_TEMPLATE_CAP) -> list:
    """Templates over state thresholds and control atoms with exactly ``r`` operators."""
    return _enumerate(r, sig, True, cap, "d")


def slot_grids(template: Formula, space: ParameterSpace, sig: SystemSignature) -> list:
    uses = slot_uses(template)
    return [(s, space.grid(s, uses[s.name], sig)) for s in slots(template)]


def grid_valuations(template: Formula, space: ParameterSpace, sig: SystemSignature) -> Iterator[dict]:
    """Every valuation of the template's slots, in :func:`itertools.product` order."""
    grids = slot_grids(template, space, sig)
    names = [s.name for s, _ in grids]
    for combo in itertools.product(*(g for _, g in grids)):
        yield dict(zip(names, combo))


@dataclass(frozen=True)
class CauseTemplate:
    """A ``(phi_u, phi_xu)`` template pair and the admissible ``phi_u`` valuations."""

    control: Formula
    mixed: Formula
    l: int
    r: int
    admissible: tuple  # indices into grid_valuations(control)
    skipped: int = 0


class _VerdictCache:
    def __init__(self, sig, cap):
        self.sig, self.cap, self.store = sig, cap, {}

    def controllable(self, phi):
        key = canonical_key(phi)
        if key not in self.store:
            self.store[key] = is_controllable_pure(phi, self.sig, self.cap).controllable
        return self.store[key]


def _admissible(template, space, sig, verdicts):
    keep = []
    skipped = 0
    for idx, val in enumerate(grid_valuations(template, space, sig)):
        if verdicts.controllable(substitute(template, val)):
            keep.append(idx)
        else:
            skipped += 1
    return tuple(keep), skipped


def enum_cause_templates(
    total_oc: int,
    sig: SystemSignature,
    space: ParameterSpace,
    cap: int = DEFAULT_TEMPLATE_CAP,
    search_cap: int = DEFAULT_SEARCH_CAP,
    _verdicts=None,
) -> list:
    """All template pairs with ``l + r == total_oc``.

    Control templates with no controllable valuation on the grid are
    dropped; the others carry the list of valuations that survive.
    """
    verdicts = _verdicts or _VerdictCache(sig, search_cap)
    out = []
    for l in range(total_oc + 1):
        r = total_oc - l
        controls = []
        for t in enum_control_templates(l, sig, cap):
            keep, skipped = _admissible(t, space, sig, verdicts)
            if keep:
                controls.append((t, keep, skipped))
        if not controls:
            continue
        mixed = enum_mixed_templates(r, sig, cap)
        for t, keep, skipped in controls:
            for m in mixed:
                out.append(CauseTemplate(t, m, l, r, keep, skipped))
    return out


def control_instances(ct: CauseTemplate, space, sig) -> list:
    vals = list(grid_valuations(ct.control, space, sig))
    return [substitute(ct.control, vals[i]) for i in ct.admissible]


def grid_candidates(ct: CauseTemplate, space: ParameterSpace, sig: SystemSignature) -> Iterator[Formula]:
    """Instantiated causes of one template pair, deterministic order.

    Controllable ``phi_u`` instances form the outer loop, the mixed grid the
    inner one.
    """
    mixed = list(grid_valuations(ct.mixed, space, sig))
    for phi_u in control_instances(ct, space, sig):
        for val in mixed:
            yield And(phi_u, substitute(ct.mixed, val))


# -- scoring -----------------------------------------------------------------


def _rank(score, cand):
    # smaller is better; the printed text makes the order total
    return (-score, op_count(cand), canonical_key(cand), to_text(cand))


def best_candidate(psi: Optional[Formula], candidates: Iterable[Formula], ds: Dataset, beta: float = 1.0):
    """Candidate maximizing F-beta of ``psi || candidate``, with its score."""
    arr = ds.arrays
    base = dataset_signal(ds, psi) if psi is not None else np.zeros(arr.mask.shape, bool)
    best, best_rank = None, None
    for cand in candidates:
        pred = base | dataset_signal(ds, cand)
        c = confusion_from_signal(pred, arr.labels, arr.mask)
        rank = _rank(f_beta(c, beta), cand)
        if best_rank is None or rank < best_rank:
            best, best_rank = cand, rank
    if best is None:
        raise ValidationError("best_candidate needs at least one candidate")
    return best, -best_rank[0]


class _Scorer:
    """Bit-packed scoring of every cause at one operator count.

    For a split ``l + r`` the admissible control instances are packed once
    per run; each mixed template is packed over its grid and crossed with all
    of them, the confusion counts coming from popcounts against the
    positive and negative points not yet covered by ``psi``.
    """

    _BLOCK = 1 << 22  # words per popcount block

    def __init__(self, ds: Dataset, space: ParameterSpace, cfg: MiningConfig):
        self.ds, self.space, self.cfg = ds, space, cfg
        self.sig = ds.signature
        arr = ds.arrays
        self.layout = BitLayout(arr.mask.shape)
        self.xs, self.us = arr.xs, arr.us
        self.labels, self.mask = arr.labels, arr.mask
        self.positives = int(np.count_nonzero(self.labels & self.mask))
        self.verdicts = _VerdictCache(self.sig, cfg.search_cap)
        self._controls = {}
        self._mixed = {}
        self._packed = {}

    def _pack(self, template):
        key = canonical_key(template)
        if key in self._packed:
            return self._packed[key]
        grids = slot_grids(template, self.space, self.sig)
        words = batch_pack(template, grids, self.xs, self.us, self.layout)
        if op_count(template) <= 1:
            self._packed[key] = words
        return words

    def controls(self, l):
        """``(formulas, packed signals)`` of all admissible control instances of size ``l``."""
        if l not in self._controls:
            forms, blocks = [], []
            for t in enum_control_templates(l, self.sig, self.cfg.template_cap):
                keep, _ = _admissible(t, self.space, self.sig, self.verdicts)
                if not keep:
                    continue
                vals = list(grid_valuations(t, self.space, self.sig))
                forms.extend(substitute(t, vals[i]) for i in keep)
                grids = slot_grids(t, self.space, self.sig)
                blocks.append(batch_pack(t, grids, self.xs, self.us, self.layout)[list(keep)])
            words = np.concatenate(blocks) if blocks else np.zeros((0, self.layout.n_words), np.uint64)
            self._controls[l] = (forms, words)
        return self._controls[l]

    def mixed(self, r):
        if r not in self._mixed:
            self._mixed[r] = enum_mixed_templates(r, self.sig, self.cfg.template_cap)
        return self._mixed[r]

    def best_at(self, oc, psi_sig):
        """Best cause with ``l + r == oc`` given the current disjunction signal.

        Returns ``(score, formula, phi_u, phi_xu, candidate_count)``;
        ``formula`` is ``None`` when no control instance is admissible or no
        candidate reaches a positive score.
        """
        covered = psi_sig & self.mask
        tp0 = int(np.count_nonzero(covered & self.labels))
        fp0 = int(np.count_nonzero(covered & ~self.labels))
        free = self.mask & ~covered
        pos = self.layout.pack(free & self.labels)
        neg = self.layout.pack(free & ~self.labels)
        b2 = self.cfg.beta * self.cfg.beta
        top, ties, count = 0.0, [], 0

        for r in range(oc + 1):
            forms_u, words_u = self.controls(oc - r)
            if not forms_u:
                continue
            pu, nu = words_u & pos, words_u & neg
            k = len(forms_u)
            rows_per_block = max(1, self._BLOCK // (k * self.layout.n_words))
            for template in self.mixed(r):
                words_m = self._pack(template)
                for start in range(0, len(words_m), rows_per_block):
                    block = words_m[start : start + rows_per_block, None, :]
                    tp = tp0 + popcount(block & pu)
                    fp = fp0 + popcount(block & nu)
                    num = (1 + b2) * tp
                    den = num + b2 * (self.positives - tp) + fp
                    scores = np.where(den > 0, num / np.maximum(den, 1), 0.0)
                    count += scores.size
                    best = float(scores.max())
                    if best < top or best == 0.0:
                        continue
                    if best > top:
                        top, ties = best, []
                    rows, cols = np.nonzero(scores == best)
                    ties.append((template, oc - r, start + rows, cols))

        if not ties:
            return 0.0, None, None, None, count
        chosen = None
        for template, l, rows, cols in ties:
            grids = slot_grids(template, self.space, self.sig)
            names = [s.name for s, _ in grids]
            sizes = [len(g) for _, g in grids]
            forms_u = self._controls[l][0]
            built = {}
            for v, c in zip(rows.tolist(), cols.tolist()):
                if v not in built:
                    idx = np.unravel_index(v, sizes) if sizes else ()
                    val = {n: grids[i][1][int(j)] for i, (n, j) in enumerate(zip(names, idx))}
                    built[v] = substitute(template, val)
                cand = And(forms_u[c], built[v])
                rank = (op_count(cand), canonical_key(cand), to_text(cand))
                if chosen is None or rank < chosen[0]:
                    chosen = (rank, cand)
        cand = chosen[1]
        return top, cand, cand.left, cand.right, count


# -- the accretion loop ------------------------------------------------------


@dataclass
class IterationRecord:
    current_oc: int
    candidate_count: int
    chosen: Optional[str]
    score_before: float
    score_after: Optional[float]
    gain: Optional[float]
    accepted: bool
    note: str = ""

    def to_dict(self):
        return {
            "current_oc": self.current_oc,
            "candidate_count": self.candidate_count,
            "chosen": self.chosen,
            "score_before": self.score_before,
            "score_after": self.score_after,
            "gain": self.gain,
            "accepted": self.accepted,
            "note": self.note,
        }


@dataclass
class MiningResult:
    disjuncts: list  # (phi_u, phi_xu) pairs
    iterations: list
    final_score: float
    beta: float
    config: MiningConfig
    diagnostics: list = field(default_factory=list)

    @property
    def causes(self) -> list:
        return [And(u, xu) for u, xu in self.disjuncts]

    @property
    def psi(self) -> Optional[Formula]:
        return disjoin(self.causes) if self.disjuncts else None

    def to_record(self) -> dict:
        cfg = self.config
        return {
            "format": "ptstl-mining-result",
            "version": 1,
            "beta": self.beta,
            "config": {
                "total_oc_lo": cfg.total_oc_lo,
                "total_oc_hi": cfg.total_oc_hi,
                "p_max": cfg.p_max,
                "min_gain": cfg.min_gain,
                "beta": cfg.beta,
                "tie_break": cfg.tie_break,
            },
            "psi": to_text(self.psi) if self.psi is not None else None,
            "disjuncts": [
                {
                    "formula": to_text(And(u, xu)),
                    "control_part": to_text(u),
                    "mixed_part": to_text(xu),
                    "l": op_count(u),
                    "r": op_count(xu),
                }
                for u, xu in self.disjuncts
            ],
            "iterations": [it.to_dict() for it in self.iterations],
            "final_score": self.final_score,
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True) + "\n"

    def report(self) -> str:
        lines = [f"F_beta (beta={format_number(self.beta)}): {self.final_score:.6f}"]
        if self.disjuncts:
            lines.append(f"psi has {len(self.disjuncts)} cause(s):")
            accepted = [it for it in self.iterations if it.accepted]
            for i, ((u, xu), it) in enumerate(zip(self.disjuncts, accepted), 1):
                lines.append(
                    f"  {i}. {to_text(And(u, xu))}   [l={op_count(u)}, r={op_count(xu)}, "
                    f"gain {it.gain:+.6f}]"
                )
        else:
            lines.append("psi is empty")
        lines.append("iterations:")
        for it in self.iterations:
            status = "accepted" if it.accepted else "rejected"
            gain = "n/a" if it.gain is None else f"{it.gain:+.6f}"
            lines.append(
                f"  oc={it.current_oc} candidates={it.candidate_count} {status} gain={gain}"
                + (f"  {it.chosen}" if it.chosen else "")
                + (f"  ({it.note})" if it.note else "")
            )
        for d in self.diagnostics:
            lines.append(f"note: {d}")
        return "\n".join(lines) + "\n"


def mine(ds: Dataset, space: ParameterSpace, cfg: MiningConfig = MiningConfig()) -> MiningResult:
    """Grow a disjunction of controllable causes explaining the labels of ``ds``."""
    if len(ds) == 0 or ds.n_points == 0:
        raise ValidationError("cannot mine an empty dataset")
    scorer = _Scorer(ds, space, cfg)
    psi_sig = np.zeros(ds.arrays.mask.shape, dtype=bool)
    disjuncts, iterations, diagnostics = [], [], []
    current = cfg.total_oc_lo
    last_score = 0.0
    last_ok = cfg.total_oc_lo

    while current <= cfg.total_oc_hi and (cfg.p_max is None or len(disjuncts) < cfg.p_max):
        score, cand, phi_u, phi_xu, count = scorer.best_at(current, psi_sig)
        accepted = False
        if cand is None:
            if count == 0:
                msg = f"no controllable candidates at operator count {current}"
            else:
                msg = f"no candidate at operator count {current} covers a positive point"
            diagnostics.append(msg)
            iterations.append(IterationRecord(current, count, None, last_score, None, None, False, msg))
        else:
            gain = score - last_score
            accepted = gain > 0 and gain >= cfg.min_gain
            text = to_text(cand)
            iterations.append(
                IterationRecord(current, count, text, last_score, score, gain, accepted)
            )
            log.info("oc=%d candidates=%d best=%.6f gain=%+.6f %s", current, count, score, gain, text)
        if accepted:
            disjuncts.append((phi_u, phi_xu))
            psi_sig = psi_sig | dataset_signal(ds, cand)
            last_score = score
            last_ok = current
        elif last_ok != current:
            break
        else:
            current += 1

    if disjuncts:
        final = f_beta(confusion(ds, disjoin([And(u, xu) for u, xu in disjuncts])), cfg.beta)
    else:
        final = 0.0
        diagnostics.append("no candidate improved the score; psi is empty")
    return MiningResult(disjuncts, iterations, final, cfg.beta, cfg, diagnostics)
