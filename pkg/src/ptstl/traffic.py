"""Five-road, two-light queue network driven by random signal choices.

Topology::

    road 0 --A(u0=0)--> road 1 --B(u1=0)--> road 2 --> exit
    road 3 --A(u0=1)--^          road 4 --B(u1=1)--^

Light value 0 lets the horizontal (mainline) approach through and stops
the vertical side road; 1 does the opposite.  Each road is a bounded
integer queue.  Within a step vehicles leave the network first, then move
through B, then through A, and finally new arrivals join roads 0, 3 and 4,
every move limited by the free space downstream.

A step is labeled 1 when the *next* state violates
``x0 < 30 && x1 < 30 && x2 < 30 && x3 < 15 && x4 < 15``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .formula import SystemSignature
from .monitor import Dataset, Trace

N_ROADS = 5
ENTRY_ROADS = (0, 3, 4)
SAFE_LIMITS = (30, 30, 30, 15, 15)


@dataclass(frozen=True)
class TrafficParams:
    capacities: tuple = (40, 40, 40, 20, 20)
    mainline_flow: int = 8
    side_flow: int = 5
    exit_flow: int = 10
    # inclusive upper limits of the uniform integer arrivals on roads 0, 3, 4
    arrival_max: tuple = (4, 3, 3)

    def __post_init__(self):
        object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))
        object.__setattr__(self, "arrival_max", tuple(int(a) for a in self.arrival_max))
        if len(self.capacities) != N_ROADS or min(self.capacities) < 0:
            raise ValidationError("capacities must be five non-negative integers")
        if len(self.arrival_max) != len(ENTRY_ROADS) or min(self.arrival_max) < 0:
            raise ValidationError("arrival_max must be three non-negative integers")
        if min(self.mainline_flow, self.side_flow, self.exit_flow) < 0:
            raise ValidationError("flows must be non-negative")

    def signature(self) -> SystemSignature:
        return SystemSignature(
            n=N_ROADS,
            m=2,
            control_domains=((0, 1), (0, 1)),
            state_bounds=tuple((0, c) for c in self.capacities),
        )


@dataclass(frozen=True)
class SimRun:
    trace: Trace
    labels: np.ndarray
    seed: int
    congestion_rate: float
    state_violation_rate: float = field(default=0.0)


def _transfer(x, src, dst, limit, cap):
    moved = min(x[src], limit, cap[dst] - x[dst])
    x[src] -= moved
    x[dst] += moved
    return moved


def step(x, u, w, p: TrafficParams = TrafficParams()):
    """Next queue lengths from state ``x``, lights ``u`` and arrivals ``w``."""
    cap = p.capacities
    x = [int(v) for v in x]
    if len(x) != N_ROADS or any(not 0 <= v <= c for v, c in zip(x, cap)):
        raise ValidationError(f"state {x} outside capacities {cap}")
    if len(u) != 2 or any(v not in (0, 1) for v in u):
        raise ValidationError(f"lights must be 0/1, got {tuple(u)}")
    if len(w) != len(ENTRY_ROADS) or any(
        not 0 <= int(v) <= hi for v, hi in zip(w, p.arrival_max)
    ):
        raise ValidationError(f"arrivals {tuple(w)} outside bounds {p.arrival_max}")

    x[2] -= min(x[2], p.exit_flow)
    if u[1] == 0:
        _transfer(x, 1, 2, p.mainline_flow, cap)
    else:
        _transfer(x, 4, 2, p.side_flow, cap)
    if u[0] == 0:
        _transfer(x, 0, 1, p.mainline_flow, cap)
    else:
        _transfer(x, 3, 1, p.side_flow, cap)
    for road, arriving in zip(ENTRY_ROADS, w):
        x[road] += min(int(arriving), cap[road] - x[road])
    return x


def violates(x) -> bool:
    return any(v >= lim for v, lim in zip(x, SAFE_LIMITS))


def label_step(x_next) -> int:
    """1 when ``x_next`` breaks any congestion limit."""
    return int(violates(x_next))


def simulate(p: TrafficParams, length: int, seed: int) -> SimRun:
    """One run of ``length`` steps, i.e. ``length + 1`` time points."""
    if length < 1:
        raise ValidationError("length must be at least 1")
    rng = np.random.default_rng(seed)
    x = [int(rng.integers(0, c + 1)) for c in p.capacities]
    states, controls = [], []
    for _ in range(length + 1):
        u = [int(v) for v in rng.integers(0, 2, size=2)]
        w = [int(rng.integers(0, hi + 1)) for hi in p.arrival_max]
        states.append(x)
        controls.append(u)
        x = step(x, u, w, p)
    # x now holds the successor of the final state; it is not part of the trace
    labels = np.array([label_step(s) for s in states[1:]] + [0], dtype=np.int8)
    state_rate = float(np.mean([violates(s) for s in states]))
    return SimRun(
        Trace(states, controls),
        labels,
        int(seed),
        float(labels.mean()),
        state_rate,
    )


def derive_seeds(master_seed: int, runs: int) -> list:
    seq = np.random.SeedSequence(master_seed)
    return [int(s) for s in seq.generate_state(runs, dtype=np.uint32)]


def generate_runs(p: TrafficParams, runs: int, length: int, master_seed: int) -> list:
    if runs < 1:
        raise ValidationError("runs must be at least 1")
    return [simulate(p, length, s) for s in derive_seeds(master_seed, runs)]


def generate_dataset(p: TrafficParams, runs: int, length: int, master_seed: int) -> Dataset:
    sims = generate_runs(p, runs, length, master_seed)
    return Dataset(p.signature(), [(r.trace, r.labels) for r in sims])
