"""Acceptance suite: one test per numbered criterion, each printing PASS or FAIL.

Criterion 8 runs the command-line miner on the traffic data once and shares
the record with criteria 9 and 10.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from ptstl.controllability import check_formula, is_controllable_cause, is_controllable_pure
from ptstl.formula import (
    PURE_CONTROL,
    And,
    CtrlEQ,
    Historically,
    Or,
    Previously,
    Shift,
    Since,
    StateGT,
    SystemSignature,
    classify,
    op_count,
)
from ptstl.miner import MiningConfig, ParameterSpace, mine
from ptstl.monitor import Dataset, Trace, confusion, dataset_signal, eval_at, eval_signal, f_beta
from ptstl.parser import parse
from ptstl.rewrite import cnf_formula, normalize, push_negations, to_x_normal_form
from ptstl.traffic import TrafficParams, generate_dataset

from generators import SIG, random_formula, random_trace
from oracles import truth_table_controllable
from test_controllability import BIN, _control_templates, witness_refutes

TRAFFIC_SEED = 2024
FRESH_SEED = 777
PAIRINGS = {(1, 0, 4), (0, 0, 3), (0, 1, 0), (1, 1, 1)}  # (input, value, road)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def run_cli(*args):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "ptstl.cli", *args], capture_output=True, text=True)
    return proc, time.perf_counter() - start


def test_criterion_1_evaluator_oracle(capsys):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(500):
        phi = random_formula(rng, int(rng.integers(0, 4)), max_window=5)
        tr = random_trace(rng, 31)
        ref = [eval_at(tr, phi, k) for k in range(31)]
        mismatches += eval_signal(tr, phi).tolist() != ref
    elapsed = time.perf_counter() - start
    report(capsys, 1, mismatches == 0 and elapsed < 10, f"500 pairs, {mismatches} mismatches, {elapsed:.2f} s")


def test_criterion_2_rewrite_soundness(capsys):
    rng = np.random.default_rng(102)
    bad = 0
    for _ in range(250):
        phi = random_formula(rng, int(rng.integers(0, 4)))
        tr = random_trace(rng, 31)
        ref = eval_signal(tr, phi)
        xnf = to_x_normal_form(phi)
        forms = (xnf, push_negations(xnf), cnf_formula(normalize(phi)))
        bad += sum(not np.array_equal(eval_signal(tr, f), ref) for f in forms)
    shift_bad = 0
    for _ in range(200):
        sub = random_formula(rng, int(rng.integers(0, 3)))
        tr = random_trace(rng, 20)
        x = eval_signal(tr, Shift(1, sub))
        shift_bad += not (np.array_equal(x, eval_signal(tr, Previously(sub, (1, 1))))
                          and np.array_equal(x, eval_signal(tr, Historically(sub, (1, 1))))
                          and not x[0])
    report(capsys, 2, bad == 0 and shift_bad == 0,
           f"250 pairs x 3 forms, {bad} mismatches; one-step equivalence {shift_bad} failures")


def test_criterion_3_operator_count(capsys):
    rng = np.random.default_rng(103)
    p = CtrlEQ(0, 1)
    failures = 0
    for _ in range(1000):
        ops = int(rng.integers(0, 6))
        phi = random_formula(rng, ops)
        checks = [
            op_count(phi) == ops,
            op_count(Shift(int(rng.integers(0, 4)), phi)) == ops,
            op_count(And(phi, p)) == op_count(Or(p, phi)) == ops + 1,
            op_count(Previously(phi, (2, 0))) == op_count(Historically(phi, (1, 1))) == ops + 1,
            op_count(Since(phi, phi, (1, 0))) == 2 * ops + 1,
        ]
        failures += not all(checks)
    report(capsys, 3, failures == 0, f"1000 corpus formulas, {failures} failures")


def test_criterion_4_controllability(capsys):
    windows = [(a, b) for a in range(4) for b in range(a + 1)]
    levels = _control_templates(2, windows)
    seen, disagree, unsound = set(), 0, 0
    for level in levels:
        for phi in level:
            if phi in seen:
                continue
            seen.add(phi)
            v = is_controllable_pure(phi, BIN)
            disagree += v.controllable != truth_table_controllable(phi, BIN)
            if v.controllable:
                unsound += not witness_refutes(phi, v, BIN)
    example = check_formula(parse("(u1 == 1) && (x1 > 30)"), BIN).verdict
    example_ok = example.controllable and example.describe() == "controllable, witness u1=0"
    report(capsys, 4, disagree == 0 and unsound == 0 and example_ok,
           f"{len(seen)} formulas, {disagree} disagreements, {unsound} unsound witnesses; "
           f"example: {example.describe()}")


def test_criterion_5_witness_transfers_to_causes(capsys):
    rng = np.random.default_rng(105)
    found, failures = 0, 0
    while found < 150:
        phi_u = random_formula(rng, int(rng.integers(0, 3)), max_window=3, control_only=True)
        v = is_controllable_pure(phi_u, SIG)
        if not v.controllable:
            continue
        found += 1
        phi_xu = random_formula(rng, int(rng.integers(0, 3)), max_window=3)
        assert is_controllable_cause(phi_u, phi_xu, SIG) == v
        for _ in range(5):
            states = rng.uniform(-50, 50, (v.horizon + 1, SIG.n))
            failures += not witness_refutes(And(phi_u, phi_xu), v, SIG, states)
    report(capsys, 5, failures == 0, f"{found} controllable parts x 5 state fills, {failures} failures")


PLANT_SIG = SystemSignature(n=2, m=1, control_domains=((0, 1),))
PLANT_SPACE = ParameterSpace(((3.0, 6.0), (2.0, 5.0)), ((1, 0), (2, 1)))
PLANTS = [
    ("(u0 == 0) && (H[1,0] (x0 > 6))", MiningConfig(1, 1)),
    ("((u0 == 1) && (x0 > 6)) || ((u0 == 0) && (x1 > 5))", MiningConfig(0, 0)),
]


def test_criterion_6_planted_recovery(capsys):
    details, ok = [], True
    for i, (text, cfg) in enumerate(PLANTS):
        planted = parse(text)
        rng = np.random.default_rng(106 + i)
        items = []
        for _ in range(8):
            tr = Trace(rng.integers(0, 9, (40, 2)).astype(float), rng.integers(0, 2, (40, 1)).astype(float))
            items.append((tr, eval_signal(tr, planted)))
        ds = Dataset(PLANT_SIG, items)
        res = mine(ds, PLANT_SPACE, cfg)
        mask = ds.arrays.mask
        same = res.psi is not None and np.array_equal(dataset_signal(ds, res.psi)[mask],
                                                      dataset_signal(ds, planted)[mask])
        score = f_beta(confusion(ds, res.psi)) if res.psi is not None else 0.0
        ok = ok and same and score == 1.0
        details.append(f"plant {i + 1}: F1={score:.3f}, signals equal={same}")
    report(capsys, 6, ok, "; ".join(details))


def test_criterion_7_traffic_pipeline(capsys):
    start = time.perf_counter()
    ds = generate_dataset(TrafficParams(), 20, 100, TRAFFIC_SEED)
    elapsed = time.perf_counter() - start
    again = generate_dataset(TrafficParams(), 20, 100, TRAFFIC_SEED)
    same = all(np.array_equal(a.states, b.states) and np.array_equal(a.controls, b.controls)
               and np.array_equal(la, lb) for (a, la), (b, lb) in zip(ds.items, again.items))
    rate = ds.positive_rate
    ok = same and 0.35 <= rate <= 0.60 and elapsed < 5 and ds.n_points == 2020
    report(capsys, 7, ok, f"rate {rate:.3f}, deterministic={same}, {elapsed:.2f} s")


@pytest.fixture(scope="module")
def traffic_run(tmp_path_factory):
    """The oc in [0, 2], unbounded p, val=0.001 traffic run through the CLI."""
    d = tmp_path_factory.mktemp("traffic")
    cfg = d / "config.json"
    cfg.write_text(json.dumps({
        "mining": {"total_oc_lo": 0, "total_oc_hi": 2, "p_max": "inf", "min_gain": 0.001},
        "simulation": {"runs": 20, "length": 100},
    }))
    out = d / "record.json"
    proc, elapsed = run_cli("mine", "--config", str(cfg), "--seed", str(TRAFFIC_SEED), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    return cfg, out.read_bytes(), elapsed


def _pairings(record):
    found = set()
    for entry in record["disjuncts"]:
        u, xu = parse(entry["control_part"]), parse(entry["mixed_part"])
        if isinstance(u, CtrlEQ) and isinstance(xu, StateGT):
            found.add((u.var, int(u.value), xu.var))
    return found & PAIRINGS


def test_criterion_8_operator_range_zero_to_two(traffic_run, capsys):
    _, raw, elapsed = traffic_run
    record = json.loads(raw)
    sig = TrafficParams().signature()
    shape_ok = True
    for entry in record["disjuncts"]:
        u, xu = parse(entry["control_part"], sig), parse(entry["mixed_part"], sig)
        shape_ok &= parse(entry["formula"], sig) == And(u, xu)
        shape_ok &= classify(u) == PURE_CONTROL and 0 <= op_count(u) + op_count(xu) <= 2
        shape_ok &= is_controllable_cause(u, xu, sig).controllable
    pairs = _pairings(record)
    ok = elapsed < 300 and shape_ok and len(pairs) >= 2 and bool(record["disjuncts"])
    report(capsys, 8, ok,
           f"oc in [0,2]: {len(record['disjuncts'])} disjuncts, F1={record['final_score']:.3f}, "
           f"{len(pairs)}/4 pairings, shape and controllability {'ok' if shape_ok else 'broken'}, "
           f"{elapsed:.0f} s")


def _atom_and_guarded_state_shape(u, xu):
    if not isinstance(u, CtrlEQ) or not isinstance(xu, And):
        return False
    kinds = sorted(type(side).__name__ for side in (xu.left, xu.right))
    return kinds == ["CtrlEQ", "StateGT"]


def test_criterion_8_single_operator_shape(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "mining": {"total_oc_lo": 1, "total_oc_hi": 1, "p_max": 1},
        "simulation": {"runs": 20, "length": 100},
    }))
    out = tmp_path / "record.json"
    proc, _ = run_cli("mine", "--config", str(cfg), "--seed", str(TRAFFIC_SEED), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    record = json.loads(out.read_text())
    got = record["disjuncts"]
    ok = len(got) == 1 and _atom_and_guarded_state_shape(parse(got[0]["control_part"]), parse(got[0]["mixed_part"]))
    shown = got[0]["formula"] if got else "nothing"
    report(capsys, 8, ok, f"oc in [1,1], p=1: mined {shown}; "
                          "expected (u-atom) && ((state-atom) && (u-atom))")


def test_criterion_9_fresh_seed_quality(traffic_run, capsys):
    _, raw, _ = traffic_run
    record = json.loads(raw)
    fresh = generate_dataset(TrafficParams(), 20, 100, FRESH_SEED)
    psi = parse(record["psi"], fresh.signature)
    score = f_beta(confusion(fresh, psi))
    report(capsys, 9, score >= 0.6,
           f"F1 on fresh seed {FRESH_SEED}: {score:.3f} (training F1 {record['final_score']:.3f})")


def test_criterion_10_determinism(traffic_run, tmp_path, capsys):
    cfg, raw, _ = traffic_run
    out = tmp_path / "again.json"
    proc, _ = run_cli("mine", "--config", str(cfg), "--seed", str(TRAFFIC_SEED), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    same = out.read_bytes() == raw
    report(capsys, 10, same, f"second run record {'byte-identical' if same else 'differs'} "
                             f"({len(raw)} bytes)")
