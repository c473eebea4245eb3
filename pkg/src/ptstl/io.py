"""Dataset files and run configuration.

A dataset directory holds ``manifest.json`` plus one CSV file per trace::

    t,x0,...,x{n-1},u0,...,u{m-1},label
    0,12,3,0,7,2,1,0,1

Cells are integers when the value is integral and Python float reprs
otherwise.  Reading is strict: anything :func:`write_dataset` could not have
produced is rejected with the file, row and column where it went wrong.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError
from .formula import SystemSignature
from .miner import MiningConfig, ParameterSpace
from .monitor import Dataset, Trace
from .parser import format_number
from .traffic import TrafficParams

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
_NUMBER = re.compile(r"-?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$")


def header(sig: SystemSignature) -> list:
    return ["t"] + [f"x{j}" for j in range(sig.n)] + [f"u{i}" for i in range(sig.m)] + ["label"]


def trace_filename(index: int) -> str:
    return f"trace_{index:03d}.csv"


def signature_to_dict(sig: SystemSignature) -> dict:
    return {
        "n": sig.n,
        "m": sig.m,
        "control_domains": [list(d) for d in sig.control_domains],
        "state_bounds": [list(b) for b in sig.state_bounds],
    }


def _exact_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ValidationError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ValidationError(f"{where}: missing key(s) {', '.join(missing)}")


def signature_from_dict(obj) -> SystemSignature:
    _exact_keys(obj, ("n", "m", "control_domains", "state_bounds"), "signature",
                ("n", "m", "control_domains"))
    try:
        return SystemSignature(
            n=int(obj["n"]),
            m=int(obj["m"]),
            control_domains=tuple(tuple(d) for d in obj["control_domains"]),
            state_bounds=tuple(tuple(b) for b in obj.get("state_bounds", ())),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"signature: {exc}") from exc


def write_dataset(path, ds: Dataset, seeds=None) -> None:
    """Write ``ds`` as a dataset directory (created if needed)."""
    os.makedirs(path, exist_ok=True)
    sig = ds.signature
    if seeds is not None and len(seeds) != len(ds):
        raise ValidationError("need one seed per trace")
    entries = []
    positives = 0
    for idx, (trace, labels) in enumerate(ds.items):
        name = trace_filename(idx)
        with open(os.path.join(path, name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header(sig))
            for k in range(len(trace)):
                row = [k]
                row += [format_number(v) for v in trace.states[k]]
                row += [format_number(v) for v in trace.controls[k]]
                row.append(int(labels[k]))
                w.writerow(row)
        positives += int(np.count_nonzero(labels))
        entries.append({
            "file": name,
            "seed": None if seeds is None else int(seeds[idx]),
            "length": len(trace),
        })
    points = ds.n_points
    manifest = {
        "format_version": FORMAT_VERSION,
        "signature": signature_to_dict(sig),
        "traces": entries,
        "label_stats": {
            "points": points,
            "positives": positives,
            "rate": positives / points if points else 0.0,
        },
    }
    with open(os.path.join(path, MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _cell(text, where, column):
    if not _NUMBER.match(text):
        raise ValidationError(f"{where} column {column}: {text!r} is not a number")
    value = float(text)
    if not math.isfinite(value):
        raise ValidationError(f"{where} column {column}: {text!r} is not finite")
    return value


def _read_trace(file_path, sig, length):
    expected = header(sig)
    states, controls, labels = [], [], []
    with open(file_path, newline="") as fh:
        raw = fh.read()
    if raw and not raw.endswith("\n"):
        raise ValidationError(f"{file_path}: last row is not newline-terminated")
    rows = list(csv.reader(raw.splitlines()))
    if not rows or rows[0] != expected:
        got = ",".join(rows[0]) if rows else "<empty>"
        raise ValidationError(f"{file_path}: header {got!r}, expected {','.join(expected)!r}")
    for line, row in enumerate(rows[1:], start=2):
        where = f"{file_path} row {line}"
        if len(row) != len(expected):
            raise ValidationError(f"{where}: {len(row)} columns, expected {len(expected)}")
        cells = dict(zip(expected, row))
        if cells["t"] != str(line - 2):
            raise ValidationError(f"{where} column t: expected {line - 2}, found {cells['t']!r}")
        x = []
        for j in range(sig.n):
            v = _cell(cells[f"x{j}"], where, f"x{j}")
            if sig.state_bounds:
                lo, hi = sig.state_bounds[j]
                if not lo <= v <= hi:
                    raise ValidationError(
                        f"{where} column x{j}: {cells[f'x{j}']} outside [{lo}, {hi}]"
                    )
            x.append(v)
        u = []
        for i in range(sig.m):
            v = _cell(cells[f"u{i}"], where, f"u{i}")
            if v not in sig.control_domains[i]:
                dom = ", ".join(format_number(c) for c in sig.control_domains[i])
                raise ValidationError(
                    f"{where} column u{i}: {cells[f'u{i}']} not in domain {{{dom}}}"
                )
            u.append(v)
        if cells["label"] not in ("0", "1"):
            raise ValidationError(f"{where} column label: {cells['label']!r} is not 0 or 1")
        states.append(x)
        controls.append(u)
        labels.append(cells["label"] == "1")
    if len(states) != length:
        raise ValidationError(f"{file_path}: {len(states)} rows, manifest declares {length}")
    if length == 0:
        raise ValidationError(f"{file_path}: empty trace")
    trace = Trace(np.array(states).reshape(length, sig.n), np.array(controls).reshape(length, sig.m))
    return trace, np.array(labels, dtype=bool)


def read_manifest(path) -> dict:
    file_path = os.path.join(path, MANIFEST)
    try:
        with open(file_path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{file_path}: malformed JSON ({exc})") from exc
    _exact_keys(manifest, ("format_version", "signature", "traces", "label_stats"), file_path,
                ("format_version", "signature", "traces", "label_stats"))
    if manifest["format_version"] != FORMAT_VERSION:
        raise ValidationError(f"{file_path}: unsupported format_version {manifest['format_version']!r}")
    if not isinstance(manifest["traces"], list) or not manifest["traces"]:
        raise ValidationError(f"{file_path}: traces must be a non-empty list")
    for i, entry in enumerate(manifest["traces"]):
        _exact_keys(entry, ("file", "seed", "length"), f"{file_path} traces[{i}]",
                    ("file", "seed", "length"))
        if not isinstance(entry["length"], int) or entry["length"] < 1:
            raise ValidationError(f"{file_path} traces[{i}]: length must be a positive integer")
        if os.path.basename(entry["file"]) != entry["file"]:
            raise ValidationError(f"{file_path} traces[{i}]: file must be a plain name")
    _exact_keys(manifest["label_stats"], ("points", "positives", "rate"),
                f"{file_path} label_stats", ("points", "positives", "rate"))
    return manifest


def read_dataset(path) -> Dataset:
    """Load and validate a directory written by :func:`write_dataset`."""
    manifest = read_manifest(path)
    sig = signature_from_dict(manifest["signature"])
    items = []
    for entry in manifest["traces"]:
        file_path = os.path.join(path, entry["file"])
        if not os.path.isfile(file_path):
            raise ValidationError(f"{file_path}: listed in the manifest but missing")
        items.append(_read_trace(file_path, sig, entry["length"]))
    ds = Dataset(sig, items)
    stats = manifest["label_stats"]
    positives = sum(int(np.count_nonzero(lab)) for _, lab in items)
    if stats["points"] != ds.n_points or stats["positives"] != positives:
        raise ValidationError(
            f"{os.path.join(path, MANIFEST)}: label_stats disagree with the trace files"
        )
    return ds


def dataset_seeds(path) -> list:
    return [e["seed"] for e in read_manifest(path)["traces"]]


# -- run configuration -------------------------------------------------------


@dataclass
class SimulationConfig:
    runs: int = 20
    length: int = 100


@dataclass
class RunConfig:
    space: ParameterSpace = field(default_factory=ParameterSpace.traffic_default)
    mining: MiningConfig = field(default_factory=MiningConfig)
    traffic: TrafficParams = field(default_factory=TrafficParams)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    dataset: Optional[str] = None
    output: Optional[str] = None


_MINING_KEYS = ("total_oc_lo", "total_oc_hi", "p_max", "min_gain", "beta", "tie_break",
                "template_cap", "search_cap")
_TRAFFIC_KEYS = ("capacities", "mainline_flow", "side_flow", "exit_flow", "arrival_max")


def _p_max(value):
    if value is None or value == "inf":
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError("mining.p_max must be a positive integer, null or \"inf\"")
    return value


def run_config_from_dict(obj, base_dir=".") -> RunConfig:
    _exact_keys(obj, ("grids", "mining", "traffic", "simulation", "dataset", "output"), "config")
    cfg = RunConfig()
    try:
        if "grids" in obj:
            g = obj["grids"]
            _exact_keys(g, ("state_thresholds", "window_bounds"), "config.grids",
                        ("state_thresholds", "window_bounds"))
            cfg.space = ParameterSpace(g["state_thresholds"], g["window_bounds"])
        if "mining" in obj:
            m = dict(obj["mining"]) if isinstance(obj["mining"], dict) else obj["mining"]
            _exact_keys(m, _MINING_KEYS, "config.mining")
            if "p_max" in m:
                m["p_max"] = _p_max(m["p_max"])
            cfg.mining = MiningConfig(**m)
        if "traffic" in obj:
            _exact_keys(obj["traffic"], _TRAFFIC_KEYS, "config.traffic")
            cfg.traffic = TrafficParams(**obj["traffic"])
        if "simulation" in obj:
            _exact_keys(obj["simulation"], ("runs", "length"), "config.simulation")
            cfg.simulation = SimulationConfig(**obj["simulation"])
    except TypeError as exc:
        raise ValidationError(f"config: {exc}") from exc
    for key in ("dataset", "output"):
        if obj.get(key) is not None:
            if not isinstance(obj[key], str):
                raise ValidationError(f"config.{key} must be a path string")
            setattr(cfg, key, os.path.join(base_dir, obj[key]))
    sim = cfg.simulation
    if not (isinstance(sim.runs, int) and sim.runs >= 1 and isinstance(sim.length, int) and sim.length >= 1):
        raise ValidationError("config.simulation: runs and length must be positive integers")
    return cfg


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc})") from exc
    return run_config_from_dict(obj, os.path.dirname(os.path.abspath(path)))
