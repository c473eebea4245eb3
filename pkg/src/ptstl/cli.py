"""Command-line entry point: ``ptstl simulate|mine|eval|check|rewrite``.

Results go to stdout, diagnostics to stderr.  Exit codes: 0 success,
1 usage error, 2 data or validation error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import io
from .controllability import check_formula
from .errors import BudgetError, ValidationError
from .miner import MiningConfig, mine
from .monitor import Dataset, confusion, f_beta
from .parser import format_number, parse, to_text
from .rewrite import push_negations, to_cnf, to_x_normal_form
from .traffic import TrafficParams, derive_seeds, generate_runs

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("ptstl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _signature(args):
    if getattr(args, "dataset", None):
        return io.signature_from_dict(io.read_manifest(args.dataset)["signature"])
    if getattr(args, "config", None):
        return io.load_run_config(args.config).traffic.signature()
    return TrafficParams().signature()


def _run_config(args):
    return io.load_run_config(args.config) if args.config else io.RunConfig()


def cmd_simulate(args, out):
    cfg = _run_config(args)
    runs = args.runs if args.runs is not None else cfg.simulation.runs
    length = args.length if args.length is not None else cfg.simulation.length
    if runs < 1 or length < 1:
        raise ValidationError("--runs and --length must be positive")
    sims = generate_runs(cfg.traffic, runs, length, args.seed)
    ds = Dataset(cfg.traffic.signature(), [(r.trace, r.labels) for r in sims])
    io.write_dataset(args.out, ds, seeds=[r.seed for r in sims])
    state_rate = sum(r.state_violation_rate * len(r.trace) for r in sims) / ds.n_points
    print(f"wrote {runs} traces ({ds.n_points} points) to {args.out}", file=out)
    print(f"congestion rate (labels): {ds.positive_rate:.4f}", file=out)
    print(f"congestion rate (states): {state_rate:.4f}", file=out)
    return EXIT_OK


def _mining_dataset(args, cfg):
    path = args.dataset or cfg.dataset
    if path:
        return io.read_dataset(path), {"source": "files", "seeds": io.dataset_seeds(path)}
    if args.seed is None:
        raise UsageError("mine: without a dataset, --seed is required to simulate one")
    sim = cfg.simulation
    sims = generate_runs(cfg.traffic, sim.runs, sim.length, args.seed)
    ds = Dataset(cfg.traffic.signature(), [(r.trace, r.labels) for r in sims])
    return ds, {"source": "simulated", "master_seed": args.seed, "runs": sim.runs,
                "length": sim.length, "seeds": derive_seeds(args.seed, sim.runs)}


def cmd_mine(args, out):
    cfg = _run_config(args)
    overrides = {k: getattr(args, k) for k in ("total_oc_lo", "total_oc_hi", "min_gain", "beta")
                 if getattr(args, k) is not None}
    if args.p_max is not None:
        overrides["p_max"] = None if args.p_max == "inf" else _positive_int(args.p_max)
    if overrides:
        params = {k: getattr(cfg.mining, k) for k in ("total_oc_lo", "total_oc_hi", "p_max",
                                                     "min_gain", "beta", "tie_break",
                                                     "template_cap", "search_cap")}
        params.update(overrides)
        cfg.mining = MiningConfig(**params)
    ds, origin = _mining_dataset(args, cfg)
    result = mine(ds, cfg.space, cfg.mining)
    record = result.to_record()
    record["dataset"] = {
        **origin,
        "traces": len(ds),
        "points": ds.n_points,
        "positives": sum(int(lab.sum()) for _, lab in ds.items),
    }
    text = json.dumps(record, indent=2, sort_keys=True) + "\n"
    target = args.out or cfg.output
    if target:
        with open(target, "w") as fh:
            fh.write(text)
        log.info("result record written to %s", target)
    out.write(result.report())
    if not target:
        out.write(text)
    return EXIT_OK


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"expected a positive integer or 'inf', got {text!r}") from None
    if value < 1:
        raise UsageError(f"expected a positive integer or 'inf', got {text!r}")
    return value


def cmd_eval(args, out):
    ds = io.read_dataset(args.dataset)
    phi = parse(args.formula, ds.signature)
    c = confusion(ds, phi)
    print(f"formula: {to_text(phi)}", file=out)
    print(f"tp={c.tp} fp={c.fp} fn={c.fn} tn={c.tn}", file=out)
    agree = c.tp + c.tn
    print(f"label agreement: {agree}/{c.total} = {agree / c.total:.4f}", file=out)
    print(f"F_beta (beta={format_number(args.beta)}): {f_beta(c, args.beta):.6f}", file=out)
    return EXIT_OK


def cmd_check(args, out):
    sig = _signature(args)
    phi = parse(args.formula, sig)
    res = check_formula(phi, sig, args.cap)
    v = res.verdict
    print(f"formula: {to_text(phi)}", file=out)
    if res.route == "none":
        print("verdict: not certified (no pure-control part)", file=out)
        return EXIT_OK
    print(f"control part: {to_text(res.phi_u)}", file=out)
    print(f"verdict: {v.describe()}", file=out)
    print(f"horizon: {v.horizon}, assignments examined: {v.search_size}", file=out)
    return EXIT_OK


def cmd_rewrite(args, out):
    phi = parse(args.formula)
    xnf = to_x_normal_form(phi, args.budget)
    if args.form in ("xnf", "all"):
        print(f"x-normal: {to_text(xnf)}", file=out)
    nnf = push_negations(xnf)
    if args.form in ("nnf", "all"):
        print(f"nnf: {to_text(nnf)}", file=out)
    if args.form in ("cnf", "all"):
        clauses = to_cnf(nnf, args.budget)
        print(f"cnf: {len(clauses)} clause(s)", file=out)
        for c in clauses:
            tag = "control" if c.pure_control else "mixed"
            print(f"  [{tag}] {to_text(c.to_formula())}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ptstl", description="Mine controllable past-time STL causes from labeled traces.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a labeled traffic dataset")
    s.add_argument("--seed", type=int, required=True, help="master seed")
    s.add_argument("--out", required=True, help="dataset directory to write")
    s.add_argument("--runs", type=int)
    s.add_argument("--length", type=int, help="steps per run (time points = length + 1)")
    s.add_argument("--config", help="run configuration JSON (traffic/simulation sections)")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("mine", help="mine a disjunction of controllable causes")
    m.add_argument("--dataset", help="dataset directory; simulated from --seed when absent")
    m.add_argument("--config", help="run configuration JSON")
    m.add_argument("--seed", type=int, help="master seed for an on-the-fly dataset")
    m.add_argument("--out", help="write the JSON result record here")
    m.add_argument("--lo", dest="total_oc_lo", type=int)
    m.add_argument("--hi", dest="total_oc_hi", type=int)
    m.add_argument("--p-max", dest="p_max", help="positive integer or 'inf'")
    m.add_argument("--min-gain", dest="min_gain", type=float)
    m.add_argument("--beta", type=float)
    m.set_defaults(func=cmd_mine)

    e = sub.add_parser("eval", help="confusion counts and F_beta of a formula")
    e.add_argument("formula")
    e.add_argument("--dataset", required=True)
    e.add_argument("--beta", type=float, default=1.0)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("check", help="controllability verdict and witness")
    c.add_argument("formula")
    c.add_argument("--dataset", help="take the system signature from this dataset")
    c.add_argument("--config", help="take the system signature from this run configuration")
    c.add_argument("--cap", type=int, default=2**20, help="maximum assignments to examine")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("rewrite", help="show X-normal, negation normal and clause forms")
    r.add_argument("formula")
    r.add_argument("--form", choices=("xnf", "nnf", "cnf", "all"), default="all")
    r.add_argument("--budget", type=int, default=10**6, help="node budget")
    r.set_defaults(func=cmd_rewrite)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    handler = logging.StreamHandler(err)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    root = logging.getLogger("ptstl")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(exc, file=err)
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=err)
        return EXIT_BUDGET
    except ValidationError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
