"""Command-line front end.

    anyonweave verify [--golden PATH] [--output human|json]
    anyonweave basis 1 2 2 1 [--total 0]
    anyonweave run SCRIPT [--seed N | --force 0,0,... | --forced | --enumerate] [--input 11]
    anyonweave extract-gate SCRIPT [--golden EG|CEG|REC4] [--no-final-twist]
    anyonweave stats SCRIPT [--runs N] [--seed N]

Sampling uses numpy's PCG64 bit generator seeded with the given integer, one
uniform draw per measurement that has more than one possible outcome.
Numbers are printed with 12 significant digits. Exit codes: 0 success,
1 mismatch or failed check, 2 impossible forced outcome, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import category, gates
from .hilbert import AnyonState, HilbertError, ImpossibleOutcome, enumerate_basis
from .protocol import (
    DEFAULT_BUDGET,
    ParseError,
    ProtocolError,
    StepBudgetExceeded,
    execute,
    load_script,
    qutrit_state,
    sample_counts,
    terminal_distribution,
)

EXIT_OK, EXIT_FAIL, EXIT_IMPOSSIBLE, EXIT_USAGE = 0, 1, 2, 64
RNG_NAME = "numpy.random.PCG64"

# thresholds of the category self-checks
VERIFY_TOLERANCES = {"pentagon": 1e-10, "hexagon": 1e-10, "unitarity": 1e-12,
                     "dimension": 1e-12, "ribbon": 1e-10, "oracle": 1e-9}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def g12(x: float) -> float:
    """Round to 12 significant digits; magnitudes below 1e-12 print as 0."""
    return 0.0 if abs(x) < 1e-12 else float(f"{x:.12g}")


def _num(z) -> object:
    z = complex(z)
    return g12(z.real) if z.imag == 0 else [g12(z.real), g12(z.imag)]


def _fmt(z: complex) -> str:
    z = complex(z)
    re, im = g12(z.real) + 0.0, g12(z.imag) + 0.0
    return f"{re:.12g}{im:+.12g}j"


def _emit(obj) -> None:
    print(json.dumps(obj))


# -- verify -------------------------------------------------------------------------

def cmd_verify(args) -> int:
    path = args.golden or os.environ.get("ANYONWEAVE_GOLDEN") or category.GOLDEN_PATH
    report = {}
    data = category.su2_4()
    for name, fn in (("pentagon", category.pentagon_residual), ("hexagon", category.hexagon_residual),
                     ("unitarity", category.unitarity_residual), ("dimension", category.dimension_residual),
                     ("ribbon", category.ribbon_residual)):
        res = fn(data)
        report[name] = {"pass": bool(res < VERIFY_TOLERANCES[name]), "residual": g12(res)}
    try:
        bad = category.golden_mismatches(category.load_golden(path), data, VERIFY_TOLERANCES["oracle"])
        entry = {"pass": not bad, "mismatches": len(bad), "golden": str(path)}
        if bad:
            key, dev = bad[0]
            entry["first"] = {"symbol": key, "deviation": None if math.isinf(dev) else g12(dev)}
    except (OSError, ValueError) as exc:
        entry = {"pass": False, "golden": str(path), "error": str(exc)}
    report["oracle"] = entry
    ok = all(v["pass"] for v in report.values())
    if args.output == "json":
        _emit({"pass": ok, "checks": report})
    else:
        for name, v in report.items():
            detail = f"residual {v['residual']:.3g}" if "residual" in v else (
                v.get("error") or f"{v['mismatches']} mismatching symbols")
            if "first" in v:
                detail += f"; first: {v['first']['symbol']} (deviation {v['first']['deviation']})"
            print(f"{name:10s} {'PASS' if v['pass'] else 'FAIL'}  {detail}")
    return EXIT_OK if ok else EXIT_FAIL


# -- basis ------------------------------------------------------------------------------

def cmd_basis(args) -> int:
    labels = enumerate_basis(args.leaves, args.total)
    if args.output == "json":
        _emit({"leaves": args.leaves, "total": args.total, "dimension": len(labels),
               "internal": [list(x.internal) for x in labels]})
    else:
        print(f"leaves {' '.join(map(str, args.leaves))} total {args.total}: dimension {len(labels)}")
        for x in labels:
            print("  " + " ".join(map(str, x.internal)))
    return EXIT_OK


# -- shared helpers for script commands -------------------------------------------------

def _options(args, script) -> dict:
    opts = {}
    for item in args.option or ():
        key, sep, val = item.partition("=")
        if not sep or val not in ("on", "off"):
            raise UsageError(f"--option expects flag=on|off, got {item!r}")
        opts[key] = val == "on"
    if getattr(args, "no_final_twist", False):
        opts["final_twist"] = False
    try:
        return script.resolve_options(opts)
    except ProtocolError as exc:
        raise UsageError(str(exc)) from None


def _charges(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"expected comma-separated charges, got {text!r}") from None


def make_input(text: str | None, script) -> AnyonState:
    """Input state from '11', '13', '31', '33', 'bell', 'qutrit:c0,c2,c4' or a JSON state file."""
    if text is None:
        if script.leaves == gates.REGISTER:
            text = "11"
        elif script.leaves == (2, 2, 2, 2):
            text = "qutrit:1,1,1"
        else:
            return AnyonState.from_vector(script.leaves, script.total,
                                          np.eye(1, len(enumerate_basis(script.leaves, script.total)))[0])
    if text in gates.BASIS:
        return gates.register_state({text: 1})
    if text == "bell":
        return gates.register_state({"11": 1, "33": 1})
    if text.startswith("qutrit:"):
        try:
            c = [complex(t) for t in text[len("qutrit:"):].split(",")]
        except ValueError:
            raise UsageError(f"bad qutrit amplitudes in {text!r}") from None
        if len(c) != 3:
            raise UsageError("qutrit input needs three amplitudes c0,c2,c4")
        return qutrit_state(*c)
    p = Path(text)
    if p.is_file():
        return AnyonState.from_json(json.loads(p.read_text(encoding="utf-8")))
    raise UsageError(f"unknown input {text!r}; use 11, 13, 31, 33, bell, qutrit:c0,c2,c4 or a state file")


def _load(name):
    try:
        return load_script(name)
    except ParseError:
        raise
    except ProtocolError as exc:
        raise UsageError(str(exc)) from None


def _outcome_json(o) -> dict:
    d = o.to_json()
    d["probability"] = g12(d["probability"])
    return d


def trace_lines(trace, dump: bool = False) -> list[dict]:
    rows = [_outcome_json(o) for o in trace.outcomes]
    last = {"script": trace.script, "rng": RNG_NAME if trace.seed is not None else None,
            "seed": trace.seed, "forced": list(trace.forced) if trace.forced is not None else None,
            "result": trace.tag, "probability": g12(trace.probability), "steps": trace.steps,
            "end_line": trace.end_line}
    if dump:
        state = trace.final_state.to_json()
        for e in state["amplitudes"]:
            e["re"], e["im"] = g12(e["re"]), g12(e["im"])
        last["state"] = state
    rows.append(last)
    return rows


# -- run ------------------------------------------------------------------------------------

def cmd_run(args) -> int:
    script = _load(args.script)
    opts = _options(args, script)
    state = make_input(args.input, script)
    if args.enumerate:
        en = execute(script, state, "enumerate", options=opts, budget=args.budget)
        for k, t in enumerate(en.traces):
            row = {"pass": k, "forced": list(t.forced), "outcomes": [_outcome_json(o) for o in t.outcomes],
                   "result": t.tag,
                   "probability": g12(t.probability), "end_line": t.end_line}
            if args.dump:
                row["state"] = trace_lines(t, True)[-1]["state"]
            _emit(row)
        _emit({"script": script.name, "passes": len(en.traces), "total": g12(en.total),
               "terminals": [{"end_line": line, "result": tag, "probability": g12(p)}
                             for (line, tag), p in sorted(en.terminals.items())]})
        return EXIT_OK
    if args.force is not None or args.forced:
        plan = _charges(args.force) if args.force is not None else None
        trace = execute(script, state, "forced", outcomes=plan, options=opts, budget=args.budget)
    else:
        trace = execute(script, state, "sample", seed=args.seed, options=opts, budget=args.budget)
    for row in trace_lines(trace, args.dump):
        _emit(row)
    return EXIT_OK


# -- extract-gate ---------------------------------------------------------------------------

def cmd_extract_gate(args) -> int:
    script = _load(args.script)
    opts = _options(args, script)
    plan = _charges(args.force) if args.force is not None else None
    try:
        u = gates.extract_gate(script, plan, options=opts, tol=args.tol)
    except gates.GateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = {"script": script.name, "basis": list(gates.BASIS),
           "gate": [[_num(z) for z in row] for row in u]}
    ok = True
    if args.golden:
        dev = gates.phase_deviation(u, gates.GOLDEN_GATES[args.golden])
        ok = dev <= args.tol
        out["golden"] = {"name": args.golden, "match": ok, "deviation": g12(dev)}
    if args.output == "json":
        _emit(out)
    else:
        print(f"gate of {script.name} on |11>, |13>, |31>, |33>:")
        for row in u:
            print("  " + "  ".join(f"{_fmt(z):>34s}" for z in row))
        if args.golden:
            verdict = "matches" if ok else "does NOT match"
            print(f"{verdict} {args.golden} up to global phase (max deviation {g12(dev):.3g})")
    return EXIT_OK if ok else EXIT_FAIL


# -- stats ------------------------------------------------------------------------------------

def cmd_stats(args) -> int:
    script = _load(args.script)
    opts = _options(args, script)
    state = make_input(args.input, script)
    exact = terminal_distribution(script, state, opts, args.budget)
    counts = sample_counts(script, state, args.runs, args.seed, opts)
    rows, worst = [], 0.0
    for key in sorted(set(exact) | set(counts)):
        p, n = exact.get(key, 0.0), counts.get(key, 0)
        sd = math.sqrt(args.runs * p * (1 - p))
        z = (n - args.runs * p) / sd if sd > 0 else (0.0 if n == args.runs * p else math.inf)
        worst = max(worst, abs(z))
        rows.append({"end_line": key[0], "result": key[1], "count": n, "probability": g12(p), "z": g12(z)})
    ok = worst <= args.sigma
    if args.output == "json":
        _emit({"script": script.name, "rng": RNG_NAME, "seed": args.seed, "runs": args.runs,
               "branches": rows, "max_abs_z": g12(worst), "pass": ok})
    else:
        print(f"{script.name}: {args.runs} runs, seeds {args.seed}..{args.seed + args.runs - 1} ({RNG_NAME})")
        for r in rows:
            print(f"  line {r['end_line']:4d} {str(r['result']):18s} {r['count']:8d}  "
                  f"p={r['probability']:.6g}  z={r['z']:+.2f}")
        print(f"max |z| = {worst:.2f} ({'within' if ok else 'outside'} {args.sigma} sigma)")
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point --------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="anyonweave", description="SU(2)_4 anyon simulator and gate protocols.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def out_flag(sp):
        sp.add_argument("--output", choices=("human", "json"), default="human")

    def script_flags(sp):
        sp.add_argument("script", help="shipped script name or path to a .proto file")
        sp.add_argument("--option", action="append", metavar="FLAG=on|off", help="override a script option")
        sp.add_argument("--no-final-twist", action="store_true", help="same as --option final_twist=off")
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="step budget (default %(default)s)")

    sp = sub.add_parser("verify", help="check the category data")
    sp.add_argument("--golden", help="golden symbol file (default: $ANYONWEAVE_GOLDEN or the shipped file)")
    out_flag(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("basis", help="list fusion-tree labels")
    sp.add_argument("leaves", type=int, nargs="+")
    sp.add_argument("--total", type=int, default=0)
    out_flag(sp)
    sp.set_defaults(func=cmd_basis)

    sp = sub.add_parser("run", help="run a protocol script, printing a JSON-lines trace")
    script_flags(sp)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--seed", type=int, default=0, help=f"sample with {RNG_NAME}(seed) (default 0)")
    mode.add_argument("--force", metavar="C,C,...", help="forced measurement outcomes")
    mode.add_argument("--forced", action="store_true", help="force the script's plan")
    mode.add_argument("--enumerate", action="store_true", help="list every loop-free pass")
    sp.add_argument("--input", help="11, 13, 31, 33, bell, qutrit:c0,c2,c4 or a state JSON file")
    sp.add_argument("--dump", action="store_true", help="include the final state")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("extract-gate", help="gate realized along a forced path")
    script_flags(sp)
    sp.add_argument("--force", metavar="C,C,...", help="forced outcomes (default: the script's plan)")
    sp.add_argument("--golden", choices=sorted(gates.GOLDEN_GATES))
    sp.add_argument("--tol", type=float, default=1e-9)
    out_flag(sp)
    sp.set_defaults(func=cmd_extract_gate)

    sp = sub.add_parser("stats", help="sampled branch frequencies against exact probabilities")
    script_flags(sp)
    sp.add_argument("--runs", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--input")
    sp.add_argument("--sigma", type=float, default=3.0, help="allowed |z| per branch")
    out_flag(sp)
    sp.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("budget", "runs"):
        if getattr(args, name, 1) <= 0:
            print(f"error: --{name} must be positive", file=sys.stderr)
            return EXIT_USAGE
    if getattr(args, "tol", 1) <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ImpossibleOutcome as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except (UsageError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StepBudgetExceeded, ProtocolError, HilbertError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
