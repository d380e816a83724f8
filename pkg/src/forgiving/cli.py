"""Command-line front end.

    forgiving-graph gen --gen random n0=16 steps=100 --seed 7 --out t.jsonl
    forgiving-graph run --trace t.jsonl --out report.json
    forgiving-graph verify --gen star 9
    forgiving-graph bench [--calibrate]

Exit status: 0 when every checked bound holds, 1 on a violation, 2 on bad
input (usage errors, unreadable or malformed traces).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import adversary
from .adversary import Trace, TraceError
from .netsim import ROUND_CONST, ProtocolError
from .runner import run_trace

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2

GEN_PARAMS = {
    "random": ("n0", "steps", "p_delete"),
    "star": ("n",),
    "maxdeg": ("n0", "steps", "p_delete"),
}


class InputError(Exception):
    pass


def parse_gen(spec: list[str]) -> tuple[str, dict[str, str]]:
    """``NAME [k=v | v]...``; bare values fill the generator's parameters in order."""
    name, *rest = spec
    if name not in GEN_PARAMS:
        raise InputError(f"unknown generator {name!r} (choose from {', '.join(GEN_PARAMS)})")
    names = GEN_PARAMS[name]
    params: dict[str, str] = {}
    for i, item in enumerate(rest):
        if "=" in item:
            k, v = item.split("=", 1)
        elif i < len(names):
            k, v = names[i], item
        else:
            raise InputError(f"too many values for generator {name}")
        if k not in names:
            raise InputError(f"generator {name} has no parameter {k!r}")
        params[k] = v
    return name, params


def generate(name: str, params: dict[str, str], seed: int) -> Trace:
    try:
        return adversary.GENERATORS[name](seed, **params)
    except ValueError as exc:
        raise InputError(f"bad parameters for {name}: {exc}") from None


def load_trace(args) -> Trace:
    if args.trace is not None:
        try:
            text = Path(args.trace).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {args.trace}: {exc.strerror}") from None
        try:
            trace = adversary.loads_trace(text)
        except TraceError as exc:
            raise InputError(f"{args.trace}: {exc}") from None
        if args.seed is not None:
            trace.seed = args.seed
    else:
        name, params = parse_gen(args.gen)
        trace = generate(name, params, 0 if args.seed is None else args.seed)
    try:
        trace.validate()
    except TraceError as exc:
        raise InputError(f"invalid trace: {exc}") from None
    return trace


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_log(path: str, fg) -> None:
    with open(path, "w") as fh:
        fg.net.write_log(fh)


def cmd_gen(args) -> int:
    if args.gen is None:
        raise InputError("gen needs --gen NAME [k=v ...]")
    name, params = parse_gen(args.gen)
    trace = generate(name, params, 0 if args.seed is None else args.seed)
    _write(args.out, adversary.dumps_trace(trace))
    return EXIT_OK


def cmd_run(args) -> int:
    trace = load_trace(args)
    result = run_trace(trace, check=args.check, round_const=args.round_const, stretch_limit=args.stretch_limit)
    _write(args.out, result.to_json())
    if args.log:
        _write_log(args.log, result.fg)
    for v in result.violations[:20]:
        print(v, file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_verify(args) -> int:
    trace = load_trace(args)
    result = run_trace(
        trace,
        check="step",
        round_const=args.round_const,
        stretch_limit=args.stretch_limit,
        structure=True,
        stop_on_failure=True,
    )
    if result.ok:
        print(f"ok: {len(trace.actions)} actions, seed {trace.seed}")
        return EXIT_OK
    step = result.failed_step
    print(f"FAIL at step {step}:", file=sys.stderr)
    for v in result.violations:
        print(f"  {v}", file=sys.stderr)
    prefix = args.out or "verify-failure"
    snap = {
        "seed": trace.seed,
        "step": step,
        "action": None if not step else repr(trace.actions[step - 1]),
        "violations": result.violations,
        "state": result.fg.snapshot(),
    }
    Path(f"{prefix}.state.json").write_text(json.dumps(snap, indent=1) + "\n")
    _write_log(f"{prefix}.messages.jsonl", result.fg)
    print(f"state snapshot in {prefix}.state.json, message log in {prefix}.messages.jsonl", file=sys.stderr)
    return EXIT_VIOLATION


def cmd_bench(args) -> int:
    from . import bench

    print(f"{'n':>6} {'numba ms':>10} {'numpy ms':>10}")
    for t in bench.kernel_timings():
        nb = f"{t.numba_s * 1e3:10.2f}" if t.numba_s is not None else f"{'n/a':>10}"
        print(f"{t.n:6d} {nb} {t.numpy_s * 1e3:10.2f}")
    print(f"simulation: {bench.simulation_rate():.0f} steps/s")
    if args.calibrate:
        cal = bench.calibrate_rounds(seeds=args.seeds)
        print(f"round constant: measured {cal.worst:.3f}, configured {ROUND_CONST}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="forgiving-graph", description="self-healing overlay simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def trace_opts(p, required=True):
        src = p.add_mutually_exclusive_group(required=required)
        src.add_argument("--trace", metavar="PATH", help="trace file to replay")
        src.add_argument("--gen", nargs="+", metavar="NAME k=v", help="generate a trace: random, star or maxdeg")
        p.add_argument("--seed", type=int, help="generator seed (default 0); overrides a trace file's seed")
        p.add_argument("--out", metavar="PATH", help="output path (default stdout)")

    def check_opts(p):
        p.add_argument("--round-const", type=float, default=ROUND_CONST, metavar="C")
        p.add_argument(
            "--stretch-limit",
            type=int,
            default=512,
            metavar="N",
            help="skip the all-pairs stretch check while |G'| > N (default 512)",
        )

    p = sub.add_parser("run", help="replay a trace and write a report")
    trace_opts(p)
    check_opts(p)
    p.add_argument("--check", choices=("step", "final"), default="step")
    p.add_argument("--log", metavar="PATH", help="write the message log (JSON lines)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="check every invariant after every step")
    trace_opts(p)
    check_opts(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="write a generated trace")
    trace_opts(p, required=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="kernel timings and round-constant calibration")
    p.add_argument("--calibrate", action="store_true")
    p.add_argument("--seeds", type=int, default=3)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
