"""Command-line front end.

One subcommand per stage of the toolchain: parse, check, typecheck, run,
compile, simulate, verify, subtype.  Exit codes: 0 success or Pass, 1 a
definite failure (type error, well-formedness violation, property Fail),
2 usage or parse errors, 3 a bounded search that ran out of room.

Traces and verification reports print to stdout; everything diagnostic
goes to stderr as ``file:line:col: message``.  Output for a fixed input
and seed is byte-identical between runs.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from typing import Optional

from .encoder import EncodingUndefined, encode_component
from .harness import (
    DEFAULT_DOMAINS, ExplorationConfig, all_domain_values, check_completeness,
    check_preservation, check_progress, check_soundness,
)
from .localtypes import parse_type, pretty_type
from .parser import ParseError, parse, pretty
from .process import (
    PTau, Process, QueueSide, pretty_plabel, pretty_proc, plabel_action,
    proc_transitions,
)
from .semantics import component_transitions
from .subtyping import subtype
from .syntax import (
    BoolV, Component, HoleV, InL, InlV, InrV, IntV, OutL, StrV, TauL, Value,
    instantiate, pretty_value, value_sort_key,
)
from .typecheck import TypecheckError, TypecheckInconclusive, typecheck
from .wellformed import check_wf

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3


def _use_color() -> bool:
    if os.environ.get("GC_COLOR", "") == "0":
        return False
    return sys.stderr.isatty()


def _verdict_word(verdict: str) -> str:
    if not _use_color():
        return verdict
    code = {"Pass": "32", "Fail": "31", "Inconclusive": "33"}.get(verdict, "0")
    return f"\x1b[{code}m{verdict}\x1b[0m"


def _load(path: str) -> Component:
    with open(path) as f:
        text = f.read()
    return parse(text)


def _diag(path: str, line: Optional[int], col: Optional[int], msg: str) -> None:
    where = path
    if line is not None:
        where += f":{line}:{col}"
    print(f"{where}: {msg}", file=sys.stderr)


def _value_json(v: Value):
    match v:
        case IntV(n):
            return n
        case StrV(s):
            return s
        case BoolV(b):
            return b
        case InlV():
            return "inl"
        case InrV():
            return "inr"
    return pretty_value(v)


# ---------------------------------------------------------------------------
# Deterministic scheduler
# ---------------------------------------------------------------------------

def _transition_key(label, rule: str):
    match label:
        case OutL(p, v) | InL(p, v):
            return (rule, p, value_sort_key(v))
        case _:
            return (rule, "", ())


def _is_input(label) -> bool:
    return isinstance(label, InL)


def _run_trace(c: Component, steps: int, seed: Optional[int]) -> list[dict]:
    """Drive a component, preferring enabled non-input transitions in
    (rule, port, value) order; when only inputs remain, inject values
    round-robin from the default domains so open components keep moving.
    A seed swaps the lexicographic choice for a seeded random one."""
    rng = random.Random(seed) if seed is not None else None
    union = all_domain_values(DEFAULT_DOMAINS)
    spin: dict[str, int] = {}
    injected = 0
    out: list[dict] = []
    for i in range(steps):
        trans = component_transitions(c)
        loud = sorted(
            (t for t in trans if not _is_input(t.label)),
            key=lambda t: _transition_key(t.label, t.rule),
        )
        if loud:
            pick = rng.choice(loud) if rng else loud[0]
            label, c, det = pick.label, pick.target, pick.detail
            rule = pick.rule
        else:
            holes = sorted(
                (t for t in trans if _is_input(t.label)),
                key=lambda t: _transition_key(t.label, t.rule),
            )
            if not holes:
                break
            ports = sorted({t.label.port for t in holes})
            if rng:
                port = rng.choice(ports)
            else:
                port = ports[injected % len(ports)]
            injected += 1
            t = next(t for t in holes if t.label.port == port)
            assert isinstance(t.label.value, HoleV)
            btype = t.label.value.btype
            domain = DEFAULT_DOMAINS.get(btype, union) if btype else union
            if rng:
                v = rng.choice(list(domain))
            else:
                k = spin.get(port, 0)
                spin[port] = k + 1
                v = domain[k % len(domain)]
            label = InL(port, v)
            c, det, rule = instantiate(t.target, v), t.detail, t.rule
        out.append({"step": i, "label": label, "rule": rule, "det": det})
    return out


def _trace_label_json(entry: dict) -> dict:
    label, det = entry["label"], entry["det"]
    if isinstance(label, TauL):
        d: dict = {"kind": "tau"}
        if det is not None and len(det) == 5:
            d["port"] = det[3]
            d["value"] = _value_json(det[4])
        return d
    kind = "out" if isinstance(label, OutL) else "in"
    return {"kind": kind, "port": label.port, "value": _value_json(label.value)}


def _trace_line(entry: dict) -> str:
    label, det, rule = entry["label"], entry["det"], entry["rule"]
    match label:
        case OutL(p, v):
            desc = f"{p} ! {pretty_value(v)}"
        case InL(p, v):
            desc = f"{p} ? {pretty_value(v)}"
        case _ if det is not None and len(det) == 5:
            kind, role, lbl, port, v = det
            verb = "sends" if kind == "out" else "receives"
            mark = "!" if kind == "out" else "?"
            desc = f"{role} {verb} {lbl}: {port} {mark} {pretty_value(v)}"
        case _:
            desc = "tau"
    return f"{entry['step']:4d}  {desc:48s} {rule}"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_parse(args) -> int:
    c = _load(args.file)
    if args.pretty:
        print(pretty(c))
    return EXIT_OK


def cmd_check(args) -> int:
    c = _load(args.file)
    violations = check_wf(c)
    for v in violations:
        _diag(args.file, v.span.line if v.span else None,
              v.span.col if v.span else None, f"{v.code}: {v.message}")
    return EXIT_FAIL if violations else EXIT_OK


def cmd_typecheck(args) -> int:
    c = _load(args.file)
    t = parse_type(args.against)
    try:
        typecheck(c, t)
    except TypecheckError as e:
        _diag(args.file, None, None, f"type error: {e}")
        return EXIT_FAIL
    except TypecheckInconclusive as e:
        _diag(args.file, None, None, f"inconclusive: {e}")
        return EXIT_INCONCLUSIVE
    print(f"{args.file}: has type {pretty_type(t)}")
    return EXIT_OK


def cmd_run(args) -> int:
    c = _load(args.file)
    trace = _run_trace(c, args.steps, args.seed)
    if args.trace == "json":
        for entry in trace:
            print(json.dumps({
                "step": entry["step"],
                "label": _trace_label_json(entry),
                "rule": entry["rule"],
            }))
    else:
        for entry in trace:
            print(_trace_line(entry))
    return EXIT_OK


def cmd_compile(args) -> int:
    c = _load(args.file)
    try:
        p = encode_component(c, strict_base_roles=args.strict_base_roles)
    except EncodingUndefined as e:
        _diag(args.file, None, None, f"encoding undefined: {e}")
        return EXIT_FAIL
    text = pretty_proc(p)
    if args.output:
        with open(args.output, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _proc_key(t):
    a = plabel_action(t.label)
    if a is not None:
        port = a.port
        val = value_sort_key(a.value)
    elif isinstance(t.label, PTau):
        port = t.label.chan or ""
        val = value_sort_key(t.label.moved) if t.label.moved else ()
    else:
        port, val = "", ()
    return (t.rule, port, val)


def cmd_simulate(args) -> int:
    c = _load(args.file)
    try:
        p: Process = encode_component(c, strict_base_roles=args.strict_base_roles)
    except EncodingUndefined as e:
        _diag(args.file, None, None, f"encoding undefined: {e}")
        return EXIT_FAIL
    union = all_domain_values(DEFAULT_DOMAINS)
    spin: dict[str, int] = {}
    injected = 0
    for i in range(args.steps):
        trans = proc_transitions(p)

        def is_inp(t):
            a = plabel_action(t.label)
            return a is not None and isinstance(a, InL)

        loud = sorted((t for t in trans if not is_inp(t)), key=_proc_key)
        if loud:
            pick = loud[0]
            p = pick.target
            print(f"{i:4d}  {pretty_plabel(pick.label):48s} {pick.rule}")
            continue
        holes = sorted((t for t in trans if is_inp(t)), key=_proc_key)
        if not holes:
            break
        ports = sorted({plabel_action(t.label).port for t in holes})
        port = ports[injected % len(ports)]
        injected += 1
        t = next(t for t in holes if plabel_action(t.label).port == port)
        k = spin.get(port, 0)
        spin[port] = k + 1
        v = union[k % len(union)]
        p = instantiate(t.target, v)
        print(f"{i:4d}  {port} ? {pretty_value(v):42s} {t.rule}")
    return EXIT_OK


def cmd_verify(args) -> int:
    c = _load(args.file)
    if args.strict_base_roles:
        try:
            encode_component(c, strict_base_roles=True)
        except EncodingUndefined as e:
            _diag(args.file, None, None, f"encoding undefined: {e}")
            return EXIT_FAIL
    config = ExplorationConfig(
        max_depth=args.depth, tau_budget=args.tau_budget, seed=args.seed)
    t = parse_type(args.against)
    checks = {
        "soundness": lambda: check_soundness(c, config),
        "completeness": lambda: check_completeness(c, config),
        "preservation": lambda: check_preservation(c, t, config),
        "progress": lambda: check_progress(c, t, config),
    }
    props = list(checks) if args.prop == "all" else [args.prop]
    reports = [checks[p]() for p in props]
    payload = [r.to_json() for r in reports]
    print(json.dumps(payload if len(payload) > 1 else payload[0], indent=2))
    for r in reports:
        print(f"{r.prop}: {_verdict_word(r.verdict)} "
              f"({r.states} states, depth {r.depth})", file=sys.stderr)
    if any(r.verdict == "Fail" for r in reports):
        return EXIT_FAIL
    if any(r.verdict == "Inconclusive" for r in reports):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_subtype(args) -> int:
    t1 = parse_type(args.t1)
    t2 = parse_type(args.t2)
    res = subtype(t1, t2, bound=args.bound)
    if res.holds:
        n = len(res.steps)
        how = ", ".join(res.steps) if res.steps else "reflexive"
        print(f"Yes ({n} rewrite{'s' if n != 1 else ''}: {how})")
        return EXIT_OK
    print(f"NoWithinBound (explored {res.explored}, bound {res.bound})")
    return EXIT_INCONCLUSIVE


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gc",
        description="Choreography-governed component toolchain.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a component file")
    p.add_argument("file")
    p.add_argument("--pretty", action="store_true",
                   help="print the parsed component back")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("check", help="well-formedness check")
    p.add_argument("file")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("typecheck", help="check against a local type")
    p.add_argument("file")
    p.add_argument("--against", default="end", metavar="TYPE")
    p.set_defaults(fn=cmd_typecheck)

    p = sub.add_parser("run", help="execute with the deterministic scheduler")
    p.add_argument("file")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", choices=("text", "json"), default="text")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("compile", help="translate to the process calculus")
    p.add_argument("file")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--strict-base-roles", action="store_true")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("simulate", help="run the compiled process")
    p.add_argument("file")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--strict-base-roles", action="store_true")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify", help="bounded metatheory checks")
    p.add_argument("file")
    p.add_argument("--prop", default="all",
                   choices=("soundness", "completeness", "preservation",
                            "progress", "all"))
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--tau-budget", type=int, default=32)
    p.add_argument("--against", default="end", metavar="TYPE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict-base-roles", action="store_true")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("subtype", help="bounded subtype search")
    p.add_argument("t1", metavar="T1")
    p.add_argument("t2", metavar="T2")
    p.add_argument("--bound", type=int, default=8)
    p.set_defaults(fn=cmd_subtype)

    return ap


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    path = getattr(args, "file", "<args>")
    try:
        return args.fn(args)
    except FileNotFoundError as e:
        print(f"{e.filename}: no such file", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        _diag(path, e.line, e.col, f"parse error: {e.message}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
