"""Command-line surface for the toolkit.

Exit codes: 0 on success/pass, 1 on a domain failure (syntax, merge, centroid
or verdict failure), 2 on usage or I/O errors.  Diagnostics go to stderr,
data to stdout.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import (
    DEFAULT_STATE_CAP, check_deadlock_freedom, check_encoding_bisim,
    check_trace_equivalence, config_traces, global_traces,
)
from .codegen import FLAVORS, emit_skeleton
from .core import InvalidType, Role, participants, pretty_global, pretty_local
from .efsm import build_efsm, efsm_ir, render_dot
from .encoding import encode_global
from .projection import MergeFailure, project
from .scribble import ScribbleError, elaborate, parse_module, pretty_module
from .simulator import (
    BoundedLoopPolicy, MaxStepsExceeded, SimConfig, SimulatorError,
    run_session, validate_log,
)
from .wellformed import check_wf, check_wf_routed

USAGE_ERROR = 2
DOMAIN_ERROR = 1


class _CliFailure(Exception):
    def __init__(self, message: str, code: int = DOMAIN_ERROR):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _CliFailure(f"cannot read {path}: {exc}", USAGE_ERROR)


def _load(path: str, protocol: str | None):
    try:
        decls = parse_module(_read(path), path)
    except ScribbleError as exc:
        raise _CliFailure(str(exc))
    if protocol is None:
        return decls, None
    try:
        return decls, elaborate(decls, protocol)
    except (ScribbleError, InvalidType) as exc:
        raise _CliFailure(str(exc))


def cmd_parse(args) -> int:
    decls, _ = _load(args.file, None)
    sys.stdout.write(pretty_module(decls) if decls else "")
    return 0


def cmd_project(args) -> int:
    _, g = _load(args.file, args.protocol)
    try:
        local = project(g, Role(args.role))
    except MergeFailure as exc:
        raise _CliFailure(str(exc))
    print(pretty_local(local))
    return 0


def cmd_check(args) -> int:
    _, g = _load(args.file, args.protocol)
    if args.router:
        report = check_wf_routed(g, Role(args.router))
        tag = f"wf^{args.router}"
    else:
        report = check_wf(g)
        tag = "wf"
    print(f"{tag}={'ok' if report.ok else 'fail'}")
    if not report.ok:
        print(report.describe(), file=sys.stderr)
        return DOMAIN_ERROR
    return 0


def cmd_encode(args) -> int:
    _, g = _load(args.file, args.protocol)
    try:
        print(pretty_global(encode_global(g, Role(args.router))))
    except InvalidType as exc:
        raise _CliFailure(str(exc))
    return 0


def cmd_traces(args) -> int:
    _, g = _load(args.file, args.protocol)
    ts = config_traces(g, args.depth) if args.config else global_traces(g, args.depth)
    for trace in sorted(ts.traces, key=lambda tr: (len(tr), tuple(a.sort_key() for a in tr))):
        print(" . ".join(str(a) for a in trace) if trace else "<empty>")
    return 0


def cmd_verify(args) -> int:
    _, g = _load(args.file, args.protocol)
    router = Role(args.router)
    wf = check_wf(g)
    if not wf.ok:
        print("wf=fail", file=sys.stderr)
        print(wf.describe(), file=sys.stderr)
        return DOMAIN_ERROR
    encoded = encode_global(g, router)
    reports = [
        check_trace_equivalence(g, args.depth, args.state_cap),
        check_trace_equivalence(encoded, args.depth, args.state_cap),
        check_deadlock_freedom(encoded, router, args.state_cap),
        check_encoding_bisim(g, router, args.depth, args.state_cap),
    ]
    names = ["trace_equivalence", "trace_equivalence_encoded",
             "deadlock_freedom", "encoding_bisim"]
    ok = True
    for name, report in zip(names, reports):
        print(f"check={name}")
        for line in report.lines()[1:]:
            print(line)
        ok = ok and report.passed
    return 0 if ok else DOMAIN_ERROR


def cmd_efsm(args) -> int:
    _, g = _load(args.file, args.protocol)
    role = Role(args.role)
    try:
        machine = build_efsm(project(g, role), role)
    except MergeFailure as exc:
        raise _CliFailure(str(exc))
    if args.dot:
        Path(args.dot).write_text(render_dot(machine))
    if args.ir:
        Path(args.ir).write_text(efsm_ir(machine))
    if not args.dot and not args.ir:
        sys.stdout.write(render_dot(machine))
    return 0


def cmd_gen(args) -> int:
    decls, g = _load(args.file, args.protocol)
    role = Role(args.role)
    try:
        machine = build_efsm(project(g, role), role)
        files = emit_skeleton(machine, args.flavor)
    except MergeFailure as exc:
        raise _CliFailure(str(exc))
    out_dir = Path(args.output) / args.protocol / args.role
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        (out_dir / name).write_text(text)
        print(out_dir / name)
    return 0


def cmd_simulate(args) -> int:
    _, g = _load(args.file, args.protocol)
    router = Role(args.router)
    cancel = None
    if args.cancel:
        role_name, _, at = args.cancel.partition("@")
        if not at.isdigit():
            raise _CliFailure("--cancel expects ROLE@STEP", USAGE_ERROR)
        cancel = (Role(role_name), int(at))
    cfg = SimConfig(seed=args.seed, max_steps=args.max_steps,
                    scheduler=args.scheduler, cancel_injection=cancel)
    scripts = {r: BoundedLoopPolicy(args.rounds) for r in participants(g)}
    try:
        log = run_session(g, router, scripts, cfg)
    except (SimulatorError, MaxStepsExceeded) as exc:
        raise _CliFailure(str(exc))
    sys.stdout.write(log.serialize())
    if log.cancellation:
        notified = ",".join(sorted(r.name for r in log.cancellation.notified))
        print(f"# cancelled by {log.cancellation.initiator} notified {notified}")
    verdict = validate_log(g, router, log)
    print(f"# conformance={'ok' if verdict is True else verdict}")
    return 0 if verdict is True else DOMAIN_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="routedmpst",
        description="Routed multiparty session type toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a module and pretty-print it")
    p.add_argument("file")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("project", help="project a protocol onto a role")
    p.add_argument("file")
    p.add_argument("protocol")
    p.add_argument("role")
    p.set_defaults(fn=cmd_project)

    p = sub.add_parser("check", help="well-formedness (optionally router-aware)")
    p.add_argument("file")
    p.add_argument("protocol")
    p.add_argument("--router")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("encode", help="encode through a router role")
    p.add_argument("file")
    p.add_argument("protocol")
    p.add_argument("--router", required=True)
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("traces", help="list bounded traces")
    p.add_argument("file")
    p.add_argument("protocol")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--config", action="store_true",
                   help="use the configuration semantics instead of the global one")
    p.set_defaults(fn=cmd_traces)

    p = sub.add_parser("verify", help="run the three theorem checks")
    p.add_argument("file")
    p.add_argument("protocol")
    p.add_argument("--router", required=True)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--state-cap", type=int, default=DEFAULT_STATE_CAP)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("efsm", help="endpoint state machine (DOT and/or JSON IR)")
    p.add_argument("file")
    p.add_argument("protocol")
    p.add_argument("role")
    p.add_argument("--dot")
    p.add_argument("--ir")
    p.set_defaults(fn=cmd_efsm)

    p = sub.add_parser("gen", help="emit endpoint skeleton files")
    p.add_argument("file")
    p.add_argument("protocol")
    p.add_argument("role")
    p.add_argument("--flavor", choices=FLAVORS, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("simulate", help="run one deterministic session")
    p.add_argument("file")
    p.add_argument("protocol")
    p.add_argument("--router", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rounds", type=int, default=2)
    p.add_argument("--scheduler", choices=["round-robin", "seeded-random"],
                   default="round-robin")
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--cancel", help="ROLE@STEP cancellation injection")
    p.set_defaults(fn=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _CliFailure as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
