"""Command line front end: state documents in, deterministic reports out.

State documents are JSON::

    {
      "subsystems": [{"id": "S", "basis": ["S0", "S1"]}, ...],
      "components": [[["S0", "P0", "E0"], 0.8660254037844386, 0.0], ...],
      "normalize": false
    }

Each component is ``[labels, real, imag]``. Exit codes: 0 success, 1 invalid
input or usage, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config
from .envariance import is_envariant, phase_op, swap_op
from .errors import (
    DegenerateSpectrumUnresolved,
    EnvlabError,
    ParseError,
    UnknownLabel,
    UnknownSubsystem,
    UsageError,
)
from .finegrain import DEFAULT_MAX_DENOMINATOR, branch_weights, finegrain_env, rationalize
from .machines import finegrained_machine, local_machine, outcome_statistics, paradox_report, sample
from .statespace import PureState, SubsystemLayout, build_state

__all__ = ["Report", "parse_state", "state_to_document", "emit", "run_command", "main", "paper_states"]

FORMATS = ("json", "csv", "table")
_DOC_KEYS = {"subsystems", "components", "normalize"}
_SUB_KEYS = {"id", "basis"}


@dataclass
class Report:
    command: list[str]
    config: dict
    result: dict
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": list(self.command),
            "config": self.config,
            "result": self.result,
            "warnings": list(self.warnings),
        }


def _field_error(where: str, msg: str) -> ParseError:
    return ParseError(f"{where}: {msg}")


def _parse_document(doc) -> PureState:
    if not isinstance(doc, dict):
        raise _field_error("document", "expected a JSON object")
    unknown = set(doc) - _DOC_KEYS
    if unknown:
        raise _field_error("document", f"unknown fields {sorted(unknown)}")
    for key in ("subsystems", "components"):
        if key not in doc:
            raise _field_error("document", f"missing field {key!r}")
    normalize = doc.get("normalize", False)
    if not isinstance(normalize, bool):
        raise _field_error("normalize", "expected true or false")

    subsystems = []
    if not isinstance(doc["subsystems"], list) or not doc["subsystems"]:
        raise _field_error("subsystems", "expected a non-empty list")
    for i, sub in enumerate(doc["subsystems"]):
        where = f"subsystems[{i}]"
        if not isinstance(sub, dict):
            raise _field_error(where, "expected an object with 'id' and 'basis'")
        unknown = set(sub) - _SUB_KEYS
        if unknown or set(sub) != _SUB_KEYS:
            raise _field_error(where, f"expected exactly the fields {sorted(_SUB_KEYS)}")
        if not isinstance(sub["id"], str) or not isinstance(sub["basis"], list):
            raise _field_error(where, "'id' must be a string and 'basis' a list")
        if not all(isinstance(x, str) for x in sub["basis"]):
            raise _field_error(where, "basis labels must be strings")
        subsystems.append((sub["id"], sub["basis"]))

    components = []
    if not isinstance(doc["components"], list):
        raise _field_error("components", "expected a list")
    for i, comp in enumerate(doc["components"]):
        where = f"components[{i}]"
        if not (isinstance(comp, list) and len(comp) == 3):
            raise _field_error(where, "expected [labels, real, imag]")
        labels, re, im = comp
        if not (isinstance(labels, list) and all(isinstance(x, str) for x in labels)):
            raise _field_error(where, "labels must be a list of strings")
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (re, im)):
            raise _field_error(where, "real and imaginary parts must be numbers")
        components.append((tuple(labels), complex(re, im)))

    try:
        layout = SubsystemLayout(subsystems)
    except EnvlabError as exc:
        raise _field_error("subsystems", str(exc)) from None
    for i, (labels, _) in enumerate(components):
        try:
            layout.index_tuple(labels)
        except UnknownLabel as exc:
            raise _field_error(f"components[{i}]", str(exc)) from None
    return build_state(layout, components, normalize=normalize)


def parse_state(source) -> PureState:
    """Parse a state document from a path or from the document text itself."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ParseError(f"{path}: {exc.strerror}") from None
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return _parse_document(doc)


def state_to_document(state: PureState) -> dict:
    return {
        "subsystems": [{"id": sid, "basis": list(labels)} for sid, labels in state.layout.subsystems],
        "components": [[list(k), v.real, v.imag] for k, v in state.components.items()],
        "normalize": False,
    }


def _num(x: float) -> float:
    x = float(x)
    if abs(x) < 1e-12:
        return 0.0
    return float(f"{x:.12g}")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{_num(x):.12g}"
    if x is None:
        return ""
    return str(x)


def _clean(obj):
    """Round floats to 12 significant digits, recursively."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and obj and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    elif isinstance(obj, list):
        yield prefix, " ".join(_fmt(v) for v in obj)
    else:
        yield prefix, _fmt(obj)


def _tabular(report: Report) -> tuple[list[str], list[list[str]]]:
    result = report.result
    if "rows" in result:
        header = ["machine", "state", "rule", "outcome", "probability", "born", "gap", "born_consistent", "local"]
        rows = []
        for r in result["rows"]:
            for outcome, p in r["statistics"].items():
                rows.append(
                    [r["machine"], r["state"], r["rule"], outcome, _fmt(p), _fmt(r["born"][outcome]),
                     _fmt(r["gap"]), _fmt(r["born_consistent"]), _fmt(r["local"])]
                )
        return header, rows
    if "counts" in result:
        return ["outcome", "count"], [[k, _fmt(v)] for k, v in result["counts"].items()]
    if "statistics" in result:
        return ["outcome", "probability"], [[k, _fmt(v)] for k, v in result["statistics"].items()]
    return ["key", "value"], [[k, v] for k, v in _flatten(result)]


def emit(report: Report, fmt: str = "json") -> str:
    """Serialise ``report``; output is byte-stable for a given report and format."""
    if fmt == "json":
        return json.dumps(_clean(report.to_dict()), sort_keys=True, indent=2) + "\n"
    header, rows = _tabular(report)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "table":
        widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
        lines = ["  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header, *rows]]
        lines.insert(1, "  ".join("-" * w for w in widths))
        for w in report.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines) + "\n"
    raise UsageError(f"unknown format {fmt!r}")


def _matrix_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def paper_states() -> tuple[PureState, PureState]:
    """The two pre-measurement states sharing environment kets E0, E1."""
    layout = {"S": ["S0", "S1"], "P": ["P0", "P1"], "E": ["E0", "E1"]}
    psi1 = build_state(layout, [(("S0", "P0", "E0"), math.sqrt(3) / 2), (("S1", "P1", "E1"), 0.5)])
    psi2 = build_state(layout, [(("S0", "P0", "E0"), math.sqrt(2 / 3)), (("S1", "P1", "E1"), math.sqrt(1 / 3))])
    return psi1, psi2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default="json")
    common.add_argument("--tolerance", type=float, default=1e-9)

    parser = _Parser(prog="envlab", description="Envariance and measurement-machine toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("envcheck", parents=[common], help="decide envariance of a local operation")
    p.add_argument("--state", required=True)
    p.add_argument("--op", required=True, help="phase:SUB:LABEL:RADIANS or swap:SUB:L1:L2")
    p.add_argument("--env", required=True, help="SUB[,SUB...]")

    p = sub.add_parser("finegrain", parents=[common], help="rewrite a state as an equal-weight superposition")
    p.add_argument("--state", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--max-denominator", type=int, default=DEFAULT_MAX_DENOMINATOR)

    for name in ("measure", "sample"):
        p = sub.add_parser(name, parents=[common], help=f"{name} a state with a measurement machine")
        p.add_argument("--state", required=True)
        p.add_argument("--machine", required=True, help="local:PSUB or finegrained:PSUB,ESUB")
        p.add_argument("--rule", choices=("born", "branch-count"), required=True)
        p.add_argument("--aggregate-by", default=None)
        p.add_argument("--env-only", action="store_true", help="fine-grained machine without pointer projection")
        p.add_argument("--max-denominator", type=int, default=DEFAULT_MAX_DENOMINATOR)
        if name == "sample":
            p.add_argument("--n", type=int, required=True)
            p.add_argument("--seed", type=int, default=0)

    sub.add_parser("demo-paper", parents=[common], help="state-dependence of Born-consistent machines")
    return parser


def _parse_op(spec: str, state: PureState):
    parts = spec.split(":")
    if parts[0] == "phase" and len(parts) == 4:
        try:
            phi = float(parts[3])
        except ValueError:
            raise UsageError(f"invalid angle in --op {spec!r}") from None
        return phase_op(state.layout, parts[1], parts[2], phi), {
            "kind": "phase", "subsystem": parts[1], "label": parts[2], "radians": phi}
    if parts[0] == "swap" and len(parts) == 4:
        return swap_op(state.layout, parts[1], parts[2], parts[3]), {
            "kind": "swap", "subsystem": parts[1], "labels": [parts[2], parts[3]]}
    raise UsageError(f"--op must be phase:SUB:LABEL:RADIANS or swap:SUB:L1:L2, got {spec!r}")


def _make_machine(args, state: PureState):
    kind, _, rest = args.machine.partition(":")
    if kind == "local" and rest and "," not in rest:
        return local_machine(state.layout, rest), state
    if kind == "finegrained":
        subs = rest.split(",")
        if len(subs) == 2 and all(subs):
            pointer, env = subs
            machine = finegrained_machine(
                state, pointer, env, args.tolerance, args.max_denominator, include_pointer=not args.env_only
            )
            return machine, machine.prepare(state)
    raise UsageError(f"--machine must be local:PSUB or finegrained:PSUB,ESUB, got {args.machine!r}")


def _cmd_envcheck(args, warn):
    state = parse_state(args.state)
    op, op_desc = _parse_op(args.op, state)
    env = [s for s in args.env.split(",") if s]
    for s in env:
        if s not in state.layout:
            raise UnknownSubsystem(f"no subsystem {s!r} in state")
    verdict = is_envariant(state, op, env)
    counter = None
    if verdict.counter_op is not None:
        counter = {"targets": list(verdict.counter_op.targets), "matrix": _matrix_pairs(verdict.counter_op.matrix)}
    return {
        "operation": op_desc,
        "env": list(state.layout.ordered(env)),
        "verdict": {"envariant": verdict.envariant, "residual": verdict.residual, "counter_op": counter},
    }


def _cmd_finegrain(args, warn):
    state = parse_state(args.state)
    _, amps = branch_weights(state, args.env)
    plan = rationalize([abs(a) ** 2 for a in amps], args.tol, args.max_denominator)
    fine, fmap = finegrain_env(state, args.env, plan)
    if plan.achieved_error > config.get_tolerances().prune:
        warn(f"rational approximation error {plan.achieved_error:.3g}")
    return {
        "plan": {
            "weights": list(plan.weights),
            "numerators": list(plan.numerators),
            "denominator": plan.denominator,
            "achieved_error": plan.achieved_error,
        },
        "blocks": {k: list(v) for k, v in fmap.blocks.items()},
        "state": state_to_document(fine),
    }


def _machine_desc(machine, warn):
    if not machine.is_local:
        warn(f"{machine.name}: {machine.locality_note()}")
    return {"name": machine.name, "locality": list(machine.locality), "local": machine.is_local}


def _cmd_measure(args, warn):
    state = parse_state(args.state)
    machine, prepared = _make_machine(args, state)
    stats = outcome_statistics(machine, prepared, args.rule, args.aggregate_by)
    return {"machine": _machine_desc(machine, warn), "rule": args.rule, "statistics": stats.as_dict()}


def _cmd_sample(args, warn):
    state = parse_state(args.state)
    machine, prepared = _make_machine(args, state)
    counts = sample(machine, prepared, args.rule, args.n, args.seed, args.aggregate_by)
    return {
        "machine": _machine_desc(machine, warn),
        "rule": args.rule,
        "n": args.n,
        "counts": {",".join(k): v for k, v in counts.items()},
    }


def _cmd_demo(args, warn):
    psi1, psi2 = paper_states()
    report = paradox_report(psi1, psi2, "P", "E", args.tolerance)
    for name, machine in report.machines.items():
        if not machine.is_local:
            warn(f"{name}: {machine.locality_note()}")
    return report.to_dict()


_COMMANDS = {
    "envcheck": _cmd_envcheck,
    "finegrain": _cmd_finegrain,
    "measure": _cmd_measure,
    "sample": _cmd_sample,
    "demo-paper": _cmd_demo,
}


def run_command(argv) -> tuple[Report | None, int, str]:
    """Run one subcommand; returns ``(report, exit_code, output_text)``.

    On failure the report is ``None`` and the text is the error message.
    """
    argv = list(argv)
    try:
        args = _build_parser().parse_args(argv)
        cfg = {"format": args.format, "tolerance": args.tolerance}
        if hasattr(args, "seed"):
            cfg["seed"] = args.seed
        notes: list[str] = []
        previous = config.set_tolerances(normalization=args.tolerance, branch=args.tolerance)
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", DegenerateSpectrumUnresolved)
                result = _COMMANDS[args.command](args, notes.append)
        finally:
            config.set_tolerances(**dataclasses.asdict(previous))
        notes.extend(str(w.message) for w in caught)
        report = Report(argv, cfg, result, notes)
        return report, 0, emit(report, args.format)
    except EnvlabError as exc:
        return None, exc.exit_code, f"error ({type(exc).__name__}): {exc}\n"


def main(argv=None) -> int:
    report, code, text = run_command(sys.argv[1:] if argv is None else argv)
    (sys.stdout if code == 0 else sys.stderr).write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
