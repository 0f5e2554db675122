"""Batch front door: solve, exact-solve, validate, sweep, chart, export.

Exit codes are a stable contract:
  0  success
  1  input error (bad file, bad flags, plan violations found)
  2  no feasible plan (the failing phase is named on stderr)
  3  refused: instance exceeds the exhaustive-search bounds or budget

Every command prints a RunReport as JSON on stdout.  Digests are the
first 16 hex chars of sha256, stable across runs of identical inputs;
times are reported in ms with 3 decimals, dollars with 4.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .charts import write_sweep_charts
from .errors import (
    BoundsExceededError,
    InfeasibleError,
    InvalidInstanceError,
    LpFormatError,
    MixplanError,
)
from .exact import SearchBounds, brute_force_optimal, export_lp
from .exact.lp import LpDocument
from .heuristic import cram_allocate
from .model.metrics import DELAY_MODELS, PER_MB, PER_VM, metrics
from .model.serialize import dumps_plan, load_instance, load_plan
from .model.types import Instance, Plan
from .model.validate import ALL_FAMILIES, validate_plan
from .scenarios import ScenarioSpec, sweep, to_csv

__all__ = ["RunReport", "main"]


@dataclass
class RunReport:
    command: str
    instance_digest: str
    plan_path: str | None
    plan_digest: str | None
    metrics: dict | None
    wall_clock_ms: float

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "instance_digest": self.instance_digest,
            "plan_path": self.plan_path,
            "plan_digest": self.plan_digest,
            "metrics": self.metrics,
            "wall_clock_ms": round(self.wall_clock_ms, 3),
        }
        return json.dumps(doc, indent=2) + "\n"


def _digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def _digest_file(path: str | Path) -> str:
    return _digest_bytes(Path(path).read_bytes())


def _metrics_doc(plan: Plan, instance: Instance, delay_model: str, cost_mode: str) -> dict:
    m = metrics(plan, instance, delay_model=delay_model, cost_mode=cost_mode)
    return {
        "server_cost": f"{m.server_cost:.4f}",
        "network_cost": f"{m.network_cost:.4f}",
        "total_cost": f"{m.total_cost:.4f}",
        "max_delay_ms": f"{m.max_delay:.3f}",
        "vm_count": m.vm_count,
        "allocated_mb": f"{m.allocated_memory:.3f}",
        "delay_model": delay_model,
        "cost_mode": cost_mode,
    }


def _emit_plan(plan: Plan, instance: Instance, out_path: str, delay_model: str, cost_mode: str):
    m = metrics(plan, instance, delay_model=delay_model, cost_mode=cost_mode)
    text = dumps_plan(plan, instance=instance, metrics=m)
    Path(out_path).write_text(text, encoding="utf-8")
    return _digest_bytes(text.encode("utf-8"))


def _cmd_solve(args) -> int:
    started = time.perf_counter()
    instance = load_instance(args.instance)
    plan = cram_allocate(instance)
    delay_model = "stored" if args.delay_model == "algorithm1" else args.delay_model
    plan_digest = _emit_plan(plan, instance, args.plan_out, delay_model, args.cost_mode)
    report = RunReport(
        command=f"solve --delay-model {args.delay_model} --cost-mode {args.cost_mode}",
        instance_digest=_digest_file(args.instance),
        plan_path=args.plan_out,
        plan_digest=plan_digest,
        metrics=_metrics_doc(plan, instance, delay_model, args.cost_mode),
        wall_clock_ms=(time.perf_counter() - started) * 1000.0,
    )
    sys.stdout.write(report.to_json())
    return 0


def _cmd_exact(args) -> int:
    started = time.perf_counter()
    instance = load_instance(args.instance)
    bounds = SearchBounds(
        max_participants=args.max_participants,
        max_servers=args.max_servers,
        max_compressors=args.max_compressors,
        node_budget=args.node_budget,
    )
    plan = brute_force_optimal(instance, bounds=bounds, cost_mode=args.cost_mode)
    plan_digest = _emit_plan(plan, instance, args.plan_out, "ilp", args.cost_mode)
    report = RunReport(
        command=f"exact --cost-mode {args.cost_mode}",
        instance_digest=_digest_file(args.instance),
        plan_path=args.plan_out,
        plan_digest=plan_digest,
        metrics=_metrics_doc(plan, instance, "ilp", args.cost_mode),
        wall_clock_ms=(time.perf_counter() - started) * 1000.0,
    )
    sys.stdout.write(report.to_json())
    return 0


def _cmd_validate(args) -> int:
    started = time.perf_counter()
    instance = load_instance(args.instance)
    plan = load_plan(args.plan)
    families = args.families.split(",") if args.families else None
    try:
        violations = validate_plan(plan, instance, delay_model=args.delay_model, families=families)
    except ValueError as exc:  # unknown family name is a usage error, not a crash
        raise InvalidInstanceError(str(exc)) from exc
    for v in violations:
        sys.stdout.write(v.render() + "\n")
    report = RunReport(
        command=f"validate --delay-model {args.delay_model}",
        instance_digest=_digest_file(args.instance),
        plan_path=args.plan,
        plan_digest=_digest_file(args.plan),
        metrics={"violations": len(violations)},
        wall_clock_ms=(time.perf_counter() - started) * 1000.0,
    )
    sys.stdout.write(report.to_json())
    return 0 if not violations else 1


def _load_specs(path: str) -> list[ScenarioSpec]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, list) or not doc:
        raise InvalidInstanceError(f"{path}: expected a non-empty JSON list of scenario specs")
    specs = []
    for i, row in enumerate(doc):
        try:
            specs.append(
                ScenarioSpec(
                    kind=row["kind"],
                    distribution=row["distribution"],
                    participant_count=int(row["participant_count"]),
                    seed=int(row.get("seed", 0)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInstanceError(f"{path}: spec #{i} is malformed: {exc}") from exc
    return specs


def _cmd_sweep(args) -> int:
    started = time.perf_counter()
    specs = _load_specs(args.specs)
    rows = sweep(specs, cost_mode=args.cost_mode)
    text = to_csv(rows)
    Path(args.csv_out).write_text(text, encoding="utf-8")
    chart_paths = []
    if args.charts:
        chart_paths = [str(p) for p in write_sweep_charts(rows, args.charts)]
    report = RunReport(
        command=f"sweep --cost-mode {args.cost_mode}",
        instance_digest=_digest_file(args.specs),
        plan_path=args.csv_out,
        plan_digest=_digest_bytes(text.encode("utf-8")),
        metrics={
            "rows": len(rows),
            "feasible": sum(1 for r in rows if r.status == "ok"),
            "charts": chart_paths,
        },
        wall_clock_ms=(time.perf_counter() - started) * 1000.0,
    )
    sys.stdout.write(report.to_json())
    return 0


def _cmd_export_lp(args) -> int:
    started = time.perf_counter()
    instance = load_instance(args.instance)
    doc = export_lp(instance)
    text = doc.to_text()
    # round-trip guard: the emitted text must parse back to the same shape
    parsed = LpDocument.parse(text)
    if parsed.variable_names() != doc.variable_names() or len(parsed.rows) != len(doc.rows):
        raise LpFormatError("emitted LP failed the round-trip self-check")
    Path(args.lp_out).write_text(text, encoding="utf-8")
    report = RunReport(
        command="export-lp",
        instance_digest=_digest_file(args.instance),
        plan_path=args.lp_out,
        plan_digest=_digest_bytes(text.encode("utf-8")),
        metrics={
            "variables": len(doc.variable_names()),
            "rows": len(doc.rows),
            "binaries": len(doc.binaries),
        },
        wall_clock_ms=(time.perf_counter() - started) * 1000.0,
    )
    sys.stdout.write(report.to_json())
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad flags are input errors, not crashes
        raise InvalidInstanceError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add_cost_mode(p):
        p.add_argument("--cost-mode", choices=(PER_MB, PER_VM), default=PER_MB)

    p = sub.add_parser("solve", help="plan with the placement heuristic")
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--plan-out", required=True, help="where to write the plan JSON")
    p.add_argument("--delay-model", choices=DELAY_MODELS, default="algorithm1")
    add_cost_mode(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("exact", help="provably optimal plan via exhaustive search")
    p.add_argument("instance")
    p.add_argument("--plan-out", required=True)
    add_cost_mode(p)
    p.add_argument("--max-participants", type=int, default=SearchBounds.max_participants)
    p.add_argument("--max-servers", type=int, default=SearchBounds.max_servers)
    p.add_argument("--max-compressors", type=int, default=None)
    p.add_argument("--node-budget", type=int, default=SearchBounds.node_budget)
    p.set_defaults(func=_cmd_exact)

    p = sub.add_parser("validate", help="check a plan against an instance")
    p.add_argument("instance")
    p.add_argument("plan")
    p.add_argument("--delay-model", choices=DELAY_MODELS, default="ilp")
    p.add_argument(
        "--families",
        default=None,
        help=f"comma-separated subset of: {','.join(ALL_FAMILIES)}",
    )
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sweep", help="run a scenario grid and emit CSV (+charts)")
    p.add_argument("specs", help="JSON list of scenario specs")
    p.add_argument("--csv-out", required=True)
    p.add_argument("--charts", default=None, help="directory for per-metric SVG charts")
    add_cost_mode(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("export-lp", help="write the allocation model in LP format")
    p.add_argument("instance")
    p.add_argument("--lp-out", required=True)
    p.set_defaults(func=_cmd_export_lp)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except InvalidInstanceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help and friends
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except InfeasibleError as exc:
        sys.stderr.write(f"{exc}\n")
        return 2
    except BoundsExceededError as exc:
        sys.stderr.write(f"refused: {exc}\n")
        return 3
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except MixplanError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
