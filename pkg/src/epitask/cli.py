"""Command-line entry point.

Every subcommand prints one JSON document on stdout. Exit codes: 0 success,
1 validation or verdict failure, 2 usage error or unreadable input, 3 internal
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .compiler import compile_task, explain_compilation, problem_from_dict, problem_to_dict, to_pddl
from .errors import (
    DepthGateFailed,
    EpitaskError,
    MalformedDocument,
    UnlocatableFact,
    ValidationFailed,
)
from .metrics import Pool, parse_pool, parse_records, score_table, serialize_pool, update_pool
from .planner import action_classes, solve
from .scene import parse_scene, roomless_supports, validate_scene
from .simulator import parse_script, run_episode, scripts_by_actor
from .tasks import Task, audit_depth_validity, check_depth_gate, parse_task, sample_seed_tasks, validate_task

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {path}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _load_json(path: str) -> Any:
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"{path}: {exc}") from exc


def _load_task(path: str, scene_path: str | None) -> Task:
    scene = parse_scene(_read(scene_path)) if scene_path else None
    return parse_task(_read(path), scene)


def _emit(doc: Any) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def cmd_validate(args: argparse.Namespace) -> int:
    if args.task is None and args.scene is None:
        raise UsageError("validate needs a task file, a --scene file, or both")
    if args.task is None:
        scene = parse_scene(_read(args.scene))
        violations = validate_scene(scene)
        _emit(
            {
                "ok": not violations,
                "scene_violations": [v.to_dict() for v in violations],
                "roomless_supports": roomless_supports(scene),
            }
        )
        return EXIT_OK if not violations else EXIT_FAIL

    task = _load_task(args.task, args.scene)
    scene_v = validate_scene(task.scene)
    task_v = validate_task(task)
    gate = check_depth_gate(task)
    audit = audit_depth_validity(task)
    ok = not scene_v and not task_v and gate.passed and audit.verdict == "valid"
    _emit(
        {
            "ok": ok,
            "depth": gate.measured,
            "target_depth": gate.target,
            "depth_gate": gate.passed,
            "audit": audit.verdict,
            "audit_report": audit.to_dict(),
            "scene_violations": [v.to_dict() for v in scene_v],
            "task_violations": [v.to_dict() for v in task_v],
            "roomless_supports": roomless_supports(task.scene),
        }
    )
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compile(args: argparse.Namespace) -> int:
    task = _load_task(args.task, args.scene)
    problem = compile_task(task)
    doc = problem_to_dict(problem)
    if args.pddl:
        domain, prob = to_pddl(problem, name=task.task_id or "epitask")
        Path(f"{args.pddl}-domain.pddl").write_text(domain, encoding="utf-8")
        Path(f"{args.pddl}-problem.pddl").write_text(prob, encoding="utf-8")
    if args.explain:
        sys.stderr.write(explain_compilation(problem))
    if args.output:
        Path(args.output).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        counts: dict[str, int] = {}
        for a in problem.actions:
            counts[a.cls] = counts.get(a.cls, 0) + 1
        _emit(
            {
                "output": args.output,
                "fluents": len(problem.fluents),
                "actions": counts,
                "goal": list(problem.goal),
                "tokens": problem.meta.get("tokens", []),
            }
        )
    else:
        _emit(doc)
    return EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    raw = _load_json(args.problem)
    if isinstance(raw, dict) and "pddl_goal" in raw:
        problem = compile_task(_load_task(args.problem, args.scene))
    else:
        problem = problem_from_dict(raw)
    result = solve(problem, node_budget=args.budget)
    doc = result.to_dict()
    doc["classes"] = action_classes(problem, result.plan)
    _emit(doc)
    return EXIT_OK if result.verdict == "solvable" else EXIT_FAIL


def cmd_simulate(args: argparse.Namespace) -> int:
    task = _load_task(args.task, args.scene)
    scripts = scripts_by_actor(parse_script(_read(args.scripts)))
    answers = _load_json(args.answers) if args.answers else {}
    result = run_episode(task, scripts, answers)
    if args.transcript:
        Path(args.transcript).write_text(result.transcript_jsonl(), encoding="utf-8")
    doc = result.to_dict()
    doc["transcript"] = [r.to_dict() for r in result.transcript]
    _emit(doc)
    return EXIT_OK if result.termination != "error" else EXIT_FAIL


def cmd_metrics(args: argparse.Namespace) -> int:
    records = parse_records(_read(args.records))
    categories = _load_json(args.tasks) if args.tasks else None
    table = score_table(records, k=args.k, tasks=categories)
    if args.csv:
        Path(args.csv).write_text(table.to_csv(), encoding="utf-8")
    doc = table.to_dict()
    if args.plot_dir:
        from .plotting import plot_score_table

        doc["figures"] = [str(p) for p in plot_score_table(table, args.plot_dir)]
    _emit(doc)
    return EXIT_OK


def cmd_update_pool(args: argparse.Namespace) -> int:
    pool = parse_pool(_read(args.pool)) if Path(args.pool).exists() else Pool()
    pool = update_pool(pool, parse_records(_read(args.records)))
    Path(args.output or args.pool).write_text(serialize_pool(pool), encoding="utf-8")
    _emit(pool.to_dict())
    return EXIT_OK


def cmd_sample_seeds(args: argparse.Namespace) -> int:
    pool = parse_pool(_read(args.pool))
    sample = sample_seed_tasks(pool.labeled(), args.ratio, args.count, args.seed)
    _emit(
        {
            "task_ids": list(sample.task_ids),
            "failed_drawn": sample.failed_drawn,
            "passed_drawn": sample.passed_drawn,
            "notes": list(sample.notes),
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epitask", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"epitask {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structural checks, depth gate and depth-validity audit")
    p.add_argument("task", nargs="?")
    p.add_argument("--scene", help="scene JSON when the task does not embed one")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compile", help="compile a task into a classical problem")
    p.add_argument("task")
    p.add_argument("--scene")
    p.add_argument("-o", "--output", help="write the compiled problem JSON here")
    p.add_argument("--pddl", metavar="PREFIX", help="also write PREFIX-domain.pddl and PREFIX-problem.pddl")
    p.add_argument("--explain", action="store_true", help="print the step-by-step report on stderr")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("plan", help="search a compiled problem (or a task) for a plan")
    p.add_argument("problem")
    p.add_argument("--scene")
    p.add_argument("--budget", type=int, help="node expansion budget")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run a scripted episode")
    p.add_argument("task")
    p.add_argument("scripts", help="JSON-lines action script")
    p.add_argument("--answers", help="probe answers keyed by agent")
    p.add_argument("--scene")
    p.add_argument("--transcript", help="write the JSON-lines transcript here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="aggregate run records into a score table")
    p.add_argument("records", help="JSON-lines run records")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--tasks", help="JSON map of task ID to category, so unattempted tasks count")
    p.add_argument("--csv", help="write the table as CSV here")
    p.add_argument("--plot-dir", help="render bar charts into this directory")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("update-pool", help="merge run records into the task pool")
    p.add_argument("pool")
    p.add_argument("records")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_update_pool)

    p = sub.add_parser("sample-seeds", help="draw seed tasks biased toward failures")
    p.add_argument("pool")
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample_seeds)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            _emit({"error": "usage", "message": "invalid arguments"})
        return int(exc.code or 0)
    if args.command == "plan" and args.budget is not None and args.budget < 1:
        _emit({"error": "usage", "message": "--budget must be positive"})
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        _emit({"error": "usage", "message": str(exc)})
        return EXIT_USAGE
    except ValidationFailed as exc:
        _emit({"error": "validation", "message": str(exc), "violations": [v.to_dict() for v in exc.violations]})
        return EXIT_FAIL
    except (DepthGateFailed, UnlocatableFact) as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_FAIL
    except (EpitaskError, ValueError) as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        _emit({"error": "internal", "message": f"{type(exc).__name__}: {exc}"})
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
