"""The ``agro`` command line: world/task generation, benchmark runs, checking, ablation."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import canonical
from .agent.plan import PlanProgram, execute_plan
from .bench.runner import VARIANTS, RunReport, ablate, format_table, run_bench
from .bench.taskgen import gen_tasks
from .bench.worldgen import GenConfig, gen_world
from .bundle import load_world, save_world
from .errors import AgroError, BundleFormatError, IoError
from .protocol.checker import check
from .protocol.tasks import FAMILIES, load_tasks, save_tasks
from .toolkit import ToolContext
from .toolkit.artifacts import Artifact

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3


def _csv(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _write_json(path: str | Path, obj: Any) -> None:
    try:
        p = Path(path)
        if p.parent != Path(""):
            p.parent.mkdir(parents=True, exist_ok=True)
        canonical.write(p, obj)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}", path=str(path)) from exc


def _read_json(path: str | Path) -> Any:
    try:
        return canonical.read(Path(path))
    except FileNotFoundError as exc:
        raise IoError(f"no such file {path}", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"malformed JSON in {path}: {exc}", path=str(path)) from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}", path=str(path)) from exc


def cmd_gen_world(args: argparse.Namespace) -> int:
    cfg = GenConfig(seed=args.seed, n_parcels=args.parcels, season_days=args.season_days, cloud_prob=args.cloud_prob)
    world = gen_world(cfg)
    save_world(world, args.out)
    print(f"wrote world {world.world_id} ({len(world.parcels)} parcels) to {args.out}")
    return EXIT_OK


def cmd_gen_tasks(args: argparse.Namespace) -> int:
    world = load_world(args.world)
    tasks = gen_tasks(world, families=_csv(args.families), per_family=args.per_family, seed=args.seed)
    save_tasks(tasks, args.out)
    print(f"wrote {len(tasks)} tasks to {args.out}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    world = load_world(args.world)
    tasks = load_tasks(args.tasks)
    report = run_bench(
        world,
        tasks,
        args.policy,
        args.budget,
        args.workers,
        oracle_feedback=args.oracle_feedback,
        artifacts_dir=args.artifacts,
        traces_dir=args.traces,
        seed=args.seed,
    )
    _write_json(args.out, report.to_json())
    print(format_table(report.to_json()))
    return EXIT_OK


def _answer_entries(doc: Any) -> list[dict[str, Any]]:
    # either {task_id: answer} or [{task_id, answer?, plan?, artifacts?}, ...]
    if isinstance(doc, dict) and "answers" in doc:
        doc = doc["answers"]
    if isinstance(doc, dict):
        return [{"task_id": k, "answer": v} for k, v in doc.items()]
    if isinstance(doc, list) and all(isinstance(e, dict) and "task_id" in e for e in doc):
        return doc
    raise BundleFormatError("answers file must map task_id -> answer or list {task_id, answer, plan?, artifacts?}", path="answers")


def cmd_check(args: argparse.Namespace) -> int:
    world = load_world(args.world)
    ctx = ToolContext(world)
    tasks = {t.task_id: t for t in load_tasks(args.tasks)}
    results = []
    for entry in _answer_entries(_read_json(args.answers)):
        tid = entry["task_id"]
        if tid not in tasks:
            raise AgroError(f"answer for unknown task {tid!r}", path="task_id", observed=tid)
        task = tasks[tid]
        artifacts = [Artifact.from_json(a) for a in entry.get("artifacts", [])]
        answer = entry.get("answer")
        if entry.get("plan") is not None:
            ex = execute_plan(ctx, PlanProgram.from_json(entry["plan"]))
            artifacts = artifacts + ex.artifacts
            if "answer" not in entry:
                answer = ex.answer
        report = check(answer, artifacts, task, ctx)
        results.append({"task_id": tid, "z": report.z, "violations": [v.to_json() for v in report.violations]})
        print(f"{tid}: z={report.z}" + "".join(f" [{v.tier}:{v.code}]" for v in report.violations))
    solved = sum(r["z"] for r in results)
    print(f"{solved}/{len(results)} answers pass")
    if args.out:
        _write_json(args.out, {"results": results})
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    world = load_world(args.world)
    tasks = load_tasks(args.tasks)
    table = ablate(world, tasks, _csv(args.variants), args.policy, args.budget, args.workers, args.seed)
    _write_json(args.out, table)
    print(format_table(table))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    doc = _read_json(args.input)
    if not isinstance(doc, dict) or not (("tasks" in doc and "policy" in doc) or ("rows" in doc and "reports" in doc)):
        raise BundleFormatError(f"{args.input} is neither a run report nor an ablation table", path=str(args.input))
    if "tasks" in doc:
        # recompute aggregates from the per-task rows rather than trusting the file
        doc = RunReport.from_json(doc).to_json()
    if args.format == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(format_table(doc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agro", description="AgriWorld benchmark tooling")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-world", help="generate a synthetic world bundle")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--parcels", type=int, default=50)
    g.add_argument("--season-days", type=int, default=120)
    g.add_argument("--cloud-prob", type=float, default=0.25)
    g.set_defaults(func=cmd_gen_world)

    t = sub.add_parser("gen-tasks", help="generate tasks with sealed references")
    t.add_argument("--world", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--families", default=",".join(FAMILIES))
    t.add_argument("--per-family", type=int, default=50)
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=cmd_gen_tasks)

    r = sub.add_parser("run", help="run a policy over a task set")
    r.add_argument("--world", required=True)
    r.add_argument("--tasks", required=True)
    r.add_argument("--policy", default="scripted")
    r.add_argument("--budget", type=int, default=20)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--artifacts", default=None)
    r.add_argument("--out", required=True)
    r.add_argument("--oracle-feedback", action="store_true")
    r.add_argument("--traces", default=None, help="directory for per-episode trace files")
    r.add_argument("--seed", type=int, default=0, help="fault-selection seed for faulty policies")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="check externally produced answers")
    c.add_argument("--world", required=True)
    c.add_argument("--tasks", required=True)
    c.add_argument("--answers", required=True)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_check)

    a = sub.add_parser("ablate", help="run the ablation variants")
    a.add_argument("--world", required=True)
    a.add_argument("--tasks", required=True)
    a.add_argument("--variants", default=",".join(VARIANTS))
    a.add_argument("--out", required=True)
    a.add_argument("--policy", default="faulty:mixed")
    a.add_argument("--budget", type=int, default=20)
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_ablate)

    rep = sub.add_parser("report", help="render a run report or ablation table")
    rep.add_argument("--in", dest="input", required=True)
    rep.add_argument("--format", choices=("table", "json"), default="table")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IoError as exc:
        print(f"agro: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AgroError as exc:
        print(f"agro: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
