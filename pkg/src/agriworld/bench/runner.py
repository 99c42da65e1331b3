"""Benchmark execution, metric aggregation and the ablation harness."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

from ..agent.loop import EpisodeMemory, run_episode
from ..agent.policies import make_policy
from ..errors import UnknownVariant, ZeroMeanNormalization
from ..model import WorldState
from ..protocol.metrics import iou_sets, nrmse
from ..protocol.tasks import FAMILIES, TaskInstance
from ..toolkit import ToolContext

VARIANTS = ("full", "one_shot", "no_alignment", "no_rs")
# Interaction, Tool Scope, Alignment columns per variant
VARIANT_COLUMNS = {
    "full": ("reflective", "full", "on"),
    "one_shot": ("one-shot", "full", "on"),
    "no_alignment": ("reflective", "full", "off"),
    "no_rs": ("reflective", "no rs.*", "on"),
}


def task_row(task: TaskInstance, memory: EpisodeMemory, fault: Optional[str]) -> dict[str, Any]:
    best = memory.best_turn()
    answer = memory.answer
    row: dict[str, Any] = {
        "task_id": task.task_id,
        "family": task.family,
        "variant": task.variant,
        "z": memory.z,
        "turns": len(memory.turns),
        "violations": len(best.report.violations) if best is not None else None,
        "status": memory.status,
        "fault": fault,
    }
    if task.checker.numeric is not None:
        key = task.checker.numeric.key
        value = answer.get(key) if isinstance(answer, dict) else None
        if isinstance(value, dict):
            value = value.get("value")
        ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
        row["value"] = float(value) if ok else None
        row["reference"] = task.checker.numeric.reference.value
    if task.checker.spatial is not None:
        sp = task.checker.spatial
        pred = answer.get(sp.key) if isinstance(answer, dict) else None
        pred = [p for p in pred if isinstance(p, str)] if isinstance(pred, list) else []
        row["iou"] = iou_sets(pred, sp.reference_mask, sp.universe)
    if task.checker.counterfactual is not None:
        row["causal_success"] = memory.z == 1
    return row


def aggregate(rows: Sequence[dict[str, Any]]) -> dict[str, Any]:
    """Aggregates recomputable from per-task rows; every field is null on an empty set."""
    if not rows:
        return {
            "n_tasks": 0,
            "accuracy_by_family": {},
            "overall_accuracy": None,
            "mean_turns": None,
            "nrmse_forecast": None,
            "mean_iou_anomaly": None,
            "causal_success_rate": None,
        }
    by_family: dict[str, list[int]] = {}
    for r in rows:
        by_family.setdefault(r["family"], []).append(r["z"])
    forecast = [r for r in rows if r["family"] == "forecast" and r.get("value") is not None]
    try:
        nr = nrmse([r["value"] for r in forecast], [r["reference"] for r in forecast]) if forecast else None
    except ZeroMeanNormalization:
        nr = None
    ious = [r["iou"] for r in rows if r["family"] == "anomaly" and "iou" in r]
    causal = [r["causal_success"] for r in rows if "causal_success" in r]
    return {
        "n_tasks": len(rows),
        "accuracy_by_family": {f: sum(v) / len(v) for f, v in sorted(by_family.items())},
        "overall_accuracy": sum(r["z"] for r in rows) / len(rows),
        "mean_turns": sum(r["turns"] for r in rows) / len(rows),
        "nrmse_forecast": nr,
        "mean_iou_anomaly": sum(ious) / len(ious) if ious else None,
        "causal_success_rate": sum(causal) / len(causal) if causal else None,
    }


@dataclass
class RunReport:
    policy: str
    budget: Optional[int]
    rows: list[dict[str, Any]] = field(default_factory=list)
    variant: str = "full"
    oracle_feedback: bool = False

    @property
    def aggregates(self) -> dict[str, Any]:
        return aggregate(self.rows)

    def fault_bearing_accuracy(self) -> Optional[float]:
        hit = [r["z"] for r in self.rows if r.get("fault")]
        return sum(hit) / len(hit) if hit else None

    def to_json(self) -> dict[str, Any]:
        return {
            "policy": self.policy,
            "budget": self.budget,
            "variant": self.variant,
            "oracle_feedback": self.oracle_feedback,
            "tasks": self.rows,
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "RunReport":
        return cls(obj["policy"], obj.get("budget"), list(obj["tasks"]), obj.get("variant", "full"), bool(obj.get("oracle_feedback")))


def run_bench(
    world: Union[WorldState, ToolContext],
    tasks: Sequence[TaskInstance],
    policy_spec: str = "scripted",
    T_max: Optional[int] = None,
    workers: int = 1,
    *,
    oracle_feedback: bool = False,
    artifacts_dir: Optional[Union[str, Path]] = None,
    traces_dir: Optional[Union[str, Path]] = None,
    seed: int = 0,
    variant: str = "full",
    policy_factory: Optional[Callable[[], Any]] = None,
) -> RunReport:
    """One episode per task, in parallel up to ``workers``; rows keep task order.

    ``policy_factory`` overrides ``policy_spec`` (used to inject a configured
    remote policy). Each episode gets its own policy instance.
    """
    ctx = world if isinstance(world, ToolContext) else ToolContext(world)
    make = policy_factory or (lambda: make_policy(policy_spec, seed))
    if traces_dir is not None:
        Path(traces_dir).mkdir(parents=True, exist_ok=True)

    def one(task: TaskInstance) -> dict[str, Any]:
        policy = make()
        fault = policy.fault_for(task) if hasattr(policy, "fault_for") else None
        mem = run_episode(ctx, task, policy, T_max, oracle_feedback=oracle_feedback, artifacts_dir=artifacts_dir)
        if traces_dir is not None:
            mem.write_trace(Path(traces_dir) / f"{task.task_id}.json")
        return task_row(task, mem, fault.value if fault is not None else None)

    if workers <= 1:
        rows = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, tasks))
    return RunReport(policy_spec, T_max, rows, variant, oracle_feedback)


def ablate(
    world: WorldState,
    tasks: Sequence[TaskInstance],
    variants: Sequence[str] = VARIANTS,
    policy_spec: str = "faulty:mixed",
    T_max: int = 20,
    workers: int = 1,
    seed: int = 0,
) -> dict[str, Any]:
    """Run each variant and emit a comparison table (one row per variant)."""
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise UnknownVariant(f"unknown ablation variant(s) {unknown}", path="variants", observed=unknown, expected=list(VARIANTS))
    table = []
    reports = {}
    for v in variants:
        ctx = ToolContext(
            world,
            alignment=(v != "no_alignment"),
            disabled_families=frozenset({"rs"}) if v == "no_rs" else frozenset(),
        )
        budget = 1 if v == "one_shot" else T_max
        rep = run_bench(ctx, tasks, policy_spec, budget, workers, seed=seed, variant=v)
        agg = rep.aggregates
        interaction, scope, alignment = VARIANT_COLUMNS[v]
        table.append(
            {
                "variant": v,
                "interaction": interaction,
                "tool_scope": scope,
                "alignment": alignment,
                "avg_turns": agg["mean_turns"],
                "acc": agg["overall_accuracy"],
                "accuracy_by_family": agg["accuracy_by_family"],
            }
        )
        reports[v] = rep.to_json()
    return {"policy": policy_spec, "budget": T_max, "rows": table, "reports": reports}


def format_table(report: dict[str, Any]) -> str:
    """Plain-text rendering of a RunReport or an ablation table."""
    if "rows" in report and "reports" in report:
        head = f"{'variant':<14}{'interaction':<12}{'tool scope':<11}{'alignment':<10}{'avg turns':>10}{'acc':>8}"
        lines = [head, "-" * len(head)]
        for r in report["rows"]:
            turns = "-" if r["avg_turns"] is None else f"{r['avg_turns']:.2f}"
            acc = "-" if r["acc"] is None else f"{r['acc']:.3f}"
            lines.append(f"{r['variant']:<14}{r['interaction']:<12}{r['tool_scope']:<11}{r['alignment']:<10}{turns:>10}{acc:>8}")
        return "\n".join(lines)
    agg = report["aggregates"]

    def fmt(x: Any) -> str:
        return "-" if x is None else f"{x:.4f}" if isinstance(x, float) else str(x)

    lines = [f"policy {report['policy']}  budget {report.get('budget')}  tasks {agg['n_tasks']}"]
    for fam in FAMILIES:
        if fam in agg["accuracy_by_family"]:
            lines.append(f"  accuracy[{fam}] = {fmt(agg['accuracy_by_family'][fam])}")
    for key in ("overall_accuracy", "mean_turns", "nrmse_forecast", "mean_iou_anomaly", "causal_success_rate"):
        lines.append(f"  {key} = {fmt(agg[key])}")
    return "\n".join(lines)
