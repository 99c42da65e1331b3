"""The execute-observe-refine episode loop.

Each turn: the policy proposes a plan, the plan runs in the sandbox, the
answer (if any) is checked, and on failure a reflection patch is stored for
the next proposal. The episode stops on the first passing turn or at the
budget, and falls back to the turn with the fewest violations.

By default only tool errors and the schema and physical checker tiers are
shown to the policy mid-episode; an answer whose visible diagnostics are clean
is submitted and ends the episode. ``oracle_feedback=True`` shows every tier
and keeps iterating until ``z = 1``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .. import canonical
from ..errors import AgroError, PlanError, TransportError
from ..model import WorldState
from ..protocol.checker import DiagnosticReport, check
from ..protocol.tasks import TaskInstance
from ..toolkit import Artifact, ArtifactStore, ToolContext
from .plan import PlanProgram, execute_plan
from .reflect import reflect

DEFAULT_BUDGET = 20
VISIBLE_TIERS = ("schema", "physical")


@dataclass
class Turn:
    index: int
    plan: PlanProgram
    observations: list[dict[str, Any]] = field(default_factory=list)
    artifacts: list[Artifact] = field(default_factory=list)
    answer: Any = None
    report: Optional[DiagnosticReport] = None
    feedback: list[dict[str, Any]] = field(default_factory=list)
    step_provs: dict[str, str] = field(default_factory=dict)
    patch: Optional[PlanProgram] = None

    def to_json(self) -> dict[str, Any]:
        return {
            "turn": self.index,
            "plan": self.plan.to_json(),
            "observations": self.observations,
            "artifacts": [a.prov for a in self.artifacts],
            "answer": self.answer,
            "report": self.report.to_json() if self.report is not None else None,
            "feedback": self.feedback,
            "patch": self.patch.to_json() if self.patch is not None else None,
        }


@dataclass
class EpisodeMemory:
    task: TaskInstance
    ctx: ToolContext
    turns: list[Turn] = field(default_factory=list)
    status: str = "running"
    wall_ms: Optional[float] = None

    def best_turn(self) -> Optional[Turn]:
        """Fewest violations, then earliest; turns without an answer never qualify."""
        scored = [t for t in self.turns if t.report is not None]
        if not scored:
            return None
        return min(scored, key=lambda t: (len(t.report.violations), t.index))

    @property
    def z(self) -> int:
        best = self.best_turn()
        return best.report.z if best is not None else 0

    @property
    def answer(self) -> Any:
        best = self.best_turn()
        return best.answer if best is not None else None

    def to_json(self) -> dict[str, Any]:
        best = self.best_turn()
        return {
            "task_id": self.task.task_id,
            "turns": [t.to_json() for t in self.turns],
            "status": self.status,
            "wall_ms": self.wall_ms,
            "result": {
                "turn": best.index if best is not None else None,
                "z": self.z,
                "answer": self.answer,
                "violations": [v.to_json() for v in best.report.violations] if best is not None else [],
            },
        }

    def write_trace(self, path: Union[str, Path]) -> None:
        canonical.write(path, self.to_json())


def _run_turn(memory: EpisodeMemory, plan: PlanProgram, store: ArtifactStore, oracle_feedback: bool) -> Turn:
    turn = Turn(len(memory.turns) + 1, plan)
    if plan.diagnostic is not None:
        turn.feedback = [plan.diagnostic]
        return turn
    try:
        ex = execute_plan(memory.ctx, plan, store)
    except PlanError as exc:
        turn.feedback = [exc.to_diagnostic()]
        return turn
    turn.observations = ex.observations
    turn.artifacts = ex.artifacts
    turn.step_provs = ex.step_provs
    failed = ex.failed_step
    if failed is not None:
        turn.feedback = [failed["error"]]
        return turn
    if ex.answer_error is not None:
        turn.feedback = [ex.answer_error]
        return turn
    if plan.answer is None:
        turn.feedback = [{"code": "SchemaError", "message": "plan has no answer template", "path": "answer", "observed": None, "expected": None}]
        return turn
    turn.answer = ex.answer
    turn.report = check(ex.answer, ex.artifacts, memory.task, memory.ctx)
    visible = turn.report if oracle_feedback else turn.report.visible(VISIBLE_TIERS)
    turn.feedback = [v.to_json() for v in visible.violations]
    return turn


def run_episode(
    world: Union[WorldState, ToolContext],
    task: TaskInstance,
    policy: Any,
    T_max: Optional[int] = None,
    *,
    oracle_feedback: bool = False,
    artifacts_dir: Optional[Union[str, Path]] = None,
    timing: bool = False,
) -> EpisodeMemory:
    """Run one episode; never raises for agent-side failures.

    ``T_max`` defaults to the task budget (itself 20 for generated tasks).
    ``timing=True`` records ``wall_ms``; it is off by default so traces stay
    byte-identical across runs.
    """
    ctx = world if isinstance(world, ToolContext) else ToolContext(world)
    budget = T_max if T_max is not None else task.budget
    if budget < 1:
        raise PlanError("budget must be >= 1", path="T_max", observed=budget)
    store = ArtifactStore(Path(artifacts_dir) / task.task_id if artifacts_dir is not None else None)
    memory = EpisodeMemory(task, ctx)
    start = time.perf_counter()
    for _ in range(budget):
        try:
            plan = policy.propose(memory)
        except TransportError as exc:
            turn = Turn(len(memory.turns) + 1, PlanProgram(), feedback=[exc.to_diagnostic()])
        else:
            turn = _run_turn(memory, plan, store, oracle_feedback)
        memory.turns.append(turn)
        if turn.report is not None and turn.report.z == 1:
            memory.status = "solved"
            break
        if turn.report is not None and not turn.feedback:
            # submitted: the visible tiers are clean but hidden ones failed
            break
        if getattr(policy, "reflective", False) and len(memory.turns) < budget:
            try:
                turn.patch = reflect(memory)
            except AgroError:
                turn.patch = turn.plan
    if memory.status != "solved":
        memory.status = "exhausted"
    if timing:
        memory.wall_ms = round((time.perf_counter() - start) * 1000.0, 3)
    return memory
