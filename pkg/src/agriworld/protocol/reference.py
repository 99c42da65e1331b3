"""Reference-program execution for sealed task answers."""

from __future__ import annotations

from typing import Any, Union

from ..agent.plan import execute_plan
from ..errors import AgroError, PlanError
from ..model import WorldState
from ..toolkit import Artifact, ToolContext
from .tasks import TaskInstance


def run_reference(task: TaskInstance, world: Union[WorldState, ToolContext]) -> tuple[Any, list[Artifact]]:
    """Execute ``task.reference_plan``; any step error aborts with that error."""
    ctx = world if isinstance(world, ToolContext) else ToolContext(world)
    if ctx.world.world_id != task.world_id:
        raise PlanError(
            f"task {task.task_id} is bound to world {task.world_id}, not {ctx.world.world_id}",
            path="world_id",
            observed=ctx.world.world_id,
            expected=task.world_id,
        )
    ex = execute_plan(ctx, task.reference_plan)
    failed = ex.failed_step
    if failed is not None:
        err = failed["error"]
        raise AgroError(f"reference step {failed['step']} failed: {err['message']}", path=err.get("path", ""), **{"diagnostic": err})
    if ex.answer_error is not None:
        raise PlanError(ex.answer_error["message"], path="answer")
    return ex.answer, ex.artifacts
