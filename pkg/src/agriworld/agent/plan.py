"""Declarative tool-call plans and their sandboxed execution.

A plan is an ordered list of steps ``{id, call: {tool, args}}`` plus an
optional answer template. Any argument or answer leaf may be a reference
``{"ref": step_id, "path": "a.b.0"}`` to an earlier step's value.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Union

from ..errors import AgroError, ArgumentError, PlanError
from ..model import WorldState
from ..toolkit import Artifact, ArtifactStore, ToolCall, ToolContext, invoke

MAX_STEPS = 32


def is_ref(obj: Any) -> bool:
    return isinstance(obj, dict) and "ref" in obj and set(obj) <= {"ref", "path"}


def ref(step: str, path: Optional[str] = None) -> dict[str, Any]:
    return {"ref": step} if path is None else {"ref": step, "path": path}


def iter_refs(obj: Any) -> Iterator[dict[str, Any]]:
    if is_ref(obj):
        yield obj
    elif isinstance(obj, dict):
        for v in obj.values():
            yield from iter_refs(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from iter_refs(v)


def get_path(value: Any, path: Union[str, list, None]) -> Any:
    if path in (None, ""):
        return value
    parts = path.split(".") if isinstance(path, str) else list(path)
    cur = value
    for part in parts:
        if isinstance(cur, list):
            cur = cur[int(part)]
        elif isinstance(cur, dict):
            cur = cur[str(part)]
        else:
            raise KeyError(part)
    return cur


@dataclass(frozen=True)
class Step:
    id: str
    call: ToolCall

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "call": self.call.to_json()}


@dataclass(frozen=True)
class PlanProgram:
    steps: tuple[Step, ...] = ()
    answer: Any = None
    # set when a policy could not produce a plan (e.g. unparseable model reply)
    diagnostic: Optional[dict[str, Any]] = field(default=None, compare=False)

    def to_json(self) -> dict[str, Any]:
        out = {"steps": [s.to_json() for s in self.steps], "answer": self.answer}
        if self.diagnostic is not None:
            out["diagnostic"] = self.diagnostic
        return out

    @classmethod
    def from_json(cls, obj: Any) -> "PlanProgram":
        if not isinstance(obj, dict) or not isinstance(obj.get("steps", []), list):
            raise PlanError("plan must be an object with a 'steps' list", observed=type(obj).__name__)
        try:
            steps = tuple(Step(str(s["id"]), ToolCall.from_json(s["call"])) for s in obj.get("steps", []))
        except (KeyError, TypeError, AttributeError) as exc:
            raise PlanError(f"malformed step: {exc!r}") from None
        return cls(steps, copy.deepcopy(obj.get("answer")), obj.get("diagnostic"))

    def step_index(self, step_id: str) -> int:
        for i, s in enumerate(self.steps):
            if s.id == step_id:
                return i
        raise KeyError(step_id)

    def validate(self) -> None:
        if len(self.steps) > MAX_STEPS:
            raise PlanError(f"plan has {len(self.steps)} steps, limit {MAX_STEPS}", observed=len(self.steps))
        seen: set[str] = set()
        for s in self.steps:
            if s.id in seen:
                raise PlanError(f"duplicate step id {s.id!r}", path=s.id)
            if not isinstance(s.call.tool, str) or not isinstance(s.call.args, dict):
                raise PlanError(f"step {s.id}: call needs a tool name and an args map", path=s.id)
            for r in iter_refs(s.call.args):
                if r["ref"] not in seen:
                    raise PlanError(
                        f"step {s.id} references {r['ref']!r}, which is not an earlier step",
                        path=s.id,
                        observed=r["ref"],
                    )
            seen.add(s.id)
        for r in iter_refs(self.answer):
            if r["ref"] not in seen:
                raise PlanError(f"answer references unknown step {r['ref']!r}", path="answer", observed=r["ref"])


@dataclass
class Execution:
    observations: list[dict[str, Any]]
    artifacts: list[Artifact]
    answer: Any
    answer_error: Optional[dict[str, Any]] = None
    step_provs: dict[str, str] = field(default_factory=dict)

    @property
    def failed_step(self) -> Optional[dict[str, Any]]:
        for o in self.observations:
            if not o["ok"]:
                return o
        return None


def _resolve(obj: Any, values: dict[str, Any]) -> Any:
    if is_ref(obj):
        return copy.deepcopy(get_path(values[obj["ref"]], obj.get("path")))
    if isinstance(obj, dict):
        return {k: _resolve(v, values) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_resolve(v, values) for v in obj]
    return obj


def _hash_form(obj: Any, provs: dict[str, str]) -> Any:
    if is_ref(obj):
        return {"from": provs[obj["ref"]], "path": obj.get("path")}
    if isinstance(obj, dict):
        return {k: _hash_form(v, provs) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_hash_form(v, provs) for v in obj]
    return obj


def execute_plan(
    world: Union[WorldState, ToolContext],
    plan: PlanProgram,
    store: Optional[ArtifactStore] = None,
) -> Execution:
    """Run steps in order; the first failing step halts the rest.

    Raises :class:`PlanError` (before executing anything) when the plan is
    structurally invalid.
    """
    plan.validate()
    values: dict[str, Any] = {}
    provs: dict[str, str] = {}
    observations: list[dict[str, Any]] = []
    artifacts: list[Artifact] = []
    for step in plan.steps:
        try:
            try:
                args = _resolve(step.call.args, values)
            except (KeyError, IndexError, ValueError, TypeError) as exc:
                raise ArgumentError(f"step {step.id}: reference path does not resolve ({exc!r})", path=step.id) from None
            value, art = invoke(world, ToolCall(step.call.tool, args), hash_args=_hash_form(step.call.args, provs))
        except AgroError as exc:
            diag = exc.to_diagnostic()
            diag.setdefault("details", {})
            diag["details"]["step"] = step.id
            observations.append({"step": step.id, "tool": step.call.tool, "ok": False, "error": diag})
            return Execution(observations, artifacts, None, None, provs)
        values[step.id] = value
        provs[step.id] = art.prov
        artifacts.append(art)
        if store is not None:
            store.append(art)
        observations.append({"step": step.id, "tool": step.call.tool, "ok": True, "prov": art.prov, "type": art.type})
    if plan.answer is None:
        return Execution(observations, artifacts, None, None, provs)
    try:
        answer = _resolve(plan.answer, values)
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        err = PlanError(f"answer reference does not resolve ({exc!r})", path="answer").to_diagnostic()
        return Execution(observations, artifacts, None, err, provs)
    return Execution(observations, artifacts, answer, None, provs)
