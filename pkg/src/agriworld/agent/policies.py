"""Plan-proposing policies and the fault injector used to exercise reflection."""

from __future__ import annotations

import copy
import enum
import hashlib
from typing import Any, Optional, Protocol

from ..errors import UnknownVariant
from ..units import dim_of, is_unit, units_of
from .plan import PlanProgram, is_ref, ref

WINDOW_SHIFT = 30
_MISSABLE_KEYS = ("parcel_id", "region", "unit", "action")
_HEADLINE_KEYS = ("value", "delta")
_COLUMN_ARGS = {"rs.load": "index", "wx.get": "var", "grid.sample": "gridfield", "grid.aggregate": "gridfield"}


class FaultKind(str, enum.Enum):
    WrongCrs = "WrongCrs"
    WrongUnit = "WrongUnit"
    WrongWindow = "WrongWindow"
    WrongColumn = "WrongColumn"
    MissingKey = "MissingKey"
    UngroundedNumber = "UngroundedNumber"


# the diagnostic code each fault is expected to surface first
EXPECTED_CODE = {
    FaultKind.WrongCrs: "SpatialMisalignment",
    FaultKind.WrongUnit: "UnitError",
    FaultKind.WrongWindow: "TemporalWindowError",
    FaultKind.WrongColumn: "UnknownBand",
    FaultKind.MissingKey: "SchemaError",
    FaultKind.UngroundedNumber: "UngroundedClaim",
}


def _stable_int(*parts: Any) -> int:
    return int(hashlib.sha256(":".join(str(p) for p in parts).encode()).hexdigest()[:16], 16)


def _replace_refs(obj: Any, step_id: str, repl: Any) -> Any:
    if is_ref(obj) and obj["ref"] == step_id and obj.get("path") is None:
        return copy.deepcopy(repl)
    if isinstance(obj, dict):
        return {k: _replace_refs(v, step_id, repl) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_replace_refs(v, step_id, repl) for v in obj]
    return obj


def misspell(name: str) -> str:
    """Drop the middle character: ``ndvi`` -> ``ndi``."""
    i = len(name) // 2
    return name[:i] + name[i + 1 :]


def _wrong_crs(doc: dict, task: Any) -> bool:
    for s in doc["steps"]:
        if s["call"]["tool"] == "geo.align":
            src = s["call"]["args"]["parcels"]
            doc["steps"] = [t for t in doc["steps"] if t is not s]
            doc["steps"] = _replace_refs(doc["steps"], s["id"], src)
            doc["answer"] = _replace_refs(doc["answer"], s["id"], src)
            return True
    return False


def _wrong_unit(doc: dict, task: Any) -> bool:
    ans = doc["answer"]
    if not isinstance(ans, dict) or "value" not in ans or not is_unit(ans.get("unit")):
        return False
    unit = ans["unit"]
    alternatives = [u for u in units_of(dim_of(unit)) if u != unit]
    if not alternatives:
        return False
    alt = alternatives[0]
    sid = "fault_conv"
    doc["steps"].append({"id": sid, "call": {"tool": "units.convert", "args": {"value": ans["value"], "unit": unit, "to": alt}}})
    ans["value"] = ref(sid, "value")
    ans["unit"] = alt
    return True


def _wrong_window(doc: dict, task: Any) -> bool:
    hit = False
    for s in doc["steps"]:
        tr = s["call"]["args"].get("time_range")
        if isinstance(tr, list) and not is_ref(tr):
            s["call"]["args"]["time_range"] = [tr[0] + WINDOW_SHIFT, tr[1] + WINDOW_SHIFT]
            hit = True
    return hit


def _wrong_column(doc: dict, task: Any) -> bool:
    for s in doc["steps"]:
        arg = _COLUMN_ARGS.get(s["call"]["tool"])
        if arg and isinstance(s["call"]["args"].get(arg), str):
            s["call"]["args"][arg] = misspell(s["call"]["args"][arg])
            return True
    return False


def _missing_key(doc: dict, task: Any) -> bool:
    ans = doc["answer"]
    if not isinstance(ans, dict):
        return False
    for key in _MISSABLE_KEYS:
        f = task.output_schema.field(key)
        if key in ans and f is not None and f.enum is not None and len(f.enum) == 1:
            del ans[key]
            return True
    return False


def _ungrounded(doc: dict, task: Any) -> bool:
    ans = doc["answer"]
    if not isinstance(ans, dict):
        return False
    # only headline figures: the keys a checker citation can point back to
    for f in task.output_schema.required:
        if f.kind == "number" and f.key in _HEADLINE_KEYS and is_ref(ans.get(f.key)):
            # an invented figure with no artifact behind it
            ans[f.key] = round(0.1234567 + (_stable_int(task.task_id, f.key) % 100_000) / 997.0, 7)
            return True
    return False


_INJECTORS = {
    FaultKind.WrongCrs: _wrong_crs,
    FaultKind.WrongUnit: _wrong_unit,
    FaultKind.WrongWindow: _wrong_window,
    FaultKind.WrongColumn: _wrong_column,
    FaultKind.MissingKey: _missing_key,
    FaultKind.UngroundedNumber: _ungrounded,
}


def inject_fault(task: Any, kind: FaultKind) -> Optional[PlanProgram]:
    """The reference plan with one ``kind`` fault, or None when the plan lacks the construct."""
    doc = copy.deepcopy(task.reference_plan.to_json())
    if not _INJECTORS[FaultKind(kind)](doc, task):
        return None
    return PlanProgram.from_json(doc)


def applicable_faults(task: Any) -> list[FaultKind]:
    return [k for k in FaultKind if inject_fault(task, k) is not None]


def choose_fault(task: Any, seed: int = 0) -> Optional[FaultKind]:
    kinds = applicable_faults(task)
    if not kinds:
        return None
    return kinds[_stable_int(task.task_id, seed) % len(kinds)]


class Policy(Protocol):
    name: str
    reflective: bool

    def propose(self, memory: Any) -> PlanProgram: ...


class ScriptedPolicy:
    """Emits the task's reference plan every turn."""

    name = "scripted"
    reflective = False

    def propose(self, memory: Any) -> PlanProgram:
        return memory.task.reference_plan

    def fault_for(self, task: Any) -> Optional[FaultKind]:
        return None


class FaultyPolicy:
    """Reference plan with one injected fault on turn 1, then reflection patches."""

    reflective = True

    def __init__(self, kind: str = "mixed", seed: int = 0) -> None:
        if kind != "mixed":
            FaultKind(kind)
        self.kind = kind
        self.seed = seed
        self.name = f"faulty:{kind}"

    def fault_for(self, task: Any) -> Optional[FaultKind]:
        if self.kind == "mixed":
            return choose_fault(task, self.seed)
        kind = FaultKind(self.kind)
        return kind if inject_fault(task, kind) is not None else None

    def propose(self, memory: Any) -> PlanProgram:
        if memory.turns:
            last = memory.turns[-1]
            return last.patch if last.patch is not None else last.plan
        kind = self.fault_for(memory.task)
        if kind is None:
            return memory.task.reference_plan
        return inject_fault(memory.task, kind)


def make_policy(spec: str, seed: int = 0) -> Any:
    """Parse ``scripted``, ``faulty:<kind|mixed>`` or ``remote``."""
    if spec == "scripted":
        return ScriptedPolicy()
    if spec.startswith("faulty:"):
        kind = spec.split(":", 1)[1]
        try:
            return FaultyPolicy(kind, seed)
        except ValueError:
            raise UnknownVariant(
                f"unknown fault kind {kind!r}", path="policy", observed=kind, expected=["mixed"] + [k.value for k in FaultKind]
            ) from None
    if spec == "remote":
        from .remote import RemotePolicy

        return RemotePolicy.from_env()
    raise UnknownVariant(f"unknown policy {spec!r}", path="policy", observed=spec, expected=["scripted", "faulty:<kind|mixed>", "remote"])
