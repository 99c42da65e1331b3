"""Rule-based reflection: a deterministic patch per diagnostic code.

Rules read only the diagnostic fields (``code``, ``path``, ``observed``,
``expected``, ``details``) plus the task bindings and the failed turn's
step-to-provenance map; they never consult the sealed reference.
"""

from __future__ import annotations

import copy
import difflib
from typing import Any, Callable, Optional, Sequence

from ..errors import ReflectionError
from .plan import PlanProgram, is_ref, iter_refs, ref

WIDEN_DAYS = 15


class _Draft:
    """Mutable JSON form of a plan under repair."""

    def __init__(self, plan: PlanProgram) -> None:
        doc = copy.deepcopy(plan.to_json())
        self.steps: list[dict[str, Any]] = doc["steps"]
        self.answer: Any = doc.get("answer")

    def index(self, step_id: Optional[str]) -> Optional[int]:
        for i, s in enumerate(self.steps):
            if s["id"] == step_id:
                return i
        return None

    def fresh_id(self, base: str) -> str:
        taken = {s["id"] for s in self.steps}
        n = 1
        while f"{base}{n}" in taken:
            n += 1
        return f"{base}{n}"

    def insert(self, at: int, tool: str, args: dict[str, Any], base: str) -> str:
        sid = self.fresh_id(base)
        self.steps.insert(at, {"id": sid, "call": {"tool": tool, "args": args}})
        return sid

    def to_plan(self) -> PlanProgram:
        return PlanProgram.from_json({"steps": self.steps, "answer": self.answer})


def _step_of(diag: dict[str, Any]) -> Optional[str]:
    return (diag.get("details") or {}).get("step")


def _cited_step(diag: dict[str, Any], step_provs: dict[str, str]) -> Optional[str]:
    cite = (diag.get("details") or {}).get("cite")
    for sid, prov in step_provs.items():
        if prov == cite:
            return sid
    return None


def _within(inner: Sequence[int], outer: Sequence[int]) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


# -- rules ------------------------------------------------------------------


def _spatial(d: _Draft, diag: dict, bindings: dict, provs: dict) -> bool:
    i = d.index(_step_of(diag))
    if i is None or diag.get("expected") is None:
        return False
    args = d.steps[i]["call"]["args"]
    arg = diag.get("path") or "parcels"
    if arg not in args:
        return False
    sid = d.insert(i, "geo.align", {"parcels": args[arg], "crs": diag["expected"]}, "align")
    args[arg] = ref(sid)
    return True


def _unit(d: _Draft, diag: dict, bindings: dict, provs: dict) -> bool:
    want = diag.get("expected")
    if not isinstance(want, str):
        return False
    i = d.index(_step_of(diag))
    if i is not None:
        # a tool rejected an input's unit: convert that input first
        args = d.steps[i]["call"]["args"]
        arg = diag.get("path")
        if arg not in args:
            return False
        sid = d.insert(i, "units.convert", {"value": args[arg], "to": want}, "conv")
        args[arg] = ref(sid)
        return True
    if not isinstance(d.answer, dict):
        return False
    path = diag.get("path") or ""
    if path.endswith(".unit"):
        key = path[: -len(".unit")]
        if key not in d.answer:
            return False
        sid = d.insert(len(d.steps), "units.convert", {"value": d.answer[key], "to": want}, "conv")
        d.answer[key] = ref(sid)
        return True
    if path == "unit" and "value" in d.answer:
        src = d.answer.get("unit")
        args = {"value": d.answer["value"], "to": want}
        if isinstance(src, str):
            args["unit"] = src
        sid = d.insert(len(d.steps), "units.convert", args, "conv")
        d.answer["value"] = ref(sid, "value")
        d.answer["unit"] = want
        return True
    return False


def _set_windows(d: _Draft, old: Any, new: list[int], only: Optional[int] = None) -> bool:
    changed = False
    for j, s in enumerate(d.steps):
        args = s["call"]["args"]
        tr = args.get("time_range")
        if tr is None or is_ref(tr):
            continue
        if (only is not None and j == only) or (old is not None and list(tr) == list(old)):
            if list(tr) != new:
                args["time_range"] = list(new)
                changed = True
    return changed


def _window(d: _Draft, diag: dict, bindings: dict, provs: dict) -> bool:
    bound = bindings.get("time_range")
    details = diag.get("details") or {}
    i = d.index(_step_of(diag))
    if i is None:
        i = d.index(_cited_step(diag, provs))
    if i is None:
        return False
    args = d.steps[i]["call"]["args"]
    old = args.get("time_range")
    avail = details.get("available")
    expected = diag.get("expected")
    if bound is not None and (avail is None or _within(bound, avail)):
        target = list(bound)
    elif isinstance(expected, list) and len(expected) == 2:
        target = [int(expected[0]), int(expected[1])]
    else:
        return False
    return _set_windows(d, old, target, only=i)


def _coverage(d: _Draft, diag: dict, bindings: dict, provs: dict) -> bool:
    i = d.index(_step_of(diag))
    if i is None:
        return False
    # the coverage lives in the raster view feeding the failing step
    src = next((r["ref"] for r in iter_refs(d.steps[i]["call"]["args"].get("raster_ts"))), None)
    j = d.index(src)
    if j is None:
        return False
    args = d.steps[j]["call"]["args"]
    tr = args.get("time_range")
    if tr is None or is_ref(tr):
        return False
    bound = bindings.get("time_range")
    if bound is not None and list(tr) != list(bound):
        args["time_range"] = list(bound)
        return True
    season = bindings.get("season")
    lo, hi = tr[0] - WIDEN_DAYS, tr[1] + WIDEN_DAYS
    if season is not None:
        lo, hi = max(lo, season[0]), min(hi, season[1])
    args["time_range"] = [lo, hi]
    return [lo, hi] != list(tr)


def _schema(d: _Draft, diag: dict, bindings: dict, provs: dict) -> bool:
    if not isinstance(d.answer, dict):
        return False
    key = diag.get("path") or ""
    expected = diag.get("expected")
    schema_keys = bindings.get("schema_keys") or []
    if key and key not in d.answer:
        if schema_keys and key not in schema_keys:
            return False  # an extra key already renamed or dropped
        extras = [k for k in d.answer if k not in schema_keys]
        if len(extras) == 1 and schema_keys:
            d.answer[key] = d.answer.pop(extras[0])
            return True
        if expected is not None and expected not in ("string", "number", "quantity", "parcel_id_list", "series"):
            d.answer[key] = copy.deepcopy(expected)
            return True
        return False
    if key in d.answer and diag.get("observed") == key and isinstance(expected, str):
        # an unexpected key that should carry another name
        if expected not in d.answer:
            d.answer[expected] = d.answer.pop(key)
            return True
        del d.answer[key]
        return True
    if key in d.answer and expected is not None and not isinstance(expected, (list, dict)):
        if expected not in ("string", "number", "quantity", "parcel_id_list", "series"):
            d.answer[key] = expected
            return True
    return False


def _ground(d: _Draft, diag: dict, bindings: dict, provs: dict) -> bool:
    details = diag.get("details") or {}
    sid = _cited_step(diag, provs)
    key = diag.get("path")
    if sid is None or not isinstance(d.answer, dict) or key not in d.answer:
        return False
    new = ref(sid, details.get("headline"))
    if d.answer[key] == new:
        return False
    d.answer[key] = new
    return True


def _column(d: _Draft, diag: dict, bindings: dict, provs: dict) -> bool:
    i = d.index(_step_of(diag))
    options = diag.get("expected")
    if i is None or not isinstance(options, list) or not options:
        return False
    args = d.steps[i]["call"]["args"]
    arg = diag.get("path")
    if arg not in args or not isinstance(args[arg], str):
        return False
    args[arg] = difflib.get_close_matches(args[arg], [str(o) for o in options], n=1, cutoff=0.0)[0]
    return True


RULES: dict[str, Callable[[_Draft, dict, dict, dict], bool]] = {
    "SpatialMisalignment": _spatial,
    "UnitError": _unit,
    "DimensionMismatch": _unit,
    "TemporalWindowError": _window,
    "LowCoverage": _coverage,
    "SchemaError": _schema,
    "UngroundedClaim": _ground,
    "ToleranceExceeded": _ground,
    "UnknownBand": _column,
}


def reflect_plan(
    plan: PlanProgram,
    diagnostics: Sequence[dict[str, Any]],
    bindings: dict[str, Any],
    step_provs: Optional[dict[str, str]] = None,
) -> PlanProgram:
    """Apply every matching rule in order; unknown codes leave the plan unchanged."""
    draft = _Draft(plan)
    provs = dict(step_provs or {})
    for diag in diagnostics:
        rule = RULES.get(diag.get("code", ""))
        if rule is None:
            continue
        snapshot = copy.deepcopy((draft.steps, draft.answer))
        try:
            rule(draft, diag, bindings, provs)
        except (KeyError, IndexError, TypeError, ValueError):
            draft.steps, draft.answer = snapshot
    try:
        return draft.to_plan()
    except Exception:
        return plan


def reflect(memory: Any) -> PlanProgram:
    """Patch the last turn's plan from its visible feedback.

    ``memory`` is an episode memory whose last turn failed; calling this on a
    solved episode raises :class:`ReflectionError`.
    """
    if not memory.turns:
        raise ReflectionError("nothing to reflect on: no turns recorded")
    last = memory.turns[-1]
    if last.report is not None and last.report.z == 1:
        raise ReflectionError("last turn passed the checker; reflection applies only after a failure")
    if not last.feedback and last.answer is not None:
        raise ReflectionError("last turn carries no diagnostics to act on")
    bindings = dict(memory.task.bindings)
    bindings["schema_keys"] = [f.key for f in memory.task.output_schema.required]
    return reflect_plan(last.plan, last.feedback, bindings, last.step_provs)
