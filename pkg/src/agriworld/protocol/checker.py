"""Hierarchical executable checker: ``(z, d) = V(answer, artifacts | task)``.

Tiers run in order (schema, numeric, counterfactual, physical) and every
violation is accumulated, so reflection sees all of them at once. The checker
never raises: an internal failure becomes a violation of the tier it hit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Sequence, Union

from ..errors import AgroError
from ..model import WorldState
from ..sim import Intervention, delta as sim_delta
from ..toolkit import Artifact, ToolContext
from ..units import Quantity, convert_value, is_unit, same_dim
from .metrics import iou_sets
from .tasks import SchemaField, TaskInstance

TIERS = ("schema", "numeric", "counterfactual", "physical")
CODES = (
    "SchemaError",
    "ToleranceExceeded",
    "CausalDirectionViolated",
    "UnitError",
    "SpatialMisalignment",
    "LowCoverage",
    "TemporalWindowError",
    "UngroundedClaim",
)
# artifacts computed over geometry must state the CRS they were computed in
_SPATIAL_TOOLS = ("geo.sjoin", "geo.align", "rs.load", "rs.zonal_stats", "grid.sample", "grid.aggregate")


@dataclass(frozen=True)
class Violation:
    tier: str
    code: str
    path: str
    message: str
    observed: Any = None
    expected: Any = None
    details: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        out = {
            "tier": self.tier,
            "code": self.code,
            "path": self.path,
            "message": self.message,
            "observed": self.observed,
            "expected": self.expected,
        }
        if self.details:
            out["details"] = self.details
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Violation":
        return cls(
            obj["tier"], obj["code"], obj["path"], obj["message"], obj.get("observed"), obj.get("expected"), dict(obj.get("details") or {})
        )


@dataclass(frozen=True)
class DiagnosticReport:
    violations: tuple[Violation, ...] = ()

    @property
    def z(self) -> int:
        return 0 if self.violations else 1

    def visible(self, tiers: Sequence[str]) -> "DiagnosticReport":
        return DiagnosticReport(tuple(v for v in self.violations if v.tier in tiers))

    def to_json(self) -> dict[str, Any]:
        return {"z": self.z, "violations": [v.to_json() for v in self.violations]}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "DiagnosticReport":
        return cls(tuple(Violation.from_json(v) for v in obj.get("violations", [])))


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_quantity(v: Any) -> bool:
    return isinstance(v, dict) and _is_number(v.get("value")) and is_unit(v.get("unit"))


# -- tier 1: schema ---------------------------------------------------------


def _check_kind(f: SchemaField, v: Any) -> Optional[str]:
    if f.kind == "string" and not isinstance(v, str):
        return "a string"
    if f.kind == "number" and not _is_number(v):
        return "a finite number"
    if f.kind == "quantity" and not _is_quantity(v):
        return "a quantity {value, unit}"
    if f.kind == "parcel_id_list" and not (isinstance(v, list) and all(isinstance(x, str) for x in v)):
        return "a list of parcel ids"
    if f.kind == "series":
        vals = v.get("values") if isinstance(v, dict) else v
        if not (isinstance(vals, list) and all(x is None or _is_number(x) for x in vals)):
            return "a series of numbers"
    return None


def _schema(answer: Any, task: TaskInstance) -> list[Violation]:
    out: list[Violation] = []
    schema = task.output_schema
    if not isinstance(answer, dict):
        return [Violation("schema", "SchemaError", "", "answer must be a JSON object", type(answer).__name__, "object")]
    for f in schema.required:
        if f.key not in answer:
            expected = f.enum[0] if f.enum is not None and len(f.enum) == 1 else f.kind
            out.append(Violation("schema", "SchemaError", f.key, f"missing required key {f.key!r}", None, expected))
            continue
        v = answer[f.key]
        want = _check_kind(f, v)
        if want is not None:
            out.append(Violation("schema", "SchemaError", f.key, f"{f.key} must be {want}", v, f.kind))
            continue
        if f.unit is not None:
            # a string key naming a unit, or a quantity's own unit
            unit, upath = (v, f.key) if f.kind == "string" else (v.get("unit"), f"{f.key}.unit") if isinstance(v, dict) else (None, f.key)
            if unit != f.unit:
                code = "UnitError" if is_unit(unit) else "SchemaError"
                out.append(Violation("schema", code, upath, f"{upath} must be {f.unit}", unit, f.unit))
                continue
        if f.enum is not None and v not in f.enum:
            expected = f.enum[0] if len(f.enum) == 1 else list(f.enum)
            out.append(Violation("schema", "SchemaError", f.key, f"{f.key} not among allowed values", v, expected))
    for key in sorted(set(answer) - {f.key for f in schema.required}):
        missing = [f.key for f in schema.required if f.key not in answer]
        out.append(
            Violation("schema", "SchemaError", key, f"unexpected key {key!r}", key, missing[0] if len(missing) == 1 else None)
        )
    return out


# -- tier 2: numeric and spatial --------------------------------------------


def _answer_unit(answer: dict, key: str) -> Optional[str]:
    v = answer.get(key)
    if isinstance(v, dict) and is_unit(v.get("unit")):
        return v["unit"]
    u = answer.get("unit")
    return u if is_unit(u) else None


def _answer_number(answer: dict, key: str) -> Any:
    v = answer.get(key)
    return v.get("value") if isinstance(v, dict) else v


def _headline_cite(artifacts: Sequence[Artifact], unit: Optional[str]) -> dict[str, Any]:
    for art in reversed(artifacts):
        h = art.meta.get("headline")
        if h is None:
            continue
        au = art.meta.get("unit")
        if unit is None or (is_unit(au) and same_dim(au, unit)):
            return {"cite": art.prov, "headline": h, "tool": art.meta.get("tool")}
    return {}


def _numeric(answer: dict, task: TaskInstance, artifacts: Sequence[Artifact]) -> list[Violation]:
    out: list[Violation] = []
    cfg = task.checker.numeric
    if cfg is not None and cfg.key in answer:
        y = _answer_number(answer, cfg.key)
        if _is_number(y):
            ref = cfg.reference
            unit = _answer_unit(answer, cfg.key) or ref.unit
            if not same_dim(unit, ref.unit):
                out.append(Violation("numeric", "UnitError", cfg.key, f"{unit} cannot be compared with {ref.unit}", unit, ref.unit))
            else:
                yv = convert_value(float(y), unit, ref.unit)
                tol = cfg.tolerance()
                if not abs(yv - ref.value) < tol:
                    out.append(
                        Violation(
                            "numeric",
                            "ToleranceExceeded",
                            cfg.key,
                            f"|{yv} - reference| >= {tol} {ref.unit}",
                            yv,
                            {"tolerance": tol, "unit": ref.unit},
                            _headline_cite(artifacts, unit),
                        )
                    )
    sp = task.checker.spatial
    if sp is not None and isinstance(answer.get(sp.key), list):
        score = iou_sets(answer[sp.key], sp.reference_mask, sp.universe)
        if score < sp.min_iou:
            out.append(
                Violation(
                    "numeric",
                    "ToleranceExceeded",
                    sp.key,
                    f"IoU {score:.4f} below {sp.min_iou}",
                    score,
                    sp.min_iou,
                    _headline_cite(artifacts, None),
                )
            )
    return out


# -- tier 3: counterfactual -------------------------------------------------


def proposed_intervention(answer: dict) -> Intervention:
    mag = answer.get("magnitude")
    q = Quantity.from_json(mag) if isinstance(mag, dict) else Quantity(float(mag), "mm_per_day")
    return Intervention(answer["action"], q, (int(answer["window_start"]), int(answer["window_end"])))


def _counterfactual(answer: dict, task: TaskInstance, ctx: ToolContext) -> list[Violation]:
    cfg = task.checker.counterfactual
    if cfg is None:
        return []
    pid = answer.get("parcel_id", task.bindings.get("parcel_id"))
    try:
        iv = proposed_intervention(answer)
    except (AgroError, KeyError, TypeError, ValueError) as exc:
        return [Violation("counterfactual", "CausalDirectionViolated", "", f"no valid intervention in answer: {exc}", None, None)]
    out: list[Violation] = []
    if cfg.magnitude_bounds is not None:
        lo, hi = cfg.magnitude_bounds
        if not lo <= iv.magnitude.value <= hi:
            out.append(
                Violation("counterfactual", "CausalDirectionViolated", "magnitude", "magnitude outside bounds", iv.magnitude.value, [lo, hi])
            )
    bw = task.bindings.get("window_bounds")
    if bw is not None and not (bw[0] <= iv.window[0] and iv.window[1] <= bw[1]):
        out.append(Violation("counterfactual", "CausalDirectionViolated", "window_start", "window outside bounds", list(iv.window), bw))
    d, _, _ = sim_delta(ctx, pid, iv, cfg.target)
    ok = d <= -cfg.delta if cfg.target == "stress_index" else d >= cfg.delta
    if not ok:
        want = f"<= {-cfg.delta}" if cfg.target == "stress_index" else f">= {cfg.delta}"
        out.append(
            Violation(
                "counterfactual",
                "CausalDirectionViolated",
                "magnitude",
                f"re-simulated {cfg.target} delta {d} is not {want}",
                d,
                -cfg.delta if cfg.target == "stress_index" else cfg.delta,
            )
        )
    return out


# -- tier 4: physical -------------------------------------------------------


def _leaves(obj: Any, unit: str, path: str = "") -> Iterator[tuple[str, float, str]]:
    """Numeric leaves of a payload as ``(path, value, unit)``."""
    if isinstance(obj, dict):
        own = obj.get("unit")
        if _is_number(obj.get("value")) and is_unit(own):
            yield (f"{path}.value" if path else "value"), float(obj["value"]), own
        for k, v in obj.items():
            if k == "value" and is_unit(own):
                continue
            yield from _leaves(v, unit, f"{path}.{k}" if path else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _leaves(v, unit, f"{path}.{i}" if path else str(i))
    elif _is_number(obj):
        yield path, float(obj), unit


def _grounded(value: float, unit: Optional[str], artifacts: Sequence[Artifact], rel: float) -> bool:
    for art in artifacts:
        base = art.meta.get("unit", "dimensionless")
        for _, leaf, lu in _leaves(art.payload, base if is_unit(base) else "dimensionless"):
            if unit is not None and is_unit(lu) and same_dim(unit, lu) and unit != lu:
                v = convert_value(value, unit, lu)
            elif unit is not None and is_unit(lu) and not same_dim(unit, lu):
                continue
            else:
                v = value
            if abs(v - leaf) <= rel * max(abs(leaf), abs(v)) + 1e-12:
                return True
    return False


def _physical(answer: Any, task: TaskInstance, artifacts: Sequence[Artifact]) -> list[Violation]:
    cfg = task.checker.physical
    out: list[Violation] = []
    bound = task.bindings.get("time_range")
    for art in artifacts:
        tool = art.meta.get("tool", "")
        unit = art.meta.get("unit")
        if not is_unit(unit):
            out.append(Violation("physical", "UnitError", f"artifact:{art.prov[:12]}", f"{tool} emitted unknown unit", unit, None))
        if tool in _SPATIAL_TOOLS and "crs" not in art.meta:
            out.append(Violation("physical", "SpatialMisalignment", f"artifact:{art.prov[:12]}", f"{tool} artifact lacks a CRS", None, None))
        nu = art.meta.get("validity_ratio")
        if nu is not None and nu < cfg.tau_min:
            out.append(Violation("physical", "LowCoverage", f"artifact:{art.prov[:12]}", f"validity ratio {nu} below {cfg.tau_min}", nu, cfg.tau_min))
        tr = art.meta.get("t_range")
        if bound is not None and tr is not None and list(tr) != list(bound):
            out.append(
                Violation(
                    "physical",
                    "TemporalWindowError",
                    "time_range",
                    f"{tool} used window {list(tr)} but the task binds {list(bound)}",
                    list(tr),
                    list(bound),
                    {"mode": "exact", "cite": art.prov, "tool": tool},
                )
            )
    if not isinstance(answer, dict):
        return out
    for key, want in sorted(cfg.required_units.items()):
        if key not in answer:
            continue
        got = _answer_unit(answer, key)
        if got is None or not same_dim(got, want):
            out.append(Violation("physical", "UnitError", key, f"{key} must carry a unit of the same dimension as {want}", got, want))
    for f in task.output_schema.required:
        if f.kind not in ("number", "quantity") or f.key not in answer:
            continue
        y = _answer_number(answer, f.key)
        if not _is_number(y):
            continue
        unit = _answer_unit(answer, f.key) if (f.kind == "quantity" or "unit" in answer) else None
        if not _grounded(float(y), unit, artifacts, cfg.ground_rel_tol):
            out.append(
                Violation(
                    "physical",
                    "UngroundedClaim",
                    f.key,
                    f"{f.key}={y} does not appear in any artifact",
                    y,
                    None,
                    _headline_cite(artifacts, unit),
                )
            )
    return out


def check(
    answer: Any,
    artifacts: Sequence[Artifact],
    task: TaskInstance,
    world: Union[WorldState, ToolContext],
) -> DiagnosticReport:
    ctx = world if isinstance(world, ToolContext) else ToolContext(world)
    violations: list[Violation] = []
    if ctx.world.world_id != task.world_id:
        return DiagnosticReport(
            (Violation("schema", "SchemaError", "world_id", "task is bound to another world", ctx.world.world_id, task.world_id),)
        )
    stages = (
        ("schema", lambda: _schema(answer, task)),
        ("numeric", lambda: _numeric(answer, task, artifacts) if isinstance(answer, dict) else []),
        ("counterfactual", lambda: _counterfactual(answer, task, ctx) if isinstance(answer, dict) else []),
        ("physical", lambda: _physical(answer, task, artifacts)),
    )
    for tier, run in stages:
        try:
            violations.extend(run())
        except AgroError as exc:
            code = exc.code if exc.code in CODES else ("CausalDirectionViolated" if tier == "counterfactual" else "SchemaError")
            violations.append(Violation(tier, code, exc.path, exc.message, exc.observed, exc.expected))
        except Exception as exc:  # totality: a malformed answer must not crash the checker
            code = {"schema": "SchemaError", "numeric": "ToleranceExceeded", "counterfactual": "CausalDirectionViolated"}.get(tier, "UngroundedClaim")
            violations.append(Violation(tier, code, "", f"{tier} tier could not evaluate the answer: {exc!r}"))
    return DiagnosticReport(tuple(violations))
