"""Task instances ``<q, bindings, output schema, checker, budget>`` and their JSON form."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .. import canonical
from ..agent.plan import PlanProgram
from ..align import AlignmentPolicy
from ..errors import InvariantError, IoError
from ..sim import Intervention
from ..units import Quantity, is_unit

SCHEMA_KINDS = ("string", "number", "quantity", "parcel_id_list", "series")
FAMILIES = ("lookup", "forecast", "anomaly", "counterfactual")


@dataclass(frozen=True)
class SchemaField:
    key: str
    kind: str
    unit: Optional[str] = None
    enum: Optional[tuple[Any, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in SCHEMA_KINDS:
            raise InvariantError(f"schema key {self.key}: unknown kind", path=self.key, observed=self.kind)
        if self.unit is not None and not is_unit(self.unit):
            raise InvariantError(f"schema key {self.key}: unknown unit", path=self.key, observed=self.unit)
        if self.enum is not None:
            object.__setattr__(self, "enum", tuple(self.enum))

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"key": self.key, "kind": self.kind}
        if self.unit is not None:
            out["unit"] = self.unit
        if self.enum is not None:
            out["enum"] = list(self.enum)
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SchemaField":
        return cls(obj["key"], obj["kind"], obj.get("unit"), obj.get("enum"))


@dataclass(frozen=True)
class OutputSchema:
    required: tuple[SchemaField, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "required", tuple(self.required))
        keys = [f.key for f in self.required]
        if len(set(keys)) != len(keys):
            raise InvariantError("output schema keys must be unique", observed=keys)

    def field(self, key: str) -> Optional[SchemaField]:
        for f in self.required:
            if f.key == key:
                return f
        return None

    def to_json(self) -> dict[str, Any]:
        return {"required": [f.to_json() for f in self.required]}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "OutputSchema":
        return cls(tuple(SchemaField.from_json(f) for f in obj["required"]))


@dataclass(frozen=True)
class NumericCheck:
    key: str
    reference: Quantity
    rel_tol: float = 0.05
    abs_tol: Optional[Quantity] = None

    def tolerance(self) -> float:
        """``delta = max(abs_tol, rel_tol * |y*|)`` in the reference unit."""
        abs_tol = self.abs_tol.to(self.reference.unit).value if self.abs_tol else 1e-9
        return max(abs_tol, self.rel_tol * abs(self.reference.value))

    def to_json(self) -> dict[str, Any]:
        return {
            "key": self.key,
            "reference": self.reference.to_json(),
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol.to_json() if self.abs_tol else None,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "NumericCheck":
        return cls(
            obj["key"],
            Quantity.from_json(obj["reference"]),
            float(obj.get("rel_tol", 0.05)),
            Quantity.from_json(obj["abs_tol"]) if obj.get("abs_tol") else None,
        )


@dataclass(frozen=True)
class CounterfactualCheck:
    delta: float
    target: str = "stress_index"
    magnitude_bounds: Optional[tuple[float, float]] = None

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise InvariantError("counterfactual delta must be > 0", path="delta", observed=self.delta)
        if self.target not in ("stress_index", "yield"):
            raise InvariantError("unknown counterfactual target", path="target", observed=self.target)

    def to_json(self) -> dict[str, Any]:
        return {
            "delta": self.delta,
            "target": self.target,
            "magnitude_bounds": list(self.magnitude_bounds) if self.magnitude_bounds else None,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "CounterfactualCheck":
        mb = obj.get("magnitude_bounds")
        return cls(float(obj["delta"]), obj.get("target", "stress_index"), tuple(mb) if mb else None)


@dataclass(frozen=True)
class SpatialCheck:
    key: str
    reference_mask: tuple[str, ...]
    universe: tuple[str, ...]
    min_iou: float = 0.5

    def to_json(self) -> dict[str, Any]:
        return {
            "key": self.key,
            "reference_mask": list(self.reference_mask),
            "universe": list(self.universe),
            "min_iou": self.min_iou,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SpatialCheck":
        return cls(obj["key"], tuple(obj["reference_mask"]), tuple(obj["universe"]), float(obj.get("min_iou", 0.5)))


@dataclass(frozen=True)
class PhysicalCheck:
    tau_min: float = 0.3
    required_units: dict[str, str] = field(default_factory=dict)
    # relative tolerance for matching an answer number to an artifact leaf
    ground_rel_tol: float = 1e-9

    def to_json(self) -> dict[str, Any]:
        return {"tau_min": self.tau_min, "required_units": dict(self.required_units), "ground_rel_tol": self.ground_rel_tol}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "PhysicalCheck":
        return cls(float(obj.get("tau_min", 0.3)), dict(obj.get("required_units", {})), float(obj.get("ground_rel_tol", 1e-9)))


@dataclass(frozen=True)
class CheckerConfig:
    physical: PhysicalCheck = field(default_factory=PhysicalCheck)
    numeric: Optional[NumericCheck] = None
    counterfactual: Optional[CounterfactualCheck] = None
    spatial: Optional[SpatialCheck] = None

    def to_json(self) -> dict[str, Any]:
        return {
            "physical": self.physical.to_json(),
            "numeric": self.numeric.to_json() if self.numeric else None,
            "counterfactual": self.counterfactual.to_json() if self.counterfactual else None,
            "spatial": self.spatial.to_json() if self.spatial else None,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "CheckerConfig":
        return cls(
            physical=PhysicalCheck.from_json(obj.get("physical") or {}),
            numeric=NumericCheck.from_json(obj["numeric"]) if obj.get("numeric") else None,
            counterfactual=CounterfactualCheck.from_json(obj["counterfactual"]) if obj.get("counterfactual") else None,
            spatial=SpatialCheck.from_json(obj["spatial"]) if obj.get("spatial") else None,
        )


@dataclass(frozen=True)
class TaskInstance:
    task_id: str
    q: str
    bindings: dict[str, Any]
    output_schema: OutputSchema
    checker: CheckerConfig
    budget: int
    family: str
    reference_plan: PlanProgram
    alignment: Optional[AlignmentPolicy] = None
    intervention: Optional[Intervention] = None
    variant: str = ""

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise InvariantError(f"task {self.task_id}: budget must be >= 1", path="budget", observed=self.budget)
        if self.family not in FAMILIES:
            raise InvariantError(f"task {self.task_id}: unknown family", path="family", observed=self.family)

    @property
    def world_id(self) -> str:
        return self.bindings["world_id"]

    def to_json(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "q": self.q,
            "family": self.family,
            "variant": self.variant,
            "bindings": self.bindings,
            "output_schema": self.output_schema.to_json(),
            "checker": self.checker.to_json(),
            "budget": self.budget,
            "reference_plan": self.reference_plan.to_json(),
            "alignment": self.alignment.to_json() if self.alignment else None,
            "intervention": self.intervention.to_json() if self.intervention else None,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "TaskInstance":
        return cls(
            task_id=obj["task_id"],
            q=obj["q"],
            bindings=dict(obj["bindings"]),
            output_schema=OutputSchema.from_json(obj["output_schema"]),
            checker=CheckerConfig.from_json(obj["checker"]),
            budget=int(obj["budget"]),
            family=obj["family"],
            reference_plan=PlanProgram.from_json(obj["reference_plan"]),
            alignment=AlignmentPolicy.from_json(obj["alignment"]) if obj.get("alignment") else None,
            intervention=Intervention.from_json(obj.get("intervention")),
            variant=obj.get("variant", ""),
        )

    def public_view(self) -> dict[str, Any]:
        """What a solver may see: no checker configuration, no reference plan."""
        return {
            "task_id": self.task_id,
            "q": self.q,
            "family": self.family,
            "bindings": self.bindings,
            "output_schema": self.output_schema.to_json(),
            "budget": self.budget,
        }


def save_tasks(tasks: list[TaskInstance], path: str | Path) -> None:
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        index = []
        for t in tasks:
            fname = f"{t.task_id}.json"
            canonical.write(root / fname, t.to_json())
            index.append({"task_id": t.task_id, "family": t.family, "file": fname})
        world_ids = sorted({t.world_id for t in tasks})
        canonical.write(root / "tasks_index.json", {"world_ids": world_ids, "tasks": index})
    except OSError as exc:
        raise IoError(f"cannot write task set at {root}: {exc}", path=str(root)) from exc


def load_tasks(path: str | Path) -> list[TaskInstance]:
    root = Path(path)
    index_file = root / "tasks_index.json"
    if not index_file.is_file():
        raise IoError(f"no tasks_index.json in {root}", path=str(index_file))
    try:
        index = canonical.read(index_file)
        return [TaskInstance.from_json(canonical.read(root / e["file"])) for e in index["tasks"]]
    except OSError as exc:
        raise IoError(f"cannot read task set {root}: {exc}", path=str(root)) from exc
