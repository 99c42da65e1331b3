"""Verifiable task layer: task instances, checkers, reference runs, metrics."""

from .checker import DiagnosticReport, Violation, check
from .metrics import iou, iou_sets, nrmse
from .reference import run_reference
from .tasks import (
    CheckerConfig,
    CounterfactualCheck,
    NumericCheck,
    OutputSchema,
    PhysicalCheck,
    SchemaField,
    SpatialCheck,
    TaskInstance,
    load_tasks,
    save_tasks,
)

__all__ = [
    "CheckerConfig",
    "CounterfactualCheck",
    "DiagnosticReport",
    "NumericCheck",
    "OutputSchema",
    "PhysicalCheck",
    "SchemaField",
    "SpatialCheck",
    "TaskInstance",
    "Violation",
    "check",
    "iou",
    "iou_sets",
    "load_tasks",
    "nrmse",
    "run_reference",
    "save_tasks",
]
