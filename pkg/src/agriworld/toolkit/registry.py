"""Tool registry and dispatch.

A tool is a pure function of ``(ToolContext, args)`` returning a
:class:`ToolOutput`; :func:`invoke` validates arguments, dispatches, and wraps
the result into a provenance-hashed :class:`Artifact`.
"""

from __future__ import annotations

import importlib
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Union

from .. import canonical
from ..align import check_aligned, reproject_polygon
from ..errors import AgroError, ArgumentError, UnknownTool
from ..model import Crs, Polygon, WorldState
from .artifacts import ARTIFACT_TYPES, Artifact, ToolCall, provenance

_TOOL_MODULES = (
    "agriworld.toolkit.geo",
    "agriworld.toolkit.rs",
    "agriworld.toolkit.grid",
    "agriworld.toolkit.wx",
    "agriworld.toolkit.unit_tools",
    "agriworld.sim",
)

KINDS = ("any", "str", "int", "number", "bool", "window", "list", "dict", "crs", "parcels", "series", "raster")


@dataclass(frozen=True)
class Param:
    kind: str = "any"
    required: bool = True
    default: Any = None
    data: bool = False  # identifies an input entity (s_in) rather than a parameter (theta)


@dataclass(frozen=True)
class ToolSpec:
    name: str
    family: str
    func: Callable[..., "ToolOutput"]
    params: Mapping[str, Param]
    doc: str = ""

    def signature(self) -> dict[str, Any]:
        return {
            "tool": self.name,
            "params": {
                k: {"kind": p.kind, "required": p.required, **({} if p.required else {"default": p.default})}
                for k, p in self.params.items()
            },
            "doc": self.doc,
        }


@dataclass
class ToolOutput:
    type: str
    payload: Any
    meta: dict[str, Any]


@dataclass(frozen=True)
class ToolContext:
    """What a tool may see: the world snapshot plus variant switches.

    ``alignment=False`` makes every alignment step the identity and disables
    CRS checks at call sites (the no-alignment ablation).
    """

    world: WorldState
    alignment: bool = True
    disabled_families: frozenset = field(default_factory=frozenset)

    def align_polygon(self, poly: Polygon, crs: Crs) -> Polygon:
        return reproject_polygon(poly, crs) if self.alignment else poly

    def require_aligned(self, a: Crs, b: Crs, path: str) -> None:
        if not self.alignment:
            return
        try:
            check_aligned(a, b)
        except AgroError as exc:
            exc.path = path
            raise

    def flags(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if not self.alignment:
            out["alignment"] = False
        if self.disabled_families:
            out["disabled"] = sorted(self.disabled_families)
        return out


TOOLS: dict[str, ToolSpec] = {}
_loaded = False


def tool(name: str, doc: str = "", **params: Param) -> Callable:
    def deco(func: Callable) -> Callable:
        TOOLS[name] = ToolSpec(name, name.split(".")[0], func, dict(params), doc or (func.__doc__ or "").strip())
        return func

    return deco


def _ensure_loaded() -> None:
    global _loaded
    if not _loaded:
        for mod in _TOOL_MODULES:
            importlib.import_module(mod)
        _loaded = True


def registry(ctx: Optional[ToolContext] = None) -> dict[str, ToolSpec]:
    _ensure_loaded()
    if ctx is None or not ctx.disabled_families:
        return dict(TOOLS)
    return {k: v for k, v in TOOLS.items() if v.family not in ctx.disabled_families}


def signatures(ctx: Optional[ToolContext] = None) -> list[dict[str, Any]]:
    return [spec.signature() for _, spec in sorted(registry(ctx).items())]


def _kind_ok(kind: str, v: Any) -> bool:
    if kind == "any":
        return True
    if kind == "str":
        return isinstance(v, str)
    if kind == "bool":
        return isinstance(v, bool)
    if kind == "int":
        return isinstance(v, int) and not isinstance(v, bool)
    if kind == "number":
        return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
    if kind == "window":
        return (
            isinstance(v, (list, tuple))
            and len(v) == 2
            and all(isinstance(x, int) and not isinstance(x, bool) for x in v)
        )
    if kind == "list":
        return isinstance(v, (list, tuple))
    if kind in ("dict", "raster", "series"):
        return isinstance(v, dict)
    if kind == "crs":
        return isinstance(v, (dict, Crs))
    if kind == "parcels":
        return isinstance(v, (str, list, tuple, dict))
    return False


def bind_args(spec: ToolSpec, args: Mapping[str, Any]) -> dict[str, Any]:
    unknown = sorted(set(args) - set(spec.params))
    if unknown:
        raise ArgumentError(
            f"{spec.name}: unknown argument(s) {unknown}",
            path=unknown[0],
            observed=unknown,
            expected=sorted(spec.params),
        )
    bound: dict[str, Any] = {}
    for name, p in spec.params.items():
        if name in args and args[name] is not None:
            v = args[name]
            if not _kind_ok(p.kind, v):
                raise ArgumentError(
                    f"{spec.name}: argument {name!r} must be of kind {p.kind}",
                    path=name,
                    observed=type(v).__name__,
                    expected=p.kind,
                )
            bound[name] = v
        elif p.required:
            raise ArgumentError(f"{spec.name}: missing required argument {name!r}", path=name, expected=p.kind)
        else:
            bound[name] = p.default
    return bound


def invoke(
    world: Union[WorldState, ToolContext],
    call: ToolCall,
    hash_args: Optional[Mapping[str, Any]] = None,
) -> tuple[Any, Artifact]:
    """Dispatch ``call`` and return ``(value, artifact)``.

    ``hash_args`` is the argument map as written in the plan, with references
    replaced by ``{"from": prov, "path": ...}`` markers; it defaults to the
    literal arguments. Provenance hashes the world id and data arguments as
    ``s_in`` and everything else (defaults filled in) as ``theta``.
    """
    ctx = world if isinstance(world, ToolContext) else ToolContext(world)
    tools = registry(ctx)
    if call.tool not in tools:
        raise UnknownTool(f"unknown tool {call.tool!r}", path="tool", observed=call.tool, expected=sorted(tools))
    spec = tools[call.tool]
    args = bind_args(spec, call.args)
    try:
        out = spec.func(ctx, **args)
    except AgroError:
        raise
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise ArgumentError(f"{spec.name}: bad argument value ({exc})", observed=repr(exc)) from exc
    if out.type not in ARTIFACT_TYPES:
        raise AssertionError(f"{spec.name} produced unknown artifact type {out.type}")

    hashed = dict(hash_args) if hash_args is not None else dict(call.args)
    for k, v in args.items():
        hashed.setdefault(k, v)
    s_in = {"world": ctx.world.world_id}
    s_in.update({k: hashed[k] for k, p in spec.params.items() if p.data})
    theta = {k: hashed[k] for k, p in spec.params.items() if not p.data}
    if ctx.flags():
        theta["__context"] = ctx.flags()
    prov = provenance(spec.name, s_in, theta)

    payload = canonical.to_jsonable(out.payload)
    meta = canonical.to_jsonable(dict(out.meta))
    meta["tool"] = spec.name
    meta.setdefault("unit", "dimensionless")
    return payload, Artifact(out.type, payload, meta, prov)
