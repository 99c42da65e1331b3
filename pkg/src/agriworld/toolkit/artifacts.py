"""Artifacts, tool calls and the per-episode artifact store."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from .. import canonical
from ..errors import IoError

ARTIFACT_TYPES = ("table", "series", "mask", "scalar", "figure_spec")
TOOL_VERSION = "agriworld-tools/1.0"


def provenance(tool: str, s_in: Any, theta: Any, version: str = TOOL_VERSION) -> str:
    """SHA-256 over ``tool || version || canonical(s_in) || canonical(theta)``."""
    parts = [tool.encode(), version.encode(), canonical.dump_bytes(s_in), canonical.dump_bytes(theta)]
    return canonical.sha256_hex(b"\x00".join(parts))


@dataclass(frozen=True)
class Artifact:
    type: str
    payload: Any
    meta: dict[str, Any]
    prov: str

    def to_json(self) -> dict[str, Any]:
        return {"type": self.type, "payload": self.payload, "meta": self.meta, "prov": self.prov}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Artifact":
        return cls(obj["type"], obj["payload"], dict(obj["meta"]), obj["prov"])


@dataclass(frozen=True)
class ToolCall:
    tool: str
    args: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"tool": self.tool, "args": self.args}

    @classmethod
    def from_json(cls, obj: Any) -> "ToolCall":
        return cls(obj["tool"], dict(obj.get("args") or {}))


class ArtifactStore:
    """Append-only store; one writer per episode.

    With ``root`` set, each artifact is written as ``<seq>_<prov[:12]>.json``
    and ``index.json`` lists ``(seq, tool, prov)``.
    """

    def __init__(self, root: str | Path | None = None) -> None:
        self.root = Path(root) if root is not None else None
        self.items: list[Artifact] = []
        self.index: list[dict[str, Any]] = []
        if self.root is not None:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise IoError(f"cannot create artifact store {self.root}: {exc}") from exc

    def append(self, artifact: Artifact) -> int:
        seq = len(self.items)
        self.items.append(artifact)
        self.index.append({"seq": seq, "tool": artifact.meta.get("tool"), "prov": artifact.prov})
        if self.root is not None:
            try:
                canonical.write(self.root / f"{seq:04d}_{artifact.prov[:12]}.json", artifact.to_json())
                canonical.write(self.root / "index.json", {"artifacts": self.index})
            except OSError as exc:
                raise IoError(f"cannot write artifact {seq}: {exc}") from exc
        return seq

    def __iter__(self) -> Iterator[Artifact]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)
