"""Tool registry ``F``: every call returns a value plus a provenance-hashed artifact."""

from .artifacts import TOOL_VERSION, Artifact, ArtifactStore, ToolCall, provenance
from .registry import TOOLS, Param, ToolContext, ToolOutput, invoke, registry, signatures, tool

__all__ = [
    "TOOL_VERSION",
    "TOOLS",
    "Artifact",
    "ArtifactStore",
    "Param",
    "ToolCall",
    "ToolContext",
    "ToolOutput",
    "invoke",
    "provenance",
    "registry",
    "signatures",
    "tool",
]
