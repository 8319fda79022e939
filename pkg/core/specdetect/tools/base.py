"""Common tool patterns and small helpers for specdetect tools.

Every tool is an object with a static ``get_definition`` describing its
input schema and an async ``call`` that returns a ``{"evidence", "text"}``
mapping: machine-readable facts about what was computed plus a short summary
for humans. Numerical work runs in a worker thread via ``asyncio.to_thread``.
"""
from __future__ import annotations

from collections.abc import Mapping
from typing import Any, Protocol

from specdetect.exceptions import ConfigError

ToolResult = dict[str, Any]


class SpecTool(Protocol):
    """Protocol describing a minimal tool implementation."""

    @staticmethod
    def get_definition() -> dict[str, Any]:
        """Return a serializable definition describing the tool."""
        raise NotImplementedError

    async def call(self, arguments: dict[str, Any]) -> ToolResult:
        """Execute the tool with the provided arguments."""
        raise NotImplementedError


def tool_result(evidence: dict[str, Any], text: str) -> ToolResult:
    return {"evidence": evidence, "text": text}


def require(arguments: Mapping[str, Any], key: str) -> Any:
    """Returns ``arguments[key]`` or raises ``ConfigError`` naming the missing key."""
    value = arguments.get(key)
    if value is None:
        raise ConfigError(f"missing required argument {key!r}")
    return value


def overrides(arguments: Mapping[str, Any]) -> dict[str, Any]:
    """Pipeline-setting overrides passed under ``"overrides"`` (None values dropped)."""
    raw = arguments.get("overrides") or {}
    return {k: v for k, v in raw.items() if v is not None}


__all__ = ["SpecTool", "ToolResult", "overrides", "require", "tool_result"]
