from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np


class SanitizeStrategy(str, Enum):
    KEEP = "keep"
    REMOVE = "remove"
    SUMMARIZE = "summarize"


@dataclass(frozen=True)
class FieldRule:
    field_name: str
    strategy: SanitizeStrategy


@dataclass(frozen=True)
class SanitizerConfig:
    rules: tuple[FieldRule, ...] = (
        FieldRule("point", SanitizeStrategy.SUMMARIZE),
        FieldRule("witness", SanitizeStrategy.SUMMARIZE),
        FieldRule("regions", SanitizeStrategy.SUMMARIZE),
        FieldRule("weights", SanitizeStrategy.REMOVE),
    )
    max_list_items: int = 16
    max_string_length: int = 500
    enabled: bool = True

    def rule_for(self, field_name: str) -> FieldRule | None:
        for rule in self.rules:
            if rule.field_name == field_name:
                return rule
        return None


def _summarize(value: Any) -> Any:
    if isinstance(value, (list, tuple, np.ndarray)):
        try:
            arr = np.asarray(value, dtype=np.float64)
        except (TypeError, ValueError):
            return {"items": len(value)}
        if arr.size == 0:
            return {"shape": list(arr.shape)}
        return {
            "shape": list(arr.shape),
            "min": float(arr.min()),
            "max": float(arr.max()),
        }
    return value


def _to_json(value: Any, config: SanitizerConfig) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_json(v, config) for k, v in value.items()}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (list, tuple)):
        items = [_to_json(v, config) for v in value[: config.max_list_items]]
        if len(value) > config.max_list_items:
            items.append(f"...[{len(value) - config.max_list_items} more]")
        return items
    if isinstance(value, str) and len(value) > config.max_string_length:
        return value[: config.max_string_length] + "...[truncated]"
    return value


def compact_payload(
    payload: dict[str, Any],
    config: SanitizerConfig | None = None,
) -> dict[str, Any]:
    """JSON-safe copy of an audit payload with large vectors summarized."""
    if config is None:
        config = SanitizerConfig()
    if not config.enabled:
        return _to_json(payload, SanitizerConfig(max_list_items=10**9, max_string_length=10**9))

    out: dict[str, Any] = {}
    for key, value in payload.items():
        rule = config.rule_for(key)
        if rule is not None and rule.strategy == SanitizeStrategy.REMOVE:
            continue
        if rule is not None and rule.strategy == SanitizeStrategy.SUMMARIZE:
            value = _summarize(value)
        out[str(key)] = _to_json(value, config)
    return out
