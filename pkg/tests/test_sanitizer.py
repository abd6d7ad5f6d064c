from enum import Enum
from pathlib import Path

import numpy as np

from tads_verifier.sanitizer import FieldRule, SanitizeStrategy, SanitizerConfig, compact_payload


class _Color(str, Enum):
    RED = "red"


def test_vectors_are_summarized() -> None:
    result = compact_payload({"witness": [0.5, -1.0, 2.0]})
    assert result["witness"] == {"shape": [3], "min": -1.0, "max": 2.0}


def test_empty_vector_summary() -> None:
    assert compact_payload({"point": []})["point"] == {"shape": [0]}


def test_remove_strategy_strips_field() -> None:
    result = compact_payload({"weights": [[1.0]], "status": "robust"})
    assert "weights" not in result
    assert result["status"] == "robust"


def test_non_numeric_lists_summarize_to_item_count() -> None:
    result = compact_payload({"regions": [{"label": 3}, {"label": 5}]})
    assert result["regions"] == {"items": 2}


def test_long_lists_and_strings_are_truncated() -> None:
    config = SanitizerConfig(max_list_items=3, max_string_length=10)
    result = compact_payload({"notes": ["a", "b", "c", "d", "e"], "error": "x" * 40}, config)
    assert result["notes"] == ["a", "b", "c", "...[2 more]"]
    assert result["error"] == "x" * 10 + "...[truncated]"


def test_values_become_json_safe() -> None:
    result = compact_payload(
        {
            "mode": _Color.RED,
            "path": Path("reports/verdict.json"),
            "count": np.int64(4),
            "nested": {1: np.float64(0.5)},
        }
    )
    assert result == {"mode": "red", "path": str(Path("reports/verdict.json")), "count": 4, "nested": {"1": 0.5}}


def test_custom_rules_replace_defaults() -> None:
    config = SanitizerConfig(rules=(FieldRule("eigenvalues", SanitizeStrategy.SUMMARIZE),))
    result = compact_payload({"eigenvalues": [3.0, 1.0], "point": [1.0, 2.0]}, config)
    assert result["eigenvalues"] == {"shape": [2], "min": 1.0, "max": 3.0}
    assert result["point"] == [1.0, 2.0]


def test_disabled_config_keeps_everything() -> None:
    payload = {"weights": list(range(40)), "point": np.zeros(2)}
    result = compact_payload(payload, SanitizerConfig(enabled=False))
    assert result["weights"] == list(range(40))
    assert result["point"] == [0.0, 0.0]


def test_input_not_mutated() -> None:
    original = {"point": [1.0, 2.0], "weights": [1]}
    compact_payload(original)
    assert original == {"point": [1.0, 2.0], "weights": [1]}
