from __future__ import annotations

import math
from pathlib import Path
import re
from typing import Sequence


class ValidationError(Exception):
    pass


_POINT_SPLIT = re.compile(r"[,\s]+")


def validate_epsilon(value: float, name: str = "epsilon") -> float:
    if not math.isfinite(value) or value <= 0.0:
        raise ValidationError(f"{name} must be a finite value > 0, got {value}")
    return float(value)


def validate_k(k: int | None, n: int | None = None) -> int:
    if k is None:
        raise ValidationError("PCA dimension k is required for PCA modes")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if n is not None and k > n:
        raise ValidationError(f"k={k} exceeds the input dimension {n}")
    return int(k)


def validate_layer_widths(raw: str | Sequence[int]) -> tuple[int, ...]:
    if isinstance(raw, str):
        parts = [p for p in raw.split(",") if p.strip()]
        if not parts:
            raise ValidationError("layer widths must not be empty")
        try:
            widths = tuple(int(p) for p in parts)
        except ValueError as exc:
            raise ValidationError(f"layer widths must be comma-separated integers, got '{raw}'") from exc
    else:
        widths = tuple(int(w) for w in raw)
    if any(w < 1 for w in widths):
        raise ValidationError(f"layer widths must be positive, got {list(widths)}")
    return widths


def validate_k_list(raw: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(p) for p in raw.split(",") if p.strip())
    except ValueError as exc:
        raise ValidationError(f"k list must be comma-separated integers, got '{raw}'") from exc
    if not ks or any(k < 1 for k in ks):
        raise ValidationError(f"k list must contain positive integers, got '{raw}'")
    return ks


def validate_point(raw: str) -> tuple[float, ...]:
    parts = [p for p in _POINT_SPLIT.split(raw.strip()) if p]
    if not parts:
        raise ValidationError("point must not be empty")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"point must contain numbers, got '{raw}'") from exc
    if not all(math.isfinite(v) for v in values):
        raise ValidationError("point entries must be finite")
    return values


def validate_existing_file(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"{what} not found: {p}")
    return p


def validate_data_dir(path: str | Path) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise ValidationError(f"Dataset directory not found: {p}")
    return p


def validate_threads(value: int | None) -> int | None:
    if value is not None and value < 1:
        raise ValidationError(f"threads must be >= 1, got {value}")
    return value


def validate_label(label: int, num_classes: int) -> int:
    if not 1 <= label <= num_classes:
        raise ValidationError(f"label {label} outside 1..{num_classes}")
    return label
