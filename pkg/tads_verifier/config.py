from __future__ import annotations

from enum import Enum
import os
from pathlib import Path
import sys
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .models import VerifyMode
from .validators import ValidationError


DATA_DIR_ENV = "TADS_DATA_DIR"


class Optimizer(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


class EigenSolver(str, Enum):
    JACOBI = "jacobi"
    LAPACK = "lapack"


class SweepVariant(str, Enum):
    TRAINED = "trained"
    BUILTIN = "builtin"


class LpSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    strict_margin: float = Field(default=1e-9, gt=0.0)
    zero_slack: float = Field(default=1e-12, ge=0.0)
    primal_tolerance: float = Field(default=1e-7, gt=0.0)
    reduced_cost_tolerance: float = Field(default=1e-9, gt=0.0)
    pivot_tolerance: float = Field(default=1e-11, gt=0.0)
    max_iterations: int = Field(default=100_000, ge=1)
    bland_factor: int = Field(default=5, ge=1)


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=5, ge=1)
    batch_size: int = Field(default=300, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    seed: int = Field(default=0, ge=0)
    layer_widths: tuple[int, ...] = (10, 10, 10, 10, 10)
    optimizer: Optimizer = Optimizer.ADAM
    momentum: float = Field(default=0.0, ge=0.0, lt=1.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_epsilon: float = Field(default=1e-8, gt=0.0)
    num_classes: int | None = Field(default=None, ge=2)

    @field_validator("layer_widths")
    @classmethod
    def _positive_widths(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(w < 1 for w in value):
            raise ValueError(f"layer widths must be positive, got {list(value)}")
        return value


class PcaSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(default=2, ge=1)
    solver: EigenSolver = EigenSolver.JACOBI
    jacobi_tolerance: float = Field(default=1e-10, gt=0.0)
    max_sweeps: int = Field(default=100, ge=1)
    dump_components: int = Field(default=6, ge=0)


class VerifySettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: VerifyMode = VerifyMode.DIRECT
    epsilon: float | None = Field(default=None, gt=0.0)
    delta: float | None = Field(default=None, gt=0.0)
    k: int | None = Field(default=None, ge=1)
    sample_index: int | None = Field(default=None, ge=0)
    digit: int | None = Field(default=None, ge=0, le=9)
    target_label: int | None = Field(default=None, ge=1)
    prune: bool = True
    grid: int = Field(default=512, ge=8)


class SweepSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    ks: tuple[int, ...] = (2, 6, 12, 25, 50, 78, 156, 784)
    variants: tuple[SweepVariant, ...] = (SweepVariant.TRAINED,)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    data_dir: str | None = None
    out_dir: str = "reports"
    seed: int = Field(default=0, ge=0)
    threads: int | None = Field(default=None, ge=1)
    train: TrainConfig = TrainConfig()
    pca: PcaSettings = PcaSettings()
    verify: VerifySettings = VerifySettings()
    sweep: SweepSettings = SweepSettings()
    lp: LpSettings = LpSettings()

    @property
    def reproducible(self) -> bool:
        return self.threads == 1

    def resolved_threads(self) -> int:
        return self.threads or (os.cpu_count() or 1)

    def resolved_data_dir(self) -> Path:
        raw = self.data_dir or os.getenv(DATA_DIR_ENV, "")
        if not raw:
            raise ValidationError(f"No dataset directory given; pass --data-dir or set {DATA_DIR_ENV}")
        return Path(raw)


def _set_dotted(target: dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = target
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ValidationError(f"Config key '{part}' is not a section (while setting '{dotted}')")
        node = child
    node[parts[-1]] = value


def load_run_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    raw: dict[str, Any] = {}
    if path is not None:
        file_path = Path(path)
        if not file_path.is_file():
            raise FileNotFoundError(f"Config file not found: {file_path}")
        try:
            raw = tomllib.loads(file_path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"Invalid TOML in {file_path}: {exc}") from exc

    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(raw, key, value)

    return RunConfig.model_validate(raw)
