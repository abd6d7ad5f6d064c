from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .affine import Constraint, FloatArray, Polytope, as_vector


class VerifyMode(str, Enum):
    DIRECT = "direct"
    PCA_HEURISTIC = "pca_heuristic"
    PCA_BUILTIN = "pca_builtin"
    PCA_TRAINED = "pca_trained"

    @property
    def needs_pca(self) -> bool:
        return self is not VerifyMode.DIRECT


class VerdictStatus(str, Enum):
    ROBUST = "robust"
    NOT_ROBUST = "not_robust"
    ROBUST_ON_SUBSPACE = "robust_on_subspace"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True, eq=False)
class RobustnessQuery:
    point: FloatArray
    epsilon: float
    mode: VerifyMode = VerifyMode.DIRECT
    target_label: int | None = None
    k: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", as_vector(self.point, name="query point"))
        eps = float(self.epsilon)
        if not np.isfinite(eps) or eps <= 0.0:
            raise ValueError(f"epsilon must be a finite value > 0, got {self.epsilon}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "mode", VerifyMode(self.mode))
        if self.mode.needs_pca and self.k is None:
            raise ValueError(f"mode {self.mode.value} requires a PCA dimension k")
        if self.k is not None and self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.target_label is not None and self.target_label < 1:
            raise ValueError(f"target_label is a 1-based class, got {self.target_label}")

    @property
    def dim(self) -> int:
        return int(self.point.shape[0])


@dataclass(frozen=True, eq=False)
class AdversarialRegion:
    """A feasible TADS path whose class differs from the target.

    ``region`` lives in the space the TADS was built over (input space for
    direct mode, coefficient space for the PCA modes).
    """

    label: int
    region: Polytope
    witness: FloatArray | None = None
    path_start: int = 0

    @property
    def path_constraints(self) -> tuple[Constraint, ...]:
        """Branch conditions only, without the rows of the search box."""
        return self.region.constraints[self.path_start:]


@dataclass(frozen=True, eq=False)
class ClosestAdversarial:
    point: FloatArray
    distance: float
    label: int


@dataclass(frozen=True)
class TadsStats:
    inner: int
    terminals: int
    pruned_paths: int = 0

    @property
    def nodes(self) -> int:
        return self.inner + self.terminals


@dataclass
class RobustnessVerdict:
    status: VerdictStatus
    mode: VerifyMode
    epsilon: float
    target_label: int
    certified_epsilon: float | None = None
    delta: float | None = None
    bound: float | None = None
    reduced_status: VerdictStatus | None = None
    adversarial_regions: list[AdversarialRegion] = field(default_factory=list)
    closest_adversarial: ClosestAdversarial | None = None
    tads_stats: TadsStats = TadsStats(0, 0)
    time_ms: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def is_robust(self) -> bool:
        return self.status == VerdictStatus.ROBUST

    def summary(self) -> dict[str, Any]:
        return {
            "status": self.status.value,
            "mode": self.mode.value,
            "epsilon": self.epsilon,
            "target_label": self.target_label,
            "regions": len(self.adversarial_regions),
            "closest_distance": None if self.closest_adversarial is None else self.closest_adversarial.distance,
            "nodes": self.tads_stats.nodes,
        }
