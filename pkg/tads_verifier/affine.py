from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import numpy.typing as npt


FloatArray = npt.NDArray[np.float64]

KEY_DIGITS = 12
_NOISE_FLOOR = 1e-14


class DimensionError(ValueError):
    pass


class NormKind(str, Enum):
    ONE = "one"
    TWO = "two"
    INFINITY = "infinity"


def as_vector(values: Iterable[float] | FloatArray, *, name: str = "vector") -> FloatArray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DimensionError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def as_matrix(values: Sequence[Sequence[float]] | FloatArray, *, name: str = "matrix") -> FloatArray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def round_significant(values: FloatArray, digits: int = KEY_DIGITS) -> FloatArray:
    arr = np.asarray(values, dtype=np.float64)
    out = np.zeros_like(arr)
    nz = arr != 0.0
    if np.any(nz):
        mags = np.floor(np.log10(np.abs(arr[nz])))
        factor = 10.0 ** (digits - 1 - mags)
        out[nz] = np.round(arr[nz] * factor) / factor
    return out + 0.0


def norm(v: Iterable[float] | FloatArray, kind: NormKind | str = NormKind.TWO) -> float:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    kind = NormKind(kind)
    if kind == NormKind.ONE:
        return float(np.sum(np.abs(arr)))
    if kind == NormKind.TWO:
        return float(np.sqrt(np.dot(arr, arr)))
    return float(np.max(np.abs(arr))) if arr.size else 0.0


@dataclass(frozen=True, eq=False)
class AffineFunction:
    """x -> weight @ x + bias, stored densely in canonical form."""

    weight: FloatArray
    bias: FloatArray

    def __post_init__(self) -> None:
        weight = as_matrix(self.weight, name="weight")
        bias = as_vector(self.bias, name="bias")
        if bias.shape[0] != weight.shape[0]:
            raise DimensionError(
                f"bias length {bias.shape[0]} does not match weight rows {weight.shape[0]} "
                f"(weight shape {weight.shape})"
            )
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @classmethod
    def identity(cls, n: int) -> AffineFunction:
        return cls(np.eye(n), np.zeros(n))

    @classmethod
    def zero(cls, output_dim: int, input_dim: int) -> AffineFunction:
        return cls(np.zeros((output_dim, input_dim)), np.zeros(output_dim))

    @property
    def input_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def output_dim(self) -> int:
        return int(self.weight.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.output_dim, self.input_dim)

    def __call__(self, x: Iterable[float] | FloatArray) -> FloatArray:
        vec = np.asarray(x, dtype=np.float64).reshape(-1)
        if vec.shape[0] != self.input_dim:
            raise DimensionError(f"input of length {vec.shape[0]} does not match affine input dim {self.input_dim}")
        return self.weight @ vec + self.bias

    def apply_many(self, points: FloatArray) -> FloatArray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.weight.T + self.bias

    def canonical_key(self) -> tuple[tuple[int, int], bytes]:
        coeffs = np.concatenate([self.weight.reshape(-1), self.bias])
        return (self.shape, round_significant(coeffs).tobytes())

    def allclose(self, other: AffineFunction, atol: float = 1e-12) -> bool:
        return (
            self.shape == other.shape
            and bool(np.allclose(self.weight, other.weight, atol=atol, rtol=0.0))
            and bool(np.allclose(self.bias, other.bias, atol=atol, rtol=0.0))
        )

    def __add__(self, other: AffineFunction) -> AffineFunction:
        return affine_add(self, other)

    def __neg__(self) -> AffineFunction:
        return affine_scale(-1.0, self)

    def __rmul__(self, s: float) -> AffineFunction:
        return affine_scale(s, self)

    def __matmul__(self, inner: AffineFunction) -> AffineFunction:
        return affine_compose(self, inner)

    def __repr__(self) -> str:
        return f"AffineFunction(shape={self.shape})"


def affine_add(a: AffineFunction, b: AffineFunction) -> AffineFunction:
    if a.shape != b.shape:
        raise DimensionError(f"cannot add affine functions of shapes {a.shape} and {b.shape}")
    return AffineFunction(a.weight + b.weight, a.bias + b.bias)


def affine_scale(s: float, a: AffineFunction) -> AffineFunction:
    s = float(s)
    if not np.isfinite(s):
        raise ValueError(f"scale factor must be finite, got {s}")
    return AffineFunction(s * a.weight + 0.0, s * a.bias + 0.0)


def affine_compose(outer: AffineFunction, inner: AffineFunction) -> AffineFunction:
    """outer ∘ inner = (W2 W1, W2 b1 + b2)."""
    if outer.input_dim != inner.output_dim:
        raise DimensionError(
            f"cannot compose outer of shape {outer.shape} with inner of shape {inner.shape}"
        )
    return AffineFunction(outer.weight @ inner.weight, outer.weight @ inner.bias + outer.bias)


def _denoise(values: FloatArray, scale: float) -> FloatArray:
    out = np.array(values, dtype=np.float64)
    out[np.abs(out) <= _NOISE_FLOOR * max(scale, 1.0)] = 0.0
    return out


@dataclass(frozen=True, eq=False)
class LinearPredicate:
    """TRUE iff <normal, x> + offset > 0; boundary points are FALSE."""

    normal: FloatArray
    offset: float

    def __post_init__(self) -> None:
        normal = as_vector(self.normal, name="normal")
        if not np.any(normal):
            raise ValueError("predicate normal must not be the zero vector")
        offset = float(self.offset)
        if not np.isfinite(offset):
            raise ValueError("predicate offset must be finite")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", offset)

    @property
    def dim(self) -> int:
        return int(self.normal.shape[0])

    def value(self, x: Iterable[float] | FloatArray) -> float:
        vec = np.asarray(x, dtype=np.float64).reshape(-1)
        if vec.shape[0] != self.dim:
            raise DimensionError(f"point of length {vec.shape[0]} does not match predicate dim {self.dim}")
        return float(self.normal @ vec + self.offset)

    def holds(self, x: Iterable[float] | FloatArray) -> bool:
        return self.value(x) > 0.0

    def canonical_key(self) -> bytes:
        scale = float(np.max(np.abs(self.normal)))
        coeffs = np.concatenate([self.normal / scale, [self.offset / scale]])
        return round_significant(coeffs).tobytes()

    def true_constraint(self) -> Constraint:
        return Constraint(-self.normal, -self.offset, strict=True)

    def false_constraint(self) -> Constraint:
        return Constraint(self.normal, self.offset, strict=False)

    def describe(self, precision: int = 4) -> str:
        terms = [
            f"{coef:+.{precision}g}*x{i + 1}" for i, coef in enumerate(self.normal) if coef != 0.0
        ]
        return f"{' '.join(terms)} {self.offset:+.{precision}g} > 0"

    def __repr__(self) -> str:
        return f"LinearPredicate({self.describe()})"


def predicate_key(p: LinearPredicate) -> bytes:
    return p.canonical_key()


def predicate_substitute(p: LinearPredicate, a: AffineFunction) -> LinearPredicate | bool:
    """Rewrite p over y = a(x) into a predicate over x, folding constants."""
    if p.dim != a.output_dim:
        raise DimensionError(
            f"predicate of dim {p.dim} cannot be substituted with affine function of shape {a.shape}"
        )
    raw = p.normal @ a.weight
    scale = float(np.max(np.abs(p.normal))) * max(float(np.max(np.abs(a.weight))), 1.0)
    normal = _denoise(raw, scale)
    offset = float(p.normal @ a.bias + p.offset)
    if not np.any(normal):
        return offset > 0.0
    return LinearPredicate(normal, offset)


@dataclass(frozen=True, eq=False)
class Constraint:
    """<normal, x> + offset <= 0, or < 0 when strict."""

    normal: FloatArray
    offset: float
    strict: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "normal", as_vector(self.normal, name="constraint normal"))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "strict", bool(self.strict))

    @property
    def dim(self) -> int:
        return int(self.normal.shape[0])

    def value(self, x: FloatArray) -> float:
        return float(self.normal @ np.asarray(x, dtype=np.float64) + self.offset)

    def satisfied(self, x: FloatArray, tol: float = 0.0) -> bool:
        v = self.value(x)
        if self.strict:
            return v < tol
        return v <= tol

    def canonical_key(self) -> bytes:
        scale = float(np.max(np.abs(self.normal)))
        if scale == 0.0:
            coeffs = np.concatenate([self.normal, [np.sign(self.offset)]])
        else:
            coeffs = np.concatenate([self.normal / scale, [self.offset / scale]])
        return round_significant(coeffs).tobytes() + (b"<" if self.strict else b"=")


@dataclass(frozen=True, eq=False)
class Polytope:
    """Conjunction of constraints over R^dim; no constraints means all of R^dim."""

    dim: int
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DimensionError(f"polytope dimension must be >= 1, got {self.dim}")
        constraints = tuple(self.constraints)
        for c in constraints:
            if c.dim != self.dim:
                raise DimensionError(f"constraint of dim {c.dim} in polytope of dim {self.dim}")
        object.__setattr__(self, "constraints", constraints)

    @classmethod
    def full(cls, dim: int) -> Polytope:
        return cls(dim)

    @classmethod
    def box(cls, center: Iterable[float] | FloatArray, radius: float) -> Polytope:
        """Closed l-infinity ball center + radius * B."""
        c = as_vector(center, name="center")
        if radius < 0:
            raise ValueError(f"radius must be non-negative, got {radius}")
        n = c.shape[0]
        rows: list[Constraint] = []
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            rows.append(Constraint(e, -c[j] - radius))
            rows.append(Constraint(-e, c[j] - radius))
        return cls(n, tuple(rows))

    @classmethod
    def from_arrays(
        cls,
        normals: FloatArray,
        offsets: FloatArray,
        strict: Sequence[bool] | None = None,
    ) -> Polytope:
        a = as_matrix(normals, name="normals")
        b = np.asarray(offsets, dtype=np.float64).reshape(-1)
        flags = [False] * a.shape[0] if strict is None else list(strict)
        return cls(a.shape[1], tuple(Constraint(a[i], b[i], flags[i]) for i in range(a.shape[0])))

    def __len__(self) -> int:
        return len(self.constraints)

    def with_constraints(self, *extra: Constraint) -> Polytope:
        return Polytope(self.dim, self.constraints + tuple(extra))

    def intersect(self, other: Polytope) -> Polytope:
        if other.dim != self.dim:
            raise DimensionError(f"cannot intersect polytopes of dims {self.dim} and {other.dim}")
        return Polytope(self.dim, self.constraints + other.constraints)

    def contains(self, x: Iterable[float] | FloatArray, tol: float = 0.0) -> bool:
        vec = np.asarray(x, dtype=np.float64).reshape(-1)
        if vec.shape[0] != self.dim:
            raise DimensionError(f"point of length {vec.shape[0]} does not match polytope dim {self.dim}")
        return all(c.satisfied(vec, tol=tol) for c in self.constraints)

    def arrays(self) -> tuple[FloatArray, FloatArray, npt.NDArray[np.bool_]]:
        if not self.constraints:
            return (np.zeros((0, self.dim)), np.zeros(0), np.zeros(0, dtype=bool))
        normals = np.vstack([c.normal for c in self.constraints])
        offsets = np.array([c.offset for c in self.constraints])
        strict = np.array([c.strict for c in self.constraints], dtype=bool)
        return (normals, offsets, strict)

    def canonical_key(self) -> tuple[int, tuple[bytes, ...]]:
        return (self.dim, tuple(c.canonical_key() for c in self.constraints))
