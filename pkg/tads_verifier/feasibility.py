"""Linear-programming oracle over polytopes.

All questions are reduced to ``maximize c @ z  s.t.  G @ z <= h, z >= 0`` and
solved with a dense two-phase tableau simplex. Free variables are split into
positive and negative parts. Constraint rows are normalized by their
infinity norm so slack values are comparable across rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .affine import AffineFunction, DimensionError, FloatArray, Polytope
from .config import LpSettings


class LpStatus(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNBOUNDED_SLACK = "unbounded-slack"


class LpIndeterminateError(RuntimeError):
    pass


class InfeasibleRegionError(ValueError):
    pass


@dataclass(frozen=True)
class LpVerdict:
    status: LpStatus
    witness: FloatArray | None = None
    slack: float | None = None

    @property
    def feasible(self) -> bool:
        return self.status != LpStatus.INFEASIBLE


@dataclass(frozen=True)
class ClosestPoint:
    point: FloatArray
    distance: float


@dataclass(frozen=True)
class _LpSolution:
    optimal: bool
    z: FloatArray | None
    value: float


DEFAULT_SETTINGS = LpSettings()

_SLACK_CAP = 1.0


class _Tableau:
    def __init__(self, table: FloatArray, basis: list[int], settings: LpSettings) -> None:
        self.table = table
        self.basis = basis
        self.settings = settings
        self.pivots = 0

    def pivot(self, row: int, col: int) -> None:
        t = self.table
        t[row] /= t[row, col]
        column = t[:, col].copy()
        column[row] = 0.0
        t -= np.outer(column, t[row])
        self.basis[row] = col
        self.pivots += 1

    def run(self, allowed: int) -> bool:
        """Maximize the objective row; False when unbounded."""
        s = self.settings
        t = self.table
        m = t.shape[0] - 1
        bland_after = s.bland_factor * (allowed + m)
        while True:
            if self.pivots >= s.max_iterations:
                raise LpIndeterminateError(
                    f"simplex hit the iteration cap ({s.max_iterations}) on a {m}x{allowed} problem"
                )
            reduced = t[-1, :allowed]
            candidates = np.flatnonzero(reduced < -s.reduced_cost_tolerance)
            if candidates.size == 0:
                return True
            if self.pivots < bland_after:
                col = int(candidates[np.argmin(reduced[candidates])])
            else:
                col = int(candidates[0])
            column = t[:m, col]
            rows = np.flatnonzero(column > s.pivot_tolerance)
            if rows.size == 0:
                return False
            ratios = t[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            row = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(row, col)


def _solve(c: FloatArray, g: FloatArray, h: FloatArray, settings: LpSettings) -> _LpSolution:
    m, nz = g.shape
    neg = h < 0.0
    n_art = int(neg.sum())
    width = nz + m + n_art
    table = np.zeros((m + 1, width + 1))
    sign = np.where(neg, -1.0, 1.0)
    table[:m, :nz] = g * sign[:, None]
    table[:m, nz:nz + m] = np.diag(sign)
    table[:m, -1] = np.abs(h)
    basis: list[int] = []
    art_col = nz + m
    for r in range(m):
        if neg[r]:
            table[r, art_col] = 1.0
            basis.append(art_col)
            art_col += 1
        else:
            basis.append(nz + r)

    tab = _Tableau(table, basis, settings)

    if n_art:
        table[-1, nz + m:width] = 1.0
        for r in range(m):
            if basis[r] >= nz + m:
                table[-1] -= table[r]
        tab.run(width)
        if table[-1, -1] < -settings.primal_tolerance:
            return _LpSolution(False, None, float("nan"))
        keep: list[int] = []
        for r in range(m):
            if tab.basis[r] >= nz + m:
                candidates = np.flatnonzero(np.abs(table[r, :nz + m]) > 1e-9)
                if candidates.size == 0:
                    continue
                tab.pivot(r, int(candidates[0]))
            keep.append(r)
        table = np.vstack([table[keep], table[-1:]])
        table = np.hstack([table[:, :nz + m], table[:, -1:]])
        tab = _Tableau(table, [tab.basis[r] for r in keep], settings)

    table = tab.table
    table[-1] = 0.0
    table[-1, :nz] = -c
    for r, b in enumerate(tab.basis):
        if table[-1, b] != 0.0:
            table[-1] -= table[-1, b] * table[r]
    if not tab.run(nz + m):
        return _LpSolution(False, None, float("inf"))

    z = np.zeros(nz)
    for r, b in enumerate(tab.basis):
        if b < nz:
            z[b] = table[r, -1]
    return _LpSolution(True, z, float(table[-1, -1]))


def _normalized(polytope: Polytope) -> tuple[FloatArray, FloatArray, FloatArray]:
    normals, offsets, strict = polytope.arrays()
    scale = np.max(np.abs(normals), axis=1) if normals.shape[0] else np.zeros(0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return (normals / scale[:, None], offsets / scale, strict.astype(np.float64))


def _witness_ok(polytope: Polytope, x: FloatArray, settings: LpSettings, margin: float) -> bool:
    normals, offsets, strict = _normalized(polytope)
    if not normals.shape[0]:
        return True
    values = normals @ x + offsets
    tol = settings.primal_tolerance
    ok_strict = values[strict > 0] <= -margin + tol
    ok_plain = values[strict == 0] <= tol
    return bool(np.all(ok_strict) and np.all(ok_plain))


def check_feasible(polytope: Polytope, settings: LpSettings | None = None) -> LpVerdict:
    """Decide non-emptiness with a maximum-slack witness.

    Solves ``max s`` over ``<w,x> + b + s <= 0`` (strict rows) and
    ``<w,x> + b <= 0`` (non-strict rows) with ``-1 <= s <= 1``.
    """
    s = settings or DEFAULT_SETTINGS
    n = polytope.dim
    normals, offsets, strict = _normalized(polytope)
    m = normals.shape[0]
    has_strict = bool(np.any(strict > 0))

    # z = [x+, x-, s + 1]
    g = np.zeros((m + 1, 2 * n + 1))
    h = np.zeros(m + 1)
    g[:m, :n] = normals
    g[:m, n:2 * n] = -normals
    g[:m, 2 * n] = strict
    h[:m] = -offsets + strict * 1.0
    g[m, 2 * n] = 1.0
    h[m] = 1.0 + _SLACK_CAP
    c = np.zeros(2 * n + 1)
    c[2 * n] = 1.0

    sol = _solve(c, g, h, s)
    if not sol.optimal or sol.z is None:
        return LpVerdict(LpStatus.INFEASIBLE)

    slack = float(sol.z[2 * n] - 1.0)
    witness = sol.z[:n] - sol.z[n:2 * n]
    if slack <= s.zero_slack:
        return LpVerdict(LpStatus.INFEASIBLE, slack=slack)
    if slack <= s.strict_margin:
        raise LpIndeterminateError(
            f"optimal slack {slack:.3e} lies within the strict margin {s.strict_margin:.1e}\n"
            + dump_constraints(polytope)
        )
    margin = min(slack, _SLACK_CAP) if has_strict else 0.0
    if not _witness_ok(polytope, witness, s, margin * (1.0 - 1e-6)):
        raise LpIndeterminateError("simplex witness failed the re-check\n" + dump_constraints(polytope))
    status = LpStatus.UNBOUNDED_SLACK if has_strict and slack >= _SLACK_CAP - 1e-12 else LpStatus.FEASIBLE
    return LpVerdict(status, witness=witness, slack=slack)


def closest_point_linf(
    polytope: Polytope,
    x0: FloatArray,
    settings: LpSettings | None = None,
    *,
    through: AffineFunction | None = None,
    tighten: float = 0.0,
) -> ClosestPoint:
    """Minimize ||T(x) - x0||_inf over x in the polytope (T = identity unless given).

    Strict rows are tightened by the strict margin, every row additionally by
    ``tighten`` (in normalized units).
    """
    s = settings or DEFAULT_SETTINGS
    target = np.asarray(x0, dtype=np.float64).reshape(-1)
    transform = through or AffineFunction.identity(polytope.dim)
    if transform.input_dim != polytope.dim:
        raise DimensionError(
            f"transform of shape {transform.shape} does not accept points of polytope dim {polytope.dim}"
        )
    if transform.output_dim != target.shape[0]:
        raise DimensionError(
            f"reference point of length {target.shape[0]} does not match transform output {transform.output_dim}"
        )

    n = polytope.dim
    q = transform.output_dim
    normals, offsets, strict = _normalized(polytope)
    m = normals.shape[0]
    margins = strict * s.strict_margin + tighten

    # z = [x+, x-, t]
    g = np.zeros((m + 2 * q, 2 * n + 1))
    h = np.zeros(m + 2 * q)
    g[:m, :n] = normals
    g[:m, n:2 * n] = -normals
    h[:m] = -offsets - margins
    w = transform.weight
    shift = target - transform.bias
    g[m:m + q, :n] = w
    g[m:m + q, n:2 * n] = -w
    g[m:m + q, 2 * n] = -1.0
    h[m:m + q] = shift
    g[m + q:, :n] = -w
    g[m + q:, n:2 * n] = w
    g[m + q:, 2 * n] = -1.0
    h[m + q:] = -shift
    c = np.zeros(2 * n + 1)
    c[2 * n] = -1.0

    sol = _solve(c, g, h, s)
    if not sol.optimal or sol.z is None:
        raise InfeasibleRegionError("closest-point query on an infeasible region\n" + dump_constraints(polytope))
    point = sol.z[:n] - sol.z[n:2 * n]
    distance = float(np.max(np.abs(transform(point) - target))) if q else 0.0
    return ClosestPoint(point=point, distance=distance)


def bounding_box(polytope: Polytope, settings: LpSettings | None = None) -> tuple[FloatArray, FloatArray]:
    """Per-coordinate extents of the closure; raises if unbounded or empty."""
    s = settings or DEFAULT_SETTINGS
    n = polytope.dim
    normals, offsets, _ = _normalized(polytope)
    m = normals.shape[0]
    g = np.zeros((m, 2 * n))
    g[:, :n] = normals
    g[:, n:] = -normals
    h = -offsets
    lo = np.zeros(n)
    hi = np.zeros(n)
    for j in range(n):
        for direction, out in ((1.0, hi), (-1.0, lo)):
            c = np.zeros(2 * n)
            c[j] = direction
            c[n + j] = -direction
            sol = _solve(c, g, h, s)
            if sol.z is None:
                if np.isinf(sol.value):
                    raise InfeasibleRegionError(f"region is unbounded along coordinate {j + 1}")
                raise InfeasibleRegionError("bounding box of an infeasible region")
            out[j] = sol.z[j] - sol.z[n + j]
    return (lo, hi)


def dump_constraints(polytope: Polytope) -> str:
    """Text dump, one constraint per line: ``w1 w2 ... | b | <`` or ``<=``."""
    lines = [f"# polytope dim={polytope.dim} constraints={len(polytope)}"]
    for c in polytope.constraints:
        coeffs = " ".join(repr(float(v)) for v in c.normal)
        lines.append(f"{coeffs} | {float(c.offset)!r} | {'<' if c.strict else '<='}")
    return "\n".join(lines)
