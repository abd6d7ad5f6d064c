"""Principal component analysis and the neighborhood bounds built on it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .affine import AffineFunction, DimensionError, FloatArray
from .config import EigenSolver, PcaSettings


ORTHONORMAL_TOL = 1e-8
TIE_GAP = 1e-9


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Mean plus principal components stored as rows, eigenvalues descending."""

    mean: FloatArray
    components: FloatArray
    eigenvalues: FloatArray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        comps = np.atleast_2d(np.asarray(self.components, dtype=np.float64))
        eig = np.asarray(self.eigenvalues, dtype=np.float64).reshape(-1)
        if comps.shape[1] != mean.shape[0]:
            raise DimensionError(f"components of shape {comps.shape} do not match mean of length {mean.shape[0]}")
        if eig.shape[0] != comps.shape[0]:
            raise DimensionError(f"{eig.shape[0]} eigenvalues for {comps.shape[0]} components")
        gram = comps @ comps.T
        off = float(np.max(np.abs(gram - np.eye(comps.shape[0]))))
        if off > ORTHONORMAL_TOL:
            raise ValueError(f"components are not orthonormal (max deviation {off:.2e})")
        if np.any(eig < -1e-10):
            raise ValueError(f"negative eigenvalue {float(eig.min()):.3e}")
        if np.any(np.diff(eig) > 1e-10 * max(1.0, float(np.max(np.abs(eig))))):
            raise ValueError("eigenvalues must be non-increasing")
        for name, arr in (("mean", mean), ("components", comps), ("eigenvalues", eig)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def stored(self) -> int:
        return int(self.components.shape[0])

    @property
    def near_ties(self) -> tuple[int, ...]:
        """0-based i where components i and i+1 are not uniquely determined."""
        gaps = np.abs(np.diff(self.eigenvalues))
        return tuple(int(i) for i in np.flatnonzero(gaps < TIE_GAP))

    @property
    def variance_rank(self) -> int:
        scale = max(1.0, float(self.eigenvalues[0])) if self.stored else 1.0
        return int(np.sum(self.eigenvalues > 1e-12 * scale))

    def _check_k(self, k: int) -> int:
        if not 1 <= k <= self.stored:
            raise DimensionError(f"k={k} outside 1..{self.stored} stored components")
        return k

    def encoder(self, k: int) -> AffineFunction:
        """rho_k: x -> P_k (x - mean)."""
        p = self.components[: self._check_k(k)]
        return AffineFunction(p, -(p @ self.mean))

    def decoder(self, k: int) -> AffineFunction:
        """theta_k: r -> mean + P_k^T r."""
        p = self.components[: self._check_k(k)]
        return AffineFunction(p.T, self.mean)

    def projector(self, k: int) -> AffineFunction:
        return self.decoder(k) @ self.encoder(k)

    def truncated(self, k: int) -> PcaModel:
        k = self._check_k(k)
        return PcaModel(self.mean, self.components[:k], self.eigenvalues[:k])


def _jacobi_eigh(matrix: FloatArray, tol: float, max_sweeps: int) -> tuple[FloatArray, FloatArray]:
    """Cyclic Jacobi rotations on a symmetric matrix; returns (values, vectors as columns)."""
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    skip = tol / max(n, 1)
    for _ in range(max_sweeps):
        off = np.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))
        if off < tol:
            break
        for p in range(n - 1):
            candidates = np.flatnonzero(np.abs(a[p, p + 1:]) > skip) + p + 1
            for q in candidates:
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def _fix_signs(vectors: FloatArray) -> FloatArray:
    """Largest-magnitude entry of every row made positive."""
    out = np.array(vectors)
    lead = np.argmax(np.abs(out), axis=1)
    signs = np.sign(out[np.arange(out.shape[0]), lead])
    signs[signs == 0] = 1.0
    return out * signs[:, None]


def pca_fit(
    data: Any,
    k: int | None = None,
    settings: PcaSettings | None = None,
) -> PcaModel:
    """Fit on rows of ``data``; keeps the top ``k`` components (all when None)."""
    s = settings or PcaSettings()
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DimensionError(f"data must be a non-empty 2-D array, got shape {x.shape}")
    n_samples, n = x.shape
    keep = n if k is None else k
    if keep < 1 or keep > n:
        raise DimensionError(f"k={keep} must lie in 1..{n} (data dimension)")
    if n_samples < keep:
        raise ValueError(f"need at least k={keep} samples, got {n_samples}")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / max(n_samples - 1, 1)
    cov = (cov + cov.T) / 2.0
    if s.solver == EigenSolver.LAPACK:
        values, vectors = np.linalg.eigh(cov)
    else:
        values, vectors = _jacobi_eigh(cov, s.jacobi_tolerance, s.max_sweeps)
    order = np.argsort(-values, kind="stable")[:keep]
    values = np.maximum(values[order], 0.0)
    # re-orthonormalize away rotation drift
    q, r = np.linalg.qr(vectors[:, order])
    q = q * np.sign(np.diag(r))[None, :]
    return PcaModel(mean=mean, components=_fix_signs(q.T), eigenvalues=values)


def pca_encode(m: PcaModel, x: Any, k: int) -> FloatArray:
    return m.encoder(k)(x)


def pca_decode(m: PcaModel, r: Any) -> FloatArray:
    vec = np.asarray(r, dtype=np.float64).reshape(-1)
    return m.decoder(vec.shape[0])(vec)


def reconstruction_error(m: PcaModel, data: Any, k: int) -> float:
    """Mean squared l2 reconstruction error over the rows of ``data``."""
    x = np.asarray(data, dtype=np.float64)
    recon = m.projector(k).apply_many(x)
    return float(np.mean(np.sum((x - recon) ** 2, axis=1)))


@dataclass(frozen=True)
class OptimalityReport:
    pca_error: float
    best_baseline: float
    worst_margin: float
    violations: int
    trials: int


def reconstruction_optimality_check(
    m: PcaModel,
    data: Any,
    k: int,
    trials: int,
    seed: int = 0,
) -> OptimalityReport:
    """Compare the PCA frame against random orthonormal k-frames on ``data``."""
    x = np.asarray(data, dtype=np.float64)
    centered = x - m.mean
    pca_frame = m.components[: m._check_k(k)].T

    def total_error(frame: FloatArray) -> float:
        residual = centered - (centered @ frame) @ frame.T
        return float(np.sum(residual**2))

    pca_err = total_error(pca_frame)
    slack = 1e-8 * max(1.0, pca_err)
    rng = np.random.default_rng(seed)
    worst = float("inf")
    best = float("inf")
    violations = 0
    for _ in range(trials):
        q, _ = np.linalg.qr(rng.normal(size=(m.dim, k)))
        err = total_error(q)
        best = min(best, err)
        worst = min(worst, err - pca_err)
        if err < pca_err - slack:
            violations += 1
    return OptimalityReport(pca_err, best, worst, violations, trials)


def neighborhood_bound(m: PcaModel, k: int) -> float:
    """max over the first k components of their l1 norm."""
    p = m.components[: m._check_k(k)]
    return float(np.max(np.sum(np.abs(p), axis=1)))


def neighborhood_witness(m: PcaModel, x: Any, epsilon: float, i: int) -> FloatArray:
    """x + epsilon * sign(p_i), the point where the bound is attained on component i (0-based)."""
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.shape[0] != m.dim:
        raise DimensionError(f"point of length {vec.shape[0]} does not match PCA dim {m.dim}")
    return vec + epsilon * np.sign(m.components[i])


def transfer_delta(m: PcaModel, k: int, epsilon: float) -> float:
    return epsilon * neighborhood_bound(m, k)


def transfer_epsilon(m: PcaModel, k: int, delta: float) -> float:
    return delta / neighborhood_bound(m, k)
