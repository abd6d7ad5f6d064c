"""Robustness verification on top of classifier TADS.

Four workflows share one core: build the classification TADS of a network
restricted to a box, look for feasible paths that end in a wrong class, and
turn the closest such point into a re-checked adversarial example.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import time
from typing import Any, Callable

import numpy as np

from .affine import AffineFunction, Constraint, DimensionError, FloatArray, Polytope
from .config import LpSettings
from .feasibility import (
    DEFAULT_SETTINGS,
    InfeasibleRegionError,
    LpIndeterminateError,
    check_feasible,
    closest_point_linf,
)
from .models import (
    AdversarialRegion,
    ClosestAdversarial,
    RobustnessQuery,
    RobustnessVerdict,
    TadsStats,
    VerdictStatus,
    VerifyMode,
)
from .nn import Plnn, classify
from .pca import PcaModel, neighborhood_bound
from .tads import (
    ClassTerminal,
    NodeStore,
    Tads,
    Terminal,
    argmax_tads,
    enumerate_paths,
    plnn_to_tads,
    precondition_project,
    tads_compose,
    tads_size,
)


BALL_TOLERANCE = 1e-7
TIGHTEN_STEPS = (0.0, 1e-9, 1e-7)


def classifier_tads(
    net: Plnn,
    region: Polytope | None,
    *,
    prune: bool = True,
    settings: LpSettings | None = None,
    store: NodeStore | None = None,
) -> Tads:
    """TADS of argmax o net, restricted to ``region`` when given."""
    store = NodeStore() if store is None else store
    t = plnn_to_tads(net, region, prune=prune, store=store, settings=settings)
    return tads_compose(
        t, argmax_tads(net.output_dim, store=store), prune=prune and region is not None, settings=settings
    )


def _stats(t: Tads) -> TadsStats:
    inner, terminals = tads_size(t)
    return TadsStats(inner, terminals, t.store.stats.pruned_branches)


def subspace_region(m: PcaModel, k: int, epsilon: float) -> Polytope:
    """Coefficients w with |(P_k^T w)_j| <= epsilon for every pixel j; zero rows dropped."""
    basis = m.components[:k].T
    rows: list[Constraint] = []
    for row in basis:
        if not np.any(row):
            continue
        rows.append(Constraint(row, -epsilon))
        rows.append(Constraint(-row, -epsilon))
    return Polytope(k, tuple(rows))


@dataclass
class _Candidate:
    index: int
    region: AdversarialRegion
    point: FloatArray | None
    distance: float


class _Search:
    """Shared wrong-label search over a classification TADS."""

    def __init__(
        self,
        t: Tads,
        target: int,
        center: FloatArray,
        lift: AffineFunction | None,
        deployed: Callable[[FloatArray], int],
        settings: LpSettings,
        threads: int,
    ) -> None:
        self.t = t
        self.target = target
        self.center = center
        self.lift = lift
        self.deployed = deployed
        self.settings = settings
        self.threads = threads

    def wrong_regions(self) -> list[tuple[Polytope, int]]:
        def wrong(term: Terminal) -> bool:
            return isinstance(term, ClassTerminal) and term.label != self.target

        paths = enumerate_paths(self.t, wrong, prune=True, settings=self.settings)
        return [(poly, term.label) for poly, term in paths]  # type: ignore[union-attr]

    def _examine(self, item: tuple[int, tuple[Polytope, int]]) -> _Candidate:
        index, (poly, label) = item
        start = len(self.t.domain) if self.t.domain is not None else 0
        witness = check_feasible(poly, self.settings).witness
        region = AdversarialRegion(label=label, region=poly, witness=witness, path_start=start)
        for tighten in TIGHTEN_STEPS:
            try:
                cp = closest_point_linf(poly, self.center, self.settings, through=self.lift, tighten=tighten)
            except InfeasibleRegionError:
                break
            y = cp.point if self.lift is None else self.lift(cp.point)
            if self.deployed(y) != self.target:
                return _Candidate(index, region, y, cp.distance)
        return _Candidate(index, region, None, float("inf"))

    def run(self) -> tuple[list[AdversarialRegion], ClosestAdversarial | None]:
        items = list(enumerate(self.wrong_regions()))
        if self.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                found = list(pool.map(self._examine, items))
        else:
            found = [self._examine(item) for item in items]
        regions = [c.region for c in found]
        usable = [c for c in found if c.point is not None]
        if not usable:
            return regions, None
        best = min(usable, key=lambda c: (c.distance, c.index))
        assert best.point is not None
        label = self.deployed(best.point)
        return regions, ClosestAdversarial(point=best.point, distance=best.distance, label=label)


def _resolve_target(q: RobustnessQuery, predicted: int, num_classes: int) -> int:
    target = q.target_label if q.target_label is not None else predicted
    if not 1 <= target <= num_classes:
        raise ValueError(f"target label {target} outside 1..{num_classes}")
    return target


def _linf(a: FloatArray, b: FloatArray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _indeterminate(verdict: RobustnessVerdict, exc: LpIndeterminateError) -> RobustnessVerdict:
    verdict.status = VerdictStatus.INDETERMINATE
    verdict.notes.append(f"feasibility oracle abstained: {str(exc).splitlines()[0]}")
    return verdict


def _timed(verdict: RobustnessVerdict, started: float, reproducible: bool) -> RobustnessVerdict:
    verdict.time_ms = None if reproducible else (time.perf_counter() - started) * 1000.0
    return verdict


def verify_direct(
    net: Plnn,
    q: RobustnessQuery,
    *,
    settings: LpSettings | None = None,
    threads: int = 1,
    prune: bool = True,
) -> RobustnessVerdict:
    started = time.perf_counter()
    lp = settings or DEFAULT_SETTINGS
    if q.dim != net.input_dim:
        raise DimensionError(f"query point of length {q.dim} does not match network input dim {net.input_dim}")
    x = q.point
    target = _resolve_target(q, classify(net, x), net.output_dim)
    verdict = RobustnessVerdict(VerdictStatus.INDETERMINATE, VerifyMode.DIRECT, q.epsilon, target)
    try:
        t = classifier_tads(net, Polytope.box(x, q.epsilon), prune=prune, settings=lp)
        verdict.tads_stats = _stats(t)
        search = _Search(t, target, x, None, lambda y: classify(net, y), lp, threads)
        regions, closest = search.run()
    except LpIndeterminateError as exc:
        return _timed(_indeterminate(verdict, exc), started, threads == 1)

    verdict.adversarial_regions = regions
    if not regions:
        verdict.status = VerdictStatus.ROBUST
        verdict.certified_epsilon = q.epsilon
    elif closest is not None and closest.distance <= q.epsilon + BALL_TOLERANCE:
        verdict.status = VerdictStatus.NOT_ROBUST
        verdict.closest_adversarial = closest
    else:
        verdict.notes.append("wrong-class regions found but no witness survived re-classification")
    return _timed(verdict, started, threads == 1)


def verify_pca_heuristic(
    net: Plnn,
    m: PcaModel,
    q: RobustnessQuery,
    *,
    settings: LpSettings | None = None,
    threads: int = 1,
    prune: bool = True,
) -> RobustnessVerdict:
    """Search x + span(p_1..p_k) inside the epsilon ball; never certifies robustness."""
    started = time.perf_counter()
    lp = settings or DEFAULT_SETTINGS
    k = q.k or 0
    if m.dim != net.input_dim or q.dim != net.input_dim:
        raise DimensionError(f"PCA dim {m.dim}, point dim {q.dim} and network input {net.input_dim} must agree")
    x = q.point
    target = _resolve_target(q, classify(net, x), net.output_dim)
    verdict = RobustnessVerdict(VerdictStatus.INDETERMINATE, VerifyMode.PCA_HEURISTIC, q.epsilon, target)
    lift = AffineFunction(m.components[:k].T, x)
    try:
        region = subspace_region(m, k, q.epsilon)
        t = classifier_tads(net.precompose(lift), region, prune=prune, settings=lp)
        verdict.tads_stats = _stats(t)
        search = _Search(t, target, x, lift, lambda y: classify(net, y), lp, threads)
        regions, closest = search.run()
    except LpIndeterminateError as exc:
        return _timed(_indeterminate(verdict, exc), started, threads == 1)

    verdict.adversarial_regions = regions
    if not regions:
        verdict.status = VerdictStatus.ROBUST_ON_SUBSPACE
    elif closest is not None and closest.distance <= q.epsilon + BALL_TOLERANCE:
        verdict.status = VerdictStatus.NOT_ROBUST
        verdict.closest_adversarial = closest
    else:
        verdict.notes.append("wrong-class regions found but no witness survived re-classification")
    return _timed(verdict, started, threads == 1)


def _verify_reduced(
    reduced: Plnn,
    deployed: Callable[[FloatArray], int],
    m: PcaModel,
    q: RobustnessQuery,
    mode: VerifyMode,
    lp: LpSettings,
    threads: int,
    prune: bool,
) -> RobustnessVerdict:
    """Search the delta box around encode_k(x) and lift reduced witnesses back to input space.

    A reduced witness w is lifted as x + P_k^T (w - encode_k(x)). It encodes to w like
    decode_k(w) does, but keeps the part of x outside the top-k span, so the deployed
    classifier sees the same projection and the distance to x is measured on it.
    """
    started = time.perf_counter()
    k = q.k or 0
    if q.dim != m.dim:
        raise DimensionError(f"query point of length {q.dim} does not match PCA dim {m.dim}")
    if reduced.input_dim != k:
        raise DimensionError(f"reduced network input dim {reduced.input_dim} differs from k={k}")
    x = q.point
    encoder = m.encoder(k)
    center = encoder(x)
    target = _resolve_target(q, deployed(x), reduced.output_dim)
    bound = neighborhood_bound(m, k)
    delta = q.epsilon * bound
    verdict = RobustnessVerdict(
        VerdictStatus.INDETERMINATE, mode, q.epsilon, target, delta=delta, bound=bound
    )
    basis_t = m.components[:k].T
    lift = AffineFunction(basis_t, x - basis_t @ center)
    try:
        t = classifier_tads(reduced, Polytope.box(center, delta), prune=prune, settings=lp)
        verdict.tads_stats = _stats(t)
        search = _Search(t, target, x, lift, deployed, lp, threads)
        regions, closest = search.run()
    except LpIndeterminateError as exc:
        return _timed(_indeterminate(verdict, exc), started, threads == 1)

    verdict.adversarial_regions = regions
    if not regions:
        verdict.status = VerdictStatus.ROBUST
        verdict.reduced_status = VerdictStatus.ROBUST
        verdict.certified_epsilon = q.epsilon
        return _timed(verdict, started, threads == 1)

    verdict.reduced_status = VerdictStatus.NOT_ROBUST
    if closest is not None and closest.distance <= q.epsilon + BALL_TOLERANCE:
        verdict.status = VerdictStatus.NOT_ROBUST
        verdict.closest_adversarial = closest
    else:
        verdict.closest_adversarial = closest
        verdict.notes.append(
            f"reduced classifier is not robust at delta={delta:.6g}, but no lifted counterexample "
            f"lies within epsilon={q.epsilon:.6g} of the input"
        )
    return _timed(verdict, started, threads == 1)


def verify_pca_builtin(
    net: Plnn,
    m: PcaModel,
    q: RobustnessQuery,
    *,
    settings: LpSettings | None = None,
    threads: int = 1,
    prune: bool = True,
) -> RobustnessVerdict:
    """Certify net o decode_k o encode_k by verifying net o decode_k around encode_k(x)."""
    k = q.k or 0
    if net.input_dim != m.dim:
        raise DimensionError(f"network input dim {net.input_dim} does not match PCA dim {m.dim}")
    reduced = net.precompose(m.decoder(k))
    projector = m.projector(k)
    return _verify_reduced(
        reduced,
        lambda y: classify(net, projector(y)),
        m,
        q,
        VerifyMode.PCA_BUILTIN,
        settings or DEFAULT_SETTINGS,
        threads,
        prune,
    )


def verify_pca_trained(
    net_t: Plnn,
    m: PcaModel,
    q: RobustnessQuery,
    *,
    settings: LpSettings | None = None,
    threads: int = 1,
    prune: bool = True,
) -> RobustnessVerdict:
    """Certify net_t o encode_k, where net_t was trained on encoded inputs."""
    k = q.k or 0
    encoder = m.encoder(k)
    return _verify_reduced(
        net_t,
        lambda y: classify(net_t, encoder(y)),
        m,
        q,
        VerifyMode.PCA_TRAINED,
        settings or DEFAULT_SETTINGS,
        threads,
        prune,
    )


def verify(
    net: Plnn,
    q: RobustnessQuery,
    pca: PcaModel | None = None,
    *,
    settings: LpSettings | None = None,
    threads: int = 1,
    prune: bool = True,
) -> RobustnessVerdict:
    """Dispatch on ``q.mode``; for pca_trained ``net`` is the reduced network."""
    if q.mode == VerifyMode.DIRECT:
        return verify_direct(net, q, settings=settings, threads=threads, prune=prune)
    if pca is None:
        raise ValueError(f"mode {q.mode.value} needs a fitted PCA model")
    runner = {
        VerifyMode.PCA_HEURISTIC: verify_pca_heuristic,
        VerifyMode.PCA_BUILTIN: verify_pca_builtin,
        VerifyMode.PCA_TRAINED: verify_pca_trained,
    }[q.mode]
    return runner(net, pca, q, settings=settings, threads=threads, prune=prune)


@dataclass
class CensusEntry:
    label: int
    regions: int
    witness: FloatArray | None


def region_census(
    t: Tads,
    region: Polytope | None = None,
    *,
    settings: LpSettings | None = None,
) -> dict[int, CensusEntry]:
    """Feasible paths per class inside ``region`` with one interior witness each."""
    lp = settings or DEFAULT_SETTINGS
    scoped = precondition_project(t, region, prune=True, settings=lp) if region is not None else t
    census: dict[int, CensusEntry] = {}
    for poly, term in enumerate_paths(scoped, lambda term: isinstance(term, ClassTerminal), prune=True, settings=lp):
        label = term.label  # type: ignore[union-attr]
        entry = census.get(label)
        if entry is None:
            census[label] = CensusEntry(label, 1, check_feasible(poly, lp).witness)
        else:
            entry.regions += 1
    return dict(sorted(census.items()))


def _constraint_json(c: Constraint) -> dict[str, Any]:
    return {"normal": c.normal.tolist(), "offset": c.offset, "strict": c.strict}


def verdict_to_dict(v: RobustnessVerdict) -> dict[str, Any]:
    return {
        "status": v.status.value,
        "mode": v.mode.value,
        "epsilon": v.epsilon,
        "delta": v.delta,
        "bound": v.bound,
        "certified_epsilon": v.certified_epsilon,
        "reduced_status": None if v.reduced_status is None else v.reduced_status.value,
        "target_label": v.target_label,
        "regions": [
            {
                "label": r.label,
                "constraints": [_constraint_json(c) for c in r.path_constraints],
                "witness": None if r.witness is None else r.witness.tolist(),
            }
            for r in v.adversarial_regions
        ],
        "closest": None
        if v.closest_adversarial is None
        else {
            "point": v.closest_adversarial.point.tolist(),
            "distance": v.closest_adversarial.distance,
            "label": v.closest_adversarial.label,
        },
        "tads": {
            "inner": v.tads_stats.inner,
            "terminals": v.tads_stats.terminals,
            "pruned_paths": v.tads_stats.pruned_paths,
        },
        "notes": list(v.notes),
        "time_ms": v.time_ms,
    }


def in_ball(y: FloatArray, x: FloatArray, epsilon: float) -> bool:
    return _linf(y, x) <= epsilon + BALL_TOLERANCE
