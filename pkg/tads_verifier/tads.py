"""Typed affine decision structures.

A TADS is a decision DAG whose inner nodes test linear predicates and whose
terminals carry affine functions, class labels, booleans or Bottom. Nodes
live in a hash-consing ``NodeStore``; a ``Tads`` value is a root reference
into a store plus its typing information and an optional domain polytope.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import json
from typing import Any, Callable, Iterator, Union

import numpy as np

from .affine import (
    AffineFunction,
    Constraint,
    DimensionError,
    FloatArray,
    LinearPredicate,
    Polytope,
    affine_add,
    affine_compose,
    affine_scale,
    as_vector,
    predicate_substitute,
)
from .config import LpSettings
from .feasibility import DEFAULT_SETTINGS, check_feasible


class TadsTypeError(TypeError):
    pass


class UnknownLabelError(ValueError):
    pass


class TadsFormatError(ValueError):
    pass


class TerminalKind(str, Enum):
    AFFINE = "affine"
    CLASS = "class"
    BOOL = "bool"
    BOTTOM = "bottom"


@dataclass(frozen=True, eq=False)
class AffineTerminal:
    function: AffineFunction


@dataclass(frozen=True)
class ClassTerminal:
    label: int


@dataclass(frozen=True)
class BoolTerminal:
    value: bool


@dataclass(frozen=True)
class BottomTerminal:
    def __repr__(self) -> str:
        return "BOTTOM"


BOTTOM = BottomTerminal()

Terminal = Union[AffineTerminal, ClassTerminal, BoolTerminal, BottomTerminal]
TadsValue = Union[FloatArray, int, bool, BottomTerminal]


def terminal_kind(term: Terminal) -> TerminalKind:
    if isinstance(term, AffineTerminal):
        return TerminalKind.AFFINE
    if isinstance(term, ClassTerminal):
        return TerminalKind.CLASS
    if isinstance(term, BoolTerminal):
        return TerminalKind.BOOL
    return TerminalKind.BOTTOM


def _terminal_key(term: Terminal) -> tuple[Any, ...]:
    if isinstance(term, AffineTerminal):
        return ("affine",) + term.function.canonical_key()
    if isinstance(term, ClassTerminal):
        return ("class", term.label)
    if isinstance(term, BoolTerminal):
        return ("bool", term.value)
    return ("bottom",)


@dataclass(frozen=True, eq=False)
class Decision:
    predicate: LinearPredicate
    true_child: int
    false_child: int


Node = Union[Decision, AffineTerminal, ClassTerminal, BoolTerminal, BottomTerminal]


@dataclass
class StoreStats:
    lp_calls: int = 0
    witness_hits: int = 0
    pruned_branches: int = 0


class NodeStore:
    """Deduplicating node table; node references are integer ids."""

    def __init__(self) -> None:
        self._nodes: list[Node] = []
        self._table: dict[tuple[Any, ...], int] = {}
        self.stats = StoreStats()
        self.bottom = self.make_terminal(BOTTOM)

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, ref: int) -> Node:
        return self._nodes[ref]

    def is_terminal(self, ref: int) -> bool:
        return not isinstance(self._nodes[ref], Decision)

    def make_terminal(self, term: Terminal) -> int:
        key = _terminal_key(term)
        ref = self._table.get(key)
        if ref is None:
            ref = len(self._nodes)
            self._nodes.append(term)
            self._table[key] = ref
        return ref

    def make_node(self, predicate: LinearPredicate, true_child: int, false_child: int) -> int:
        if true_child == false_child:
            return true_child
        key = ("pred", predicate.canonical_key(), true_child, false_child)
        ref = self._table.get(key)
        if ref is None:
            ref = len(self._nodes)
            self._nodes.append(Decision(predicate, true_child, false_child))
            self._table[key] = ref
        return ref

    def adopt(self, t: Tads) -> int:
        """Root of a copy of ``t`` inside this store."""
        if t.store is self:
            return t.root
        src = t.store
        copied: dict[int, int] = {}

        def copy(ref: int) -> int:
            hit = copied.get(ref)
            if hit is not None:
                return hit
            node = src.node(ref)
            if isinstance(node, Decision):
                out = self.make_node(node.predicate, copy(node.true_child), copy(node.false_child))
            else:
                out = self.make_terminal(node)
            copied[ref] = out
            return out

        return copy(t.root)


@dataclass(frozen=True, eq=False)
class Tads:
    store: NodeStore
    root: int
    input_dim: int
    output_dim: int
    kind: TerminalKind
    domain: Polytope | None = None

    def __post_init__(self) -> None:
        if self.domain is not None and self.domain.dim != self.input_dim:
            raise DimensionError(
                f"domain of dim {self.domain.dim} does not match TADS input dim {self.input_dim}"
            )

    def reachable(self) -> list[int]:
        """Reachable node ids, children before parents, TRUE side first."""
        order: list[int] = []
        seen: set[int] = set()
        stack: list[tuple[int, bool]] = [(self.root, False)]
        while stack:
            ref, expanded = stack.pop()
            if expanded:
                order.append(ref)
                continue
            if ref in seen:
                continue
            seen.add(ref)
            stack.append((ref, True))
            node = self.store.node(ref)
            if isinstance(node, Decision):
                stack.append((node.false_child, False))
                stack.append((node.true_child, False))
        return order

    def terminals(self) -> list[Terminal]:
        return [self.store.node(r) for r in self.reachable() if self.store.is_terminal(r)]  # type: ignore[misc]


def _same_kind(kinds: set[TerminalKind]) -> TerminalKind:
    kinds = kinds - {TerminalKind.BOTTOM}
    if not kinds:
        return TerminalKind.BOTTOM
    if len(kinds) > 1:
        raise TadsTypeError(f"mixed terminal kinds {sorted(k.value for k in kinds)}")
    return kinds.pop()


def terminal_tads(
    payload: AffineFunction | Terminal,
    input_dim: int | None = None,
    *,
    output_dim: int | None = None,
    store: NodeStore | None = None,
    domain: Polytope | None = None,
) -> Tads:
    """Single-terminal TADS; class and bool terminals need ``input_dim``."""
    store = NodeStore() if store is None else store
    term: Terminal = AffineTerminal(payload) if isinstance(payload, AffineFunction) else payload
    if isinstance(term, AffineTerminal):
        n = term.function.input_dim
        if input_dim is not None and input_dim != n:
            raise DimensionError(f"affine terminal has input dim {n}, expected {input_dim}")
        out = term.function.output_dim
    else:
        if input_dim is None:
            raise DimensionError("input_dim is required for non-affine terminals")
        n = input_dim
        if isinstance(term, ClassTerminal):
            out = output_dim if output_dim is not None else term.label
        else:
            out = 1
    return Tads(store, store.make_terminal(term), n, out, terminal_kind(term), domain)


def identity_tads(n: int, *, store: NodeStore | None = None, domain: Polytope | None = None) -> Tads:
    return terminal_tads(AffineFunction.identity(n), store=store, domain=domain)


def _check_point(t: Tads, x: Any) -> FloatArray:
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.shape[0] != t.input_dim:
        raise DimensionError(f"point of length {vec.shape[0]} does not match TADS input dim {t.input_dim}")
    return vec


def tads_leaf(t: Tads, x: Any) -> Terminal:
    vec = _check_point(t, x)
    if t.domain is not None and not t.domain.contains(vec):
        return BOTTOM
    store = t.store
    ref = t.root
    node = store.node(ref)
    while isinstance(node, Decision):
        ref = node.true_child if node.predicate.value(vec) > 0.0 else node.false_child
        node = store.node(ref)
    return node


def tads_eval(t: Tads, x: Any) -> TadsValue:
    """Affine terminals are applied to x; Bottom is returned for domain violations."""
    term = tads_leaf(t, x)
    if isinstance(term, AffineTerminal):
        return term.function(_check_point(t, x))
    if isinstance(term, ClassTerminal):
        return term.label
    if isinstance(term, BoolTerminal):
        return term.value
    return BOTTOM


def tads_leaf_ids(t: Tads, points: FloatArray) -> np.ndarray:
    """Terminal node id reached by every row of ``points``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != t.input_dim:
        raise DimensionError(f"points of shape {pts.shape} do not match TADS input dim {t.input_dim}")
    store = t.store
    current = np.full(pts.shape[0], t.root, dtype=np.int64)
    if t.domain is not None:
        normals, offsets, strict = t.domain.arrays()
        if normals.shape[0]:
            values = pts @ normals.T + offsets
            inside = np.all(np.where(strict, values < 0.0, values <= 0.0), axis=1)
            current[~inside] = store.bottom
    while True:
        inner = [int(r) for r in np.unique(current) if not store.is_terminal(int(r))]
        if not inner:
            return current
        for ref in inner:
            node = store.node(ref)
            assert isinstance(node, Decision)
            rows = np.flatnonzero(current == ref)
            taken = pts[rows] @ node.predicate.normal + node.predicate.offset > 0.0
            current[rows] = np.where(taken, node.true_child, node.false_child)


@dataclass(frozen=True)
class _Path:
    constraints: tuple[Constraint, ...]
    key: frozenset[bytes]
    witness: FloatArray | None


class _Pruner:
    """Path-sensitive feasibility checks with witness reuse."""

    def __init__(self, store: NodeStore, dim: int, settings: LpSettings) -> None:
        self.store = store
        self.dim = dim
        self.settings = settings
        self._cache: dict[frozenset[bytes], FloatArray | None] = {}

    def start(self, region: Polytope | None) -> _Path | None:
        constraints = region.constraints if region is not None else ()
        key = frozenset(c.canonical_key() for c in constraints)
        if not constraints:
            return _Path((), key, np.zeros(self.dim))
        verdict = check_feasible(Polytope(self.dim, constraints), self.settings)
        self.store.stats.lp_calls += 1
        if not verdict.feasible or verdict.witness is None:
            return None
        return _Path(tuple(constraints), key, verdict.witness)

    def _witness_fits(self, witness: FloatArray | None, c: Constraint) -> bool:
        if witness is None:
            return False
        scale = float(np.max(np.abs(c.normal)))
        if scale == 0.0:
            return c.satisfied(witness)
        value = c.value(witness) / scale
        if c.strict:
            return value < -self.settings.strict_margin
        return value <= 0.0

    def extend(self, path: _Path, c: Constraint) -> _Path | None:
        ck = c.canonical_key()
        if ck in path.key:
            return path
        key = path.key | {ck}
        constraints = path.constraints + (c,)
        if key in self._cache:
            witness = self._cache[key]
            return None if witness is None else _Path(constraints, key, witness)
        if self._witness_fits(path.witness, c):
            self.store.stats.witness_hits += 1
            self._cache[key] = path.witness
            return _Path(constraints, key, path.witness)
        verdict = check_feasible(Polytope(self.dim, constraints), self.settings)
        self.store.stats.lp_calls += 1
        witness = verdict.witness if verdict.feasible else None
        self._cache[key] = witness
        return None if witness is None else _Path(constraints, key, witness)

    def branch(self, path: _Path, predicate: LinearPredicate) -> tuple[_Path | None, _Path | None]:
        on_true = self.extend(path, predicate.true_constraint())
        on_false = self.extend(path, predicate.false_constraint())
        if on_true is None or on_false is None:
            self.store.stats.pruned_branches += 1
        return (on_true, on_false)


def _explicit_domain(store: NodeStore, body: int, domain: Polytope) -> int:
    """Decision chain sending points outside ``domain`` to Bottom."""
    ref = body
    for c in reversed(domain.constraints):
        if not np.any(c.normal):
            violated = c.offset >= 0.0 if c.strict else c.offset > 0.0
            ref = store.bottom if violated else ref
            continue
        if c.strict:
            ref = store.make_node(LinearPredicate(-c.normal, -c.offset), ref, store.bottom)
        else:
            ref = store.make_node(LinearPredicate(c.normal, c.offset), store.bottom, ref)
    return ref


class _Builder:
    """Shared recursion for composition and lifting, with optional pruning."""

    def __init__(self, store: NodeStore, dim: int, prune: bool, settings: LpSettings | None) -> None:
        self.store = store
        self.pruner = _Pruner(store, dim, settings or DEFAULT_SETTINGS) if prune else None
        self.memo: dict[tuple[Any, ...], int] = {}

    def memo_key(self, path: _Path | None, *parts: Any) -> tuple[Any, ...]:
        return parts if path is None else parts + (path.key,)

    def split(
        self,
        predicate: LinearPredicate,
        path: _Path | None,
        on_true: Callable[[_Path | None], int],
        on_false: Callable[[_Path | None], int],
    ) -> int:
        if self.pruner is None or path is None:
            return self.store.make_node(predicate, on_true(path), on_false(path))
        p_true, p_false = self.pruner.branch(path, predicate)
        if p_true is None and p_false is None:
            return self.store.bottom
        if p_false is None:
            return on_true(p_true)
        if p_true is None:
            return on_false(p_false)
        return self.store.make_node(predicate, on_true(p_true), on_false(p_false))


def _start_path(builder: _Builder, domain: Polytope | None) -> tuple[bool, _Path | None]:
    if builder.pruner is None:
        return (True, None)
    path = builder.pruner.start(domain)
    return (path is not None, path)


def tads_compose(
    first: Tads,
    second: Tads,
    *,
    prune: bool = False,
    settings: LpSettings | None = None,
) -> Tads:
    """TADS of x -> second(first(x)); ``first`` is applied to the input first."""
    if first.kind not in (TerminalKind.AFFINE, TerminalKind.BOTTOM):
        raise TadsTypeError(f"first operand of composition needs affine terminals, got {first.kind.value}")
    if first.output_dim != second.input_dim:
        raise DimensionError(
            f"cannot compose TADS {first.input_dim}->{first.output_dim} with TADS "
            f"{second.input_dim}->{second.output_dim}"
        )
    store = first.store
    second_root = store.adopt(second)
    if second.domain is not None:
        second_root = _explicit_domain(store, second_root, second.domain)
    builder = _Builder(store, first.input_dim, prune, settings)

    def graft(alpha_ref: int, alpha: AffineFunction, ref: int, path: _Path | None) -> int:
        key = builder.memo_key(path, "g", alpha_ref, ref)
        hit = builder.memo.get(key)
        if hit is not None:
            return hit
        node = store.node(ref)
        if isinstance(node, Decision):
            sub = predicate_substitute(node.predicate, alpha)
            if isinstance(sub, bool):
                out = graft(alpha_ref, alpha, node.true_child if sub else node.false_child, path)
            else:
                out = builder.split(
                    sub,
                    path,
                    lambda p: graft(alpha_ref, alpha, node.true_child, p),
                    lambda p: graft(alpha_ref, alpha, node.false_child, p),
                )
        elif isinstance(node, AffineTerminal):
            out = store.make_terminal(AffineTerminal(affine_compose(node.function, alpha)))
        else:
            out = ref
        builder.memo[key] = out
        return out

    def walk(ref: int, path: _Path | None) -> int:
        key = builder.memo_key(path, "w", ref)
        hit = builder.memo.get(key)
        if hit is not None:
            return hit
        node = store.node(ref)
        if isinstance(node, Decision):
            out = builder.split(
                node.predicate,
                path,
                lambda p: walk(node.true_child, p),
                lambda p: walk(node.false_child, p),
            )
        elif isinstance(node, AffineTerminal):
            out = graft(ref, node.function, second_root, path)
        else:
            out = store.bottom
        builder.memo[key] = out
        return out

    ok, path = _start_path(builder, first.domain)
    root = walk(first.root, path) if ok else store.bottom
    return Tads(store, root, first.input_dim, second.output_dim, second.kind, first.domain)


class LiftOp(str, Enum):
    ADD = "add"


def tads_lift_binary(
    op: LiftOp | str,
    t1: Tads,
    t2: Tads,
    *,
    prune: bool = False,
    settings: LpSettings | None = None,
) -> Tads:
    """Pointwise ``t1 op t2`` by the product construction."""
    op = LiftOp(op)
    if t1.input_dim != t2.input_dim:
        raise DimensionError(f"cannot combine TADS over R^{t1.input_dim} and R^{t2.input_dim}")
    for t in (t1, t2):
        if t.kind not in (TerminalKind.AFFINE, TerminalKind.BOTTOM):
            raise TadsTypeError(f"lifted {op.value} needs affine terminals, got {t.kind.value}")
    if t1.output_dim != t2.output_dim:
        raise DimensionError(f"cannot {op.value} TADS with output dims {t1.output_dim} and {t2.output_dim}")
    store = t1.store
    r2 = store.adopt(t2)
    if t1.domain is None:
        domain = t2.domain
    elif t2.domain is None:
        domain = t1.domain
    else:
        domain = t1.domain.intersect(t2.domain)
    builder = _Builder(store, t1.input_dim, prune, settings)

    def combine(a: int, b: int, path: _Path | None) -> int:
        key = builder.memo_key(path, a, b)
        hit = builder.memo.get(key)
        if hit is not None:
            return hit
        na, nb = store.node(a), store.node(b)
        if isinstance(na, Decision):
            out = builder.split(
                na.predicate, path, lambda p: combine(na.true_child, b, p), lambda p: combine(na.false_child, b, p)
            )
        elif isinstance(nb, Decision):
            out = builder.split(
                nb.predicate, path, lambda p: combine(a, nb.true_child, p), lambda p: combine(a, nb.false_child, p)
            )
        elif isinstance(na, AffineTerminal) and isinstance(nb, AffineTerminal):
            out = store.make_terminal(AffineTerminal(affine_add(na.function, nb.function)))
        else:
            out = store.bottom
        builder.memo[key] = out
        return out

    ok, path = _start_path(builder, domain)
    root = combine(t1.root, r2, path) if ok else store.bottom
    return Tads(store, root, t1.input_dim, t1.output_dim, _same_kind({t1.kind, t2.kind}), domain)


def _map_terminals(t: Tads, fn: Callable[[Terminal], Terminal]) -> int:
    store = t.store
    done: dict[int, int] = {}
    for ref in t.reachable():
        node = store.node(ref)
        if isinstance(node, Decision):
            done[ref] = store.make_node(node.predicate, done[node.true_child], done[node.false_child])
        else:
            done[ref] = store.make_terminal(fn(node))
    return done[t.root]


def tads_lift_scale(s: float, t: Tads) -> Tads:
    if t.kind not in (TerminalKind.AFFINE, TerminalKind.BOTTOM):
        raise TadsTypeError(f"scaling needs affine terminals, got {t.kind.value}")

    def scale(term: Terminal) -> Terminal:
        if isinstance(term, AffineTerminal):
            return AffineTerminal(affine_scale(s, term.function))
        return term

    return Tads(t.store, _map_terminals(t, scale), t.input_dim, t.output_dim, t.kind, t.domain)


def relu_layer_tads(dim: int, *, store: NodeStore | None = None) -> Tads:
    if dim < 1:
        raise DimensionError(f"ReLU layer dimension must be >= 1, got {dim}")
    store = NodeStore() if store is None else store
    unit = np.eye(dim)

    def build(i: int, mask: tuple[float, ...]) -> int:
        if i == dim:
            return store.make_terminal(AffineTerminal(AffineFunction(np.diag(mask), np.zeros(dim))))
        return store.make_node(
            LinearPredicate(unit[i], 0.0),
            build(i + 1, mask + (1.0,)),
            build(i + 1, mask + (0.0,)),
        )

    return Tads(store, build(0, ()), dim, dim, TerminalKind.AFFINE)


def precondition_project(
    t: Tads,
    region: Polytope,
    *,
    prune: bool = True,
    settings: LpSettings | None = None,
) -> Tads:
    """Restrict ``t`` to ``region``; outside it the result evaluates to Bottom.

    Without pruning the region is spelled out as a decision chain in front of
    ``t``. With pruning every infeasible path is removed and the region is
    kept as the domain of the result.
    """
    if region.dim != t.input_dim:
        raise DimensionError(f"region of dim {region.dim} does not match TADS input dim {t.input_dim}")
    if not prune:
        root = _explicit_domain(t.store, t.root, region)
        return Tads(t.store, root, t.input_dim, t.output_dim, t.kind, t.domain)
    domain = region if t.domain is None else region.intersect(t.domain)
    start = identity_tads(t.input_dim, store=t.store, domain=domain)
    return tads_compose(start, t, prune=True, settings=settings)


def plnn_to_tads(
    net: Any,
    region: Polytope | None = None,
    *,
    prune: bool = True,
    store: NodeStore | None = None,
    settings: LpSettings | None = None,
) -> Tads:
    """Compile a ReLU network layer by layer; pruning only applies with a region."""
    layers: list[AffineFunction] = list(net.layers)
    store = NodeStore() if store is None else store
    if region is not None and region.dim != layers[0].input_dim:
        raise DimensionError(f"region of dim {region.dim} does not match network input dim {layers[0].input_dim}")
    prune = prune and region is not None
    t = terminal_tads(layers[0], store=store, domain=None if prune else region)
    if prune:
        t = precondition_project(t, region, prune=True, settings=settings)  # type: ignore[arg-type]
    for layer in layers[1:]:
        t = tads_compose(t, relu_layer_tads(t.output_dim, store=store), prune=prune, settings=settings)
        t = tads_compose(t, terminal_tads(layer, store=store), prune=prune, settings=settings)
    return t


def argmax_tads(m: int, *, store: NodeStore | None = None) -> Tads:
    """Smallest index of a maximal coordinate, as a running-max chain."""
    if m < 1:
        raise DimensionError(f"argmax needs at least one coordinate, got {m}")
    store = NodeStore() if store is None else store
    memo: dict[tuple[int, int], int] = {}

    def best_so_far(best: int, i: int) -> int:
        key = (best, i)
        if key in memo:
            return memo[key]
        if i == m:
            out = store.make_terminal(ClassTerminal(best + 1))
        else:
            normal = np.zeros(m)
            normal[i] = 1.0
            normal[best] = -1.0
            out = store.make_node(LinearPredicate(normal, 0.0), best_so_far(i, i + 1), best_so_far(best, i + 1))
        memo[key] = out
        return out

    return Tads(store, best_so_far(0, 1), m, m, TerminalKind.CLASS)


def class_indicator_tads(t: Tads, label: int) -> Tads:
    if t.kind not in (TerminalKind.CLASS, TerminalKind.BOTTOM):
        raise TadsTypeError(f"class indicator needs class terminals, got {t.kind.value}")
    if not 1 <= label <= t.output_dim:
        raise UnknownLabelError(f"label {label} outside 1..{t.output_dim}")

    def indicate(term: Terminal) -> Terminal:
        if isinstance(term, ClassTerminal):
            return BoolTerminal(term.label == label)
        return term

    return Tads(t.store, _map_terminals(t, indicate), t.input_dim, 1, TerminalKind.BOOL, t.domain)


def enumerate_paths(
    t: Tads,
    selector: Callable[[Terminal], bool] | None = None,
    *,
    prune: bool = False,
    include_bottom: bool = False,
    settings: LpSettings | None = None,
) -> Iterator[tuple[Polytope, Terminal]]:
    """Root-to-terminal paths as (constraints incl. domain, terminal), TRUE side first."""
    store = t.store
    pruner = _Pruner(store, t.input_dim, settings or DEFAULT_SETTINGS) if prune else None
    base = t.domain.constraints if t.domain is not None else ()

    def wanted(term: Terminal) -> bool:
        if isinstance(term, BottomTerminal) and not include_bottom:
            return False
        return selector is None or selector(term)

    if pruner is None:
        stack: list[tuple[int, tuple[Constraint, ...]]] = [(t.root, tuple(base))]
        while stack:
            ref, acc = stack.pop()
            node = store.node(ref)
            if isinstance(node, Decision):
                stack.append((node.false_child, acc + (node.predicate.false_constraint(),)))
                stack.append((node.true_child, acc + (node.predicate.true_constraint(),)))
            elif wanted(node):
                yield (Polytope(t.input_dim, acc), node)
        return

    start = pruner.start(t.domain)
    if start is None:
        return
    pstack: list[tuple[int, _Path]] = [(t.root, start)]
    while pstack:
        ref, path = pstack.pop()
        node = store.node(ref)
        if isinstance(node, Decision):
            on_true, on_false = pruner.branch(path, node.predicate)
            if on_false is not None:
                pstack.append((node.false_child, on_false))
            if on_true is not None:
                pstack.append((node.true_child, on_true))
        elif wanted(node):
            yield (Polytope(t.input_dim, path.constraints), node)


def tads_size(t: Tads) -> tuple[int, int]:
    """(inner, terminals) over reachable distinct nodes."""
    inner = terminals = 0
    for ref in t.reachable():
        if t.store.is_terminal(ref):
            terminals += 1
        else:
            inner += 1
    return (inner, terminals)


def describe_terminal(term: Terminal, precision: int = 4) -> str:
    if isinstance(term, ClassTerminal):
        return f"class {term.label}"
    if isinstance(term, BoolTerminal):
        return "true" if term.value else "false"
    if isinstance(term, BottomTerminal):
        return "bottom"
    fn = term.function
    if fn.output_dim > 4 or fn.input_dim > 6:
        return f"affine {fn.output_dim}x{fn.input_dim}"
    rows = []
    for i in range(fn.output_dim):
        terms = [f"{c:+.{precision}g}*x{j + 1}" for j, c in enumerate(fn.weight[i]) if c != 0.0]
        rows.append(" ".join(terms + [f"{fn.bias[i]:+.{precision}g}"]))
    return "\\n".join(rows)


def _export_dot(t: Tads) -> str:
    lines = ["digraph tads {", "  rankdir=LR;", "  node [fontname=\"Helvetica\"];"]
    for ref in t.reachable():
        node = t.store.node(ref)
        if isinstance(node, Decision):
            label = node.predicate.describe().replace('"', '\\"')
            lines.append(f'  n{ref} [shape=box, label="{label}"];')
            lines.append(f"  n{ref} -> n{node.true_child} [label=\"T\"];")
            lines.append(f"  n{ref} -> n{node.false_child} [label=\"F\", style=dashed];")
        else:
            lines.append(f'  n{ref} [shape=ellipse, label="{describe_terminal(node)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _constraint_json(c: Constraint) -> dict[str, Any]:
    return {"normal": c.normal.tolist(), "offset": c.offset, "strict": c.strict}


def tads_to_dict(t: Tads) -> dict[str, Any]:
    ids: dict[int, int] = {}
    nodes: list[dict[str, Any]] = []
    for ref in t.reachable():
        node = t.store.node(ref)
        ids[ref] = len(nodes)
        entry: dict[str, Any] = {"id": ids[ref]}
        if isinstance(node, Decision):
            entry.update(
                kind="pred",
                normal=node.predicate.normal.tolist(),
                offset=node.predicate.offset,
                true=ids[node.true_child],
                false=ids[node.false_child],
            )
        elif isinstance(node, AffineTerminal):
            entry.update(kind="affine", weight=node.function.weight.tolist(), bias=node.function.bias.tolist())
        elif isinstance(node, ClassTerminal):
            entry.update(kind="class", label=node.label)
        elif isinstance(node, BoolTerminal):
            entry.update(kind="bool", value=node.value)
        else:
            entry.update(kind="bottom")
        nodes.append(entry)
    return {
        "input_dim": t.input_dim,
        "output_dim": t.output_dim,
        "kind": t.kind.value,
        "domain": None if t.domain is None else [_constraint_json(c) for c in t.domain.constraints],
        "nodes": nodes,
        "root": ids[t.root],
    }


def tads_export(t: Tads, fmt: str = "json") -> bytes:
    if fmt == "dot":
        return _export_dot(t).encode("utf-8")
    if fmt == "json":
        return (json.dumps(tads_to_dict(t), indent=2) + "\n").encode("utf-8")
    raise ValueError(f"unknown export format '{fmt}' (expected 'dot' or 'json')")


def tads_import(data: bytes | str | dict[str, Any], *, store: NodeStore | None = None) -> Tads:
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise TadsFormatError(f"TADS JSON is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise TadsFormatError("TADS JSON must be an object")
    store = NodeStore() if store is None else store
    try:
        n = int(data["input_dim"])
        refs: dict[int, int] = {}
        for entry in data["nodes"]:
            kind = entry["kind"]
            if kind == "pred":
                pred = LinearPredicate(as_vector(entry["normal"]), float(entry["offset"]))
                ref = store.make_node(pred, refs[int(entry["true"])], refs[int(entry["false"])])
            elif kind == "affine":
                ref = store.make_terminal(AffineTerminal(AffineFunction(entry["weight"], entry["bias"])))
            elif kind == "class":
                ref = store.make_terminal(ClassTerminal(int(entry["label"])))
            elif kind == "bool":
                ref = store.make_terminal(BoolTerminal(bool(entry["value"])))
            elif kind == "bottom":
                ref = store.bottom
            else:
                raise TadsFormatError(f"unknown node kind '{kind}'")
            refs[int(entry["id"])] = ref
        domain = None
        if data.get("domain") is not None:
            domain = Polytope(
                n, tuple(Constraint(c["normal"], c["offset"], c["strict"]) for c in data["domain"])
            )
        return Tads(store, refs[int(data["root"])], n, int(data["output_dim"]), TerminalKind(data["kind"]), domain)
    except (KeyError, TypeError) as exc:
        raise TadsFormatError(f"malformed TADS JSON: missing or invalid field ({exc})") from exc
    except ValueError as exc:
        if isinstance(exc, TadsFormatError):
            raise
        raise TadsFormatError(f"malformed TADS JSON: {exc}") from exc
