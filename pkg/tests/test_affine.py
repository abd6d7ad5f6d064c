import numpy as np
import pytest

from tads_verifier.affine import (
    AffineFunction,
    Constraint,
    DimensionError,
    LinearPredicate,
    NormKind,
    Polytope,
    affine_add,
    affine_compose,
    affine_scale,
    norm,
    predicate_key,
    predicate_substitute,
)


def _random_affine(rng: np.random.Generator, rows: int, cols: int) -> AffineFunction:
    return AffineFunction(rng.normal(size=(rows, cols)), rng.normal(size=rows))


def test_affine_add_entrywise() -> None:
    a = AffineFunction([[1, 2], [3, 4]], [1, 1])
    b = AffineFunction([[1, 0], [0, 1]], [-1, 0])
    out = affine_add(a, b)
    assert np.array_equal(out.weight, [[2, 2], [3, 5]])
    assert np.array_equal(out.bias, [0, 1])

    ident = affine_add(AffineFunction([[1]], [0]), AffineFunction([[0]], [0]))
    assert ident.allclose(AffineFunction([[1]], [0]))


def test_affine_additive_inverse_is_zero() -> None:
    a = AffineFunction([[1.5, -2.0]], [3.0])
    assert (a + (-1.0) * a).allclose(AffineFunction.zero(1, 2))


def test_affine_add_rejects_shape_mismatch() -> None:
    with pytest.raises(DimensionError, match=r"\(1, 2\).*\(2, 2\)"):
        affine_add(AffineFunction([[1, 2]], [0]), AffineFunction(np.eye(2), [0, 0]))


def test_affine_scale_examples() -> None:
    a = AffineFunction([[1, -1]], [3])
    doubled = affine_scale(2, a)
    assert np.array_equal(doubled.weight, [[2, -2]])
    assert np.array_equal(doubled.bias, [6])
    assert affine_scale(1, a).allclose(a)
    assert affine_scale(0, a).allclose(AffineFunction.zero(1, 2))
    with pytest.raises(ValueError, match="finite"):
        affine_scale(float("inf"), a)


def test_affine_compose_examples() -> None:
    out = affine_compose(AffineFunction([[2]], [1]), AffineFunction([[3]], [-1]))
    assert np.array_equal(out.weight, [[6]])
    assert np.array_equal(out.bias, [-1])

    a = AffineFunction([[1, 2], [0, 1]], [1, -1])
    assert (AffineFunction.identity(2) @ a).allclose(a)
    assert (a @ AffineFunction.identity(2)).allclose(a)


def test_affine_compose_matches_sequential_evaluation() -> None:
    rng = np.random.default_rng(0)
    outer = _random_affine(rng, 3, 4)
    inner = _random_affine(rng, 4, 2)
    composed = outer @ inner
    for x in rng.normal(size=(100, 2)):
        assert np.allclose(composed(x), outer(inner(x)), rtol=1e-9, atol=1e-12)
    with pytest.raises(DimensionError):
        inner @ outer


def test_affine_vector_space_and_monoid_laws() -> None:
    rng = np.random.default_rng(1)
    for _ in range(200):
        a, b, c = (_random_affine(rng, 2, 3) for _ in range(3))
        assert ((a + b) + c).allclose(a + (b + c))
        assert (a + b).allclose(b + a)
        f, g, h = _random_affine(rng, 2, 3), _random_affine(rng, 3, 3), _random_affine(rng, 3, 2)
        left, right = (f @ g) @ h, f @ (g @ h)
        for x in rng.normal(size=(5, 2)):
            assert np.allclose(left(x), right(x), rtol=1e-9, atol=1e-9)


def test_predicate_substitute_examples() -> None:
    p = LinearPredicate([1.0, -2.0], 0.5)
    same = predicate_substitute(p, AffineFunction.identity(2))
    assert isinstance(same, LinearPredicate)
    assert predicate_key(same) == predicate_key(p)

    diff = predicate_substitute(LinearPredicate([1.0], 0.0), AffineFunction([[1.0, -1.0]], [0.0]))
    assert isinstance(diff, LinearPredicate)
    assert np.array_equal(diff.normal, [1.0, -1.0])
    assert diff.offset == 0.0

    assert predicate_substitute(LinearPredicate([1.0], 1.0), AffineFunction([[0.0, 0.0]], [0.0])) is True
    assert predicate_substitute(LinearPredicate([1.0], -1.0), AffineFunction([[0.0, 0.0]], [0.0])) is False


def test_predicate_substitute_preserves_truth_off_boundary() -> None:
    rng = np.random.default_rng(2)
    for _ in range(500):
        p = LinearPredicate(rng.normal(size=3), rng.normal())
        a = _random_affine(rng, 3, 2)
        x = rng.normal(size=2)
        value = p.value(a(x))
        if abs(value) < 1e-9:
            continue
        sub = predicate_substitute(p, a)
        holds = sub if isinstance(sub, bool) else sub.holds(x)
        assert holds == (value > 0)


def test_predicate_keys_respect_orientation() -> None:
    assert predicate_key(LinearPredicate([2, 0], 4)) == predicate_key(LinearPredicate([1, 0], 2))
    assert predicate_key(LinearPredicate([1, 0], 2)) != predicate_key(LinearPredicate([-1, 0], -2))

    rng = np.random.default_rng(3)
    for _ in range(200):
        p = LinearPredicate(rng.normal(size=4), rng.normal())
        s = float(rng.uniform(1e-3, 1e3))
        assert predicate_key(LinearPredicate(s * p.normal, s * p.offset)) == predicate_key(p)


def test_predicate_boundary_is_false_and_zero_normal_rejected() -> None:
    p = LinearPredicate([1.0, -1.0], 0.0)
    assert p.holds([2.0, 1.0]) is True
    assert p.holds([1.0, 1.0]) is False
    with pytest.raises(ValueError, match="zero vector"):
        LinearPredicate([0.0, 0.0], 1.0)


def test_norm_examples() -> None:
    assert norm([3, -4], NormKind.TWO) == pytest.approx(5.0)
    assert norm([3, -4], "infinity") == 4.0
    n = 16
    v = np.where(np.arange(n) % 2 == 0, 1.0, -1.0) / np.sqrt(n)
    assert norm(v, "one") == pytest.approx(np.sqrt(n))
    assert norm([0.0, 0.0], "one") == 0.0


def test_polytope_box_and_contains() -> None:
    box = Polytope.box([1.0, -1.0], 0.5)
    assert len(box) == 4
    assert box.contains([1.5, -0.5])
    assert not box.contains([1.6, -1.0])
    assert Polytope.full(3).contains([100.0, -5.0, 0.0])

    open_half = Polytope(1, (Constraint([1.0], 0.0, strict=True),))
    assert open_half.contains([-1.0])
    assert not open_half.contains([0.0])


def test_vector_invariants_are_enforced() -> None:
    with pytest.raises(ValueError, match="non-finite"):
        AffineFunction([[float("nan")]], [0.0])
    with pytest.raises(DimensionError, match="bias length 2"):
        AffineFunction([[1.0, 0.0]], [0.0, 1.0])
    with pytest.raises(DimensionError):
        Polytope(2, (Constraint([1.0], 0.0),))
