import numpy as np
import pytest

from tads_verifier.affine import AffineFunction, DimensionError, Polytope
from tads_verifier.config import Optimizer, TrainConfig
from tads_verifier.nn import (
    EpochReport,
    LabeledDataset,
    Plnn,
    TrainingDivergedError,
    class_to_label,
    classify,
    classify_many,
    gradient_check,
    init_plnn,
    label_to_class,
    plnn_eval,
    plnn_eval_many,
    relu,
    train,
)
from tads_verifier.tads import tads_eval
from tads_verifier.verify import classifier_tads


def _blobs(seed: int, n: int = 200) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    a = rng.normal(loc=(-2.0, -2.0), scale=0.5, size=(n // 2, 2))
    b = rng.normal(loc=(2.0, 2.0), scale=0.5, size=(n // 2, 2))
    return LabeledDataset(np.vstack([a, b]), np.array([0] * (n // 2) + [1] * (n // 2)))


def test_zero_weight_network_returns_last_bias() -> None:
    net = Plnn((AffineFunction.zero(3, 2), AffineFunction(np.zeros((2, 3)), [0.25, -1.0])))
    assert np.array_equal(plnn_eval(net, [5.0, -5.0]), [0.25, -1.0])


def test_abs_network_evaluation() -> None:
    net = Plnn((AffineFunction([[1.0, -1.0], [-1.0, 1.0]], [0.0, 0.0]), AffineFunction([[1.0, 1.0]], [0.0])))
    assert np.allclose(plnn_eval(net, [3.0, 1.0]), [2.0])
    assert np.allclose(net([1.0, 3.0]), [2.0])


def test_layer_chaining_is_checked() -> None:
    with pytest.raises(DimensionError, match="layer 2 expects input dim 4"):
        Plnn((AffineFunction.zero(3, 2), AffineFunction.zero(1, 4)))
    net = init_plnn(2, (3,), 2, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        plnn_eval(net, [1.0, 2.0, 3.0])


def test_classify_tie_breaks_to_smaller_index() -> None:
    net = Plnn((AffineFunction(np.zeros((3, 2)), [0.1, 0.9, 0.9]),))
    assert classify(net, [0.0, 0.0]) == 2
    constant = Plnn((AffineFunction(np.zeros((4, 2)), [1.0, 1.0, 1.0, 1.0]),))
    rng = np.random.default_rng(1)
    assert set(classify_many(constant, rng.normal(size=(50, 2))).tolist()) == {1}


def test_classify_agrees_with_tads_pipeline() -> None:
    rng = np.random.default_rng(2)
    net = init_plnn(2, (4, 4), 3, rng)
    t = classifier_tads(net, None)
    points = rng.normal(size=(1000, 2))
    for x, label in zip(points, classify_many(net, points)):
        assert tads_eval(t, x) == label == classify(net, x)


def test_batch_and_single_evaluation_agree() -> None:
    rng = np.random.default_rng(3)
    net = init_plnn(5, (6, 4), 3, rng)
    points = rng.normal(size=(20, 5))
    batch = plnn_eval_many(net, points)
    for row, x in zip(batch, points):
        assert np.allclose(row, plnn_eval(net, x))


def test_relu_idempotence_and_neuron_count() -> None:
    x = np.array([-1.0, 0.0, 2.5])
    assert np.array_equal(relu(relu(x)), relu(x))
    net = init_plnn(784, (10, 10, 10, 10, 10), 10, np.random.default_rng(0))
    assert net.widths == (10, 10, 10, 10, 10)
    assert net.neuron_count == 50


def test_argmax_invariant_under_uniform_output_shift() -> None:
    rng = np.random.default_rng(4)
    net = init_plnn(3, (5,), 4, rng)
    last = net.layers[-1]
    shifted = Plnn(net.layers[:-1] + (AffineFunction(last.weight, last.bias + 7.5),))
    points = rng.normal(size=(100, 3))
    assert np.array_equal(classify_many(net, points), classify_many(shifted, points))


def test_precompose_folds_affine_into_first_layer() -> None:
    rng = np.random.default_rng(5)
    net = init_plnn(2, (3,), 2, rng)
    pre = AffineFunction(rng.normal(size=(2, 4)), rng.normal(size=2))
    folded = net.precompose(pre)
    assert folded.input_dim == 4
    for x in rng.normal(size=(20, 4)):
        assert np.allclose(folded(x), net(pre(x)))


def test_label_class_mapping() -> None:
    assert label_to_class(0) == 1
    assert label_to_class(9) == 10
    assert class_to_label(10) == 9


def test_training_separates_blobs() -> None:
    data = _blobs(0)
    cfg = TrainConfig(epochs=20, batch_size=20, learning_rate=1e-2, seed=0, layer_widths=(8,))
    reports: list[EpochReport] = []
    net = train(data, cfg, on_epoch=reports.append)
    assert [r.epoch for r in reports] == list(range(1, 21))
    acc = float(np.mean(classify_many(net, data.inputs) == data.labels + 1))
    assert acc >= 0.99
    assert reports[-1].mean_loss < reports[0].mean_loss


def test_training_is_deterministic_for_a_seed() -> None:
    data = _blobs(1)
    cfg = TrainConfig(epochs=3, batch_size=32, seed=7, layer_widths=(4, 4))
    a = train(data, cfg)
    b = train(data, cfg)
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.weight, lb.weight)
        assert np.array_equal(la.bias, lb.bias)
    c = train(data, cfg.model_copy(update={"seed": 8}))
    assert not np.array_equal(a.layers[0].weight, c.layers[0].weight)


def test_training_through_frozen_encoder() -> None:
    data = _blobs(2)
    encoder = AffineFunction([[1.0, 1.0]], [0.0])
    net = train(data, TrainConfig(epochs=10, batch_size=20, learning_rate=1e-2, layer_widths=(4,)), encoder)
    assert net.input_dim == 1
    deployed = net.precompose(encoder)
    acc = float(np.mean(classify_many(deployed, data.inputs) == data.labels + 1))
    assert acc >= 0.95
    with pytest.raises(DimensionError, match="encoder expects input dim 3"):
        train(data, TrainConfig(epochs=1), AffineFunction(np.ones((1, 3)), [0.0]))


def test_sgd_optimizer_runs() -> None:
    data = _blobs(3)
    cfg = TrainConfig(epochs=15, batch_size=20, learning_rate=2e-2, optimizer=Optimizer.SGD, momentum=0.9, layer_widths=(4,))
    net = train(data, cfg)
    assert float(np.mean(classify_many(net, data.inputs) == data.labels + 1)) >= 0.95


def test_divergence_aborts_with_diagnostics() -> None:
    data = LabeledDataset(np.array([[np.nan, 0.0], [0.0, 1.0]]), np.array([0, 1]))
    with pytest.raises(TrainingDivergedError, match="non-finite loss") as info:
        train(data, TrainConfig(epochs=1, batch_size=2, layer_widths=(2,)))
    assert info.value.epoch == 1
    assert info.value.batch == 0


def test_gradient_check_linear_network_is_exact() -> None:
    rng = np.random.default_rng(6)
    net = Plnn((AffineFunction(rng.normal(size=(3, 4)), rng.normal(size=3)),))
    report = gradient_check(net, rng.normal(size=4), 1)
    assert not report.skipped
    assert report.checked == 3 * 4 + 3
    assert report.max_relative_error <= 1e-6


def test_gradient_check_random_deep_networks() -> None:
    rng = np.random.default_rng(7)
    for seed in range(3):
        net = init_plnn(4, (5, 5), 3, np.random.default_rng(seed))
        net = Plnn(tuple(AffineFunction(l.weight, rng.normal(scale=0.3, size=l.output_dim)) for l in net.layers))
        checked = 0
        for x in rng.normal(size=(50, 4)):
            report = gradient_check(net, x, int(rng.integers(3)))
            if report.skipped:
                continue
            checked += 1
            assert report.max_relative_error <= 1e-4, report.worst_parameter
        assert checked > 0


def test_gradient_check_skips_points_near_kinks() -> None:
    net = Plnn((AffineFunction([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]), AffineFunction(np.eye(2), [0.0, 0.0])))
    report = gradient_check(net, [1.0, 5e-6], 0)
    assert report.skipped
    assert "kink" in report.reason


def test_dataset_shape_checks() -> None:
    with pytest.raises(DimensionError, match="3 inputs but 2 labels"):
        LabeledDataset(np.zeros((3, 2)), np.array([0, 1]))
    data = _blobs(4, n=10)
    assert len(data.head(4)) == 4
    assert data.dim == 2


def test_tads_of_trained_network_agrees_in_a_box() -> None:
    data = _blobs(5)
    net = train(data, TrainConfig(epochs=2, batch_size=50, layer_widths=(4, 3)))
    region = Polytope.box([0.0, 0.0], 1.0)
    t = classifier_tads(net, region)
    rng = np.random.default_rng(8)
    for x in rng.uniform(-1.0, 1.0, size=(300, 2)):
        assert tads_eval(t, x) == classify(net, x)
