from pathlib import Path

import numpy as np
import pytest

from tads_verifier.affine import AffineFunction, DimensionError, Polytope
from tads_verifier.nn import Plnn, classify, init_plnn
from tads_verifier.pca import PcaModel
from tads_verifier.plotting import (
    Mark,
    classify_grid,
    region_csv,
    render_region_plot,
    save_adversarial_image,
    save_component_images,
)
from tads_verifier.verify import classifier_tads


IDENTITY_NET = Plnn((AffineFunction.identity(2),))


def test_classify_grid_matches_network() -> None:
    rng = np.random.default_rng(0)
    net = init_plnn(2, (4,), 3, rng)
    t = classifier_tads(net, None)
    xs = np.linspace(-2.0, 2.0, 11)
    ys = np.linspace(-1.0, 1.0, 7)
    labels = classify_grid(t, xs, ys)
    assert labels.shape == (7, 11)
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            assert labels[i, j] == classify(net, [x, y])


def test_region_plot_of_identity_net() -> None:
    region = Polytope.box([0.0, 0.0], 1.0)
    t = classifier_tads(IDENTITY_NET, None)
    plot = render_region_plot(t, region, (Mark(np.array([0.3, 0.0]), "x"),), grid=16, title="identity")
    assert plot.svg.lstrip().startswith(b"<?xml")
    assert plot.labels.shape == (16, 16)
    assert set(np.unique(plot.labels).tolist()) == {1, 2}
    assert plot.xs[0] == pytest.approx(-1.0)
    assert plot.ys[-1] == pytest.approx(1.0)

    again = render_region_plot(t, region, (Mark(np.array([0.3, 0.0]), "x"),), grid=16, title="identity")
    assert again.svg == plot.svg


def test_region_csv_lists_path_constraints() -> None:
    t = classifier_tads(IDENTITY_NET, None)
    lines = region_csv(t).splitlines()
    assert lines[0] == "region,label,w1,w2,offset,strict"
    rows = [line.split(",") for line in lines[1:]]
    assert {r[1] for r in rows} == {"1", "2"}
    assert {r[0] for r in rows} == {"0", "1"}


def test_region_plot_rejects_other_dimensions() -> None:
    net = init_plnn(3, (2,), 2, np.random.default_rng(1))
    with pytest.raises(DimensionError, match="2-D inputs"):
        render_region_plot(classifier_tads(net, None), Polytope.box(np.zeros(3), 1.0), grid=8)


def test_component_images(tmp_path: Path) -> None:
    m = PcaModel(mean=np.zeros(16), components=np.eye(16)[:3], eigenvalues=np.array([3.0, 2.0, 1.0]))
    written = save_component_images(m, 2, tmp_path / "components")
    assert [p.name for p in written] == [
        "component_01.png",
        "component_01.csv",
        "component_02.png",
        "component_02.csv",
    ]
    assert written[0].read_bytes().startswith(b"\x89PNG")
    grid = np.loadtxt(written[1], delimiter=",")
    assert grid.shape == (4, 4)
    assert grid[0, 0] == 1.0
    assert grid.sum() == 1.0


def test_adversarial_image(tmp_path: Path) -> None:
    x = np.zeros(16)
    y = x.copy()
    y[5] = 0.1
    path = save_adversarial_image(x, y, tmp_path / "out" / "adversarial.png", labels=(10, 5))
    assert path.exists()
    assert path.read_bytes().startswith(b"\x89PNG")
