import gzip
import json
from pathlib import Path

import numpy as np
import pytest

from tads_verifier.affine import Polytope
from tads_verifier.loaders import (
    IMAGE_MAGIC,
    LABEL_MAGIC,
    IdxFormatError,
    git_blob_sha1,
    load_mnist,
    load_pca,
    load_tads,
    load_weights,
    read_idx,
    save_pca,
    save_tads,
    save_weights,
)
from tads_verifier.nn import Split, init_plnn, plnn_eval
from tads_verifier.pca import pca_fit
from tads_verifier.tads import tads_eval, tads_export
from tads_verifier.verify import classifier_tads


def _idx_bytes(magic: int, array: np.ndarray) -> bytes:
    header = magic.to_bytes(4, "big") + b"".join(int(d).to_bytes(4, "big") for d in array.shape)
    return header + array.astype(np.uint8).tobytes()


def _write_split(directory: Path, prefix: str, images: np.ndarray, labels: np.ndarray, *, gz: bool = False) -> None:
    names = {
        "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    }[prefix]
    payloads = (_idx_bytes(IMAGE_MAGIC, images), _idx_bytes(LABEL_MAGIC, labels))
    for name, payload in zip(names, payloads):
        if gz:
            (directory / f"{name}.gz").write_bytes(gzip.compress(payload))
        else:
            (directory / name).write_bytes(payload)


def test_load_mnist_scales_and_flattens(tmp_path: Path) -> None:
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(5, 28, 28), dtype=np.uint8)
    labels = np.array([0, 9, 3, 3, 7], dtype=np.uint8)
    _write_split(tmp_path, "train", images, labels)

    data = load_mnist(tmp_path, "train")
    assert data.split == Split.TRAIN
    assert data.inputs.shape == (5, 784)
    assert data.labels.tolist() == [0, 9, 3, 3, 7]
    assert data.inputs.min() >= 0.0 and data.inputs.max() <= 1.0
    assert np.allclose(data.inputs[1], images[1].reshape(-1) / 255.0)


def test_load_mnist_reads_gzipped_files(tmp_path: Path) -> None:
    images = np.full((2, 28, 28), 255, dtype=np.uint8)
    _write_split(tmp_path, "test", images, np.array([1, 2], dtype=np.uint8), gz=True)
    data = load_mnist(tmp_path, Split.TEST)
    assert len(data) == 2
    assert np.all(data.inputs == 1.0)


def test_load_mnist_missing_inputs(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError, match="Dataset directory not found"):
        load_mnist(tmp_path / "nope")
    with pytest.raises(FileNotFoundError, match="train-images-idx3-ubyte"):
        load_mnist(tmp_path)


def test_read_idx_rejects_bad_magic(tmp_path: Path) -> None:
    path = tmp_path / "bad"
    path.write_bytes(_idx_bytes(LABEL_MAGIC, np.array([1, 2, 3])))
    with pytest.raises(IdxFormatError, match="bad magic 0x00000801"):
        read_idx(path, IMAGE_MAGIC)


def test_read_idx_rejects_truncation(tmp_path: Path) -> None:
    path = tmp_path / "short"
    path.write_bytes(b"\x00\x00")
    with pytest.raises(IdxFormatError, match="too short"):
        read_idx(path, LABEL_MAGIC)

    payload = _idx_bytes(IMAGE_MAGIC, np.zeros((3, 4, 4)))
    path.write_bytes(payload[:-5])
    with pytest.raises(IdxFormatError, match="truncated payload"):
        read_idx(path, IMAGE_MAGIC)


def test_load_mnist_count_mismatch(tmp_path: Path) -> None:
    _write_split(tmp_path, "train", np.zeros((3, 28, 28)), np.array([1, 2], dtype=np.uint8))
    with pytest.raises(IdxFormatError, match="3 images but 2 labels"):
        load_mnist(tmp_path)


def test_git_blob_sha1(tmp_path: Path) -> None:
    empty = tmp_path / "empty"
    empty.write_bytes(b"")
    assert git_blob_sha1(empty) == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    hello = tmp_path / "hello"
    hello.write_bytes(b"hello\n")
    assert git_blob_sha1(hello) == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_weights_round_trip(tmp_path: Path) -> None:
    rng = np.random.default_rng(1)
    net = init_plnn(6, (4, 3), 5, rng)
    path = save_weights(net, tmp_path / "nested" / "weights.json")
    loaded = load_weights(path)
    assert loaded.widths == net.widths
    for x in rng.normal(size=(10, 6)):
        assert np.array_equal(plnn_eval(loaded, x), plnn_eval(net, x))

    raw = json.loads(path.read_text(encoding="utf-8"))
    assert [layer["rows"] for layer in raw["layers"]] == [4, 3, 5]
    assert [layer["cols"] for layer in raw["layers"]] == [6, 4, 3]


def test_load_weights_rejects_malformed_payloads(tmp_path: Path) -> None:
    path = tmp_path / "w.json"
    with pytest.raises(FileNotFoundError):
        load_weights(path)
    path.write_text("{", encoding="utf-8")
    with pytest.raises(ValueError, match="Invalid JSON"):
        load_weights(path)
    path.write_text(json.dumps({"layers": []}), encoding="utf-8")
    with pytest.raises(ValueError, match="non-empty 'layers'"):
        load_weights(path)
    path.write_text(json.dumps({"layers": [{"rows": 2, "cols": 2, "weight": [1.0]}]}), encoding="utf-8")
    with pytest.raises(ValueError, match="missing required fields: bias"):
        load_weights(path)
    path.write_text(json.dumps({"layers": [{"rows": 2, "cols": 2, "weight": [1.0], "bias": [0, 0]}]}), encoding="utf-8")
    with pytest.raises(ValueError, match="do not fill a 2x2 matrix"):
        load_weights(path)


def test_pca_round_trip(tmp_path: Path) -> None:
    rng = np.random.default_rng(2)
    data = rng.normal(size=(40, 5)) * np.array([3.0, 2.0, 1.0, 0.5, 0.1])
    model = pca_fit(data)
    loaded = load_pca(save_pca(model, tmp_path / "pca.json"))
    assert np.array_equal(loaded.mean, model.mean)
    assert np.array_equal(loaded.components, model.components)
    assert np.array_equal(loaded.eigenvalues, model.eigenvalues)

    (tmp_path / "broken.json").write_text(json.dumps({"mean": [0.0]}), encoding="utf-8")
    with pytest.raises(ValueError, match="components, eigenvalues"):
        load_pca(tmp_path / "broken.json")


def test_tads_file_round_trip(tmp_path: Path) -> None:
    rng = np.random.default_rng(3)
    net = init_plnn(2, (3,), 3, rng)
    t = classifier_tads(net, Polytope.box([0.0, 0.0], 2.0))
    path = save_tads(t, tmp_path / "tads.json")
    loaded = load_tads(path)
    assert tads_export(loaded) == path.read_bytes()
    for x in rng.uniform(-2.0, 2.0, size=(50, 2)):
        assert tads_eval(loaded, x) == tads_eval(t, x)

    dot = save_tads(t, tmp_path / "tads.dot", "dot").read_text(encoding="utf-8")
    assert dot.startswith("digraph")
    with pytest.raises(FileNotFoundError):
        load_tads(tmp_path / "missing.json")
