from __future__ import annotations

import gzip
import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from .affine import AffineFunction
from .nn import LabeledDataset, Plnn, Split
from .pca import PcaModel
from .tads import NodeStore, Tads, tads_export, tads_import


class IdxFormatError(ValueError):
    pass


IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

_MNIST_FILES = {
    Split.TRAIN: ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    Split.TEST: ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def git_blob_sha1(path: str | Path) -> str:
    """Content hash as ``git hash-object`` computes it."""
    data = Path(path).read_bytes()
    digest = hashlib.sha1()
    digest.update(f"blob {len(data)}\0".encode("ascii"))
    digest.update(data)
    return digest.hexdigest()


def _read_bytes(path: Path) -> bytes:
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _resolve(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz", directory / stem.replace("-idx", ".idx")):
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"MNIST file '{stem}' not found under: {directory}")


def read_idx(path: str | Path, expected_magic: int) -> np.ndarray:
    p = Path(path)
    raw = _read_bytes(p)
    if len(raw) < 8:
        raise IdxFormatError(f"{p}: file too short for an IDX header ({len(raw)} bytes)")
    magic = int.from_bytes(raw[:4], "big")
    if magic != expected_magic:
        raise IdxFormatError(f"{p}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(f"{p}: truncated header")
    shape = tuple(int(d) for d in np.frombuffer(raw[4:header], dtype=">u4"))
    expected = int(np.prod(shape))
    payload = np.frombuffer(raw[header:], dtype=np.uint8)
    if payload.size < expected:
        raise IdxFormatError(f"{p}: truncated payload, {payload.size} of {expected} bytes for shape {shape}")
    return payload[:expected].reshape(shape)


def load_mnist(data_dir: str | Path, split: Split | str = Split.TRAIN) -> LabeledDataset:
    directory = Path(data_dir)
    if not directory.is_dir():
        raise FileNotFoundError(f"Dataset directory not found: {directory}")
    split = Split(split)
    image_stem, label_stem = _MNIST_FILES[split]
    images = read_idx(_resolve(directory, image_stem), IMAGE_MAGIC)
    labels = read_idx(_resolve(directory, label_stem), LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels in {split.value} split")
    if labels.size and int(labels.max()) > 9:
        raise IdxFormatError(f"label {int(labels.max())} outside 0..9")
    inputs = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return LabeledDataset(inputs, labels.astype(np.int64), split)


def _load_json_file(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"Invalid JSON in {path}") from exc


def _write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def plnn_to_dict(net: Plnn) -> dict[str, Any]:
    return {
        "layers": [
            {
                "rows": layer.output_dim,
                "cols": layer.input_dim,
                "weight": layer.weight.reshape(-1).tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in net.layers
        ]
    }


def plnn_from_dict(raw: dict[str, Any]) -> Plnn:
    layers = raw.get("layers")
    if not isinstance(layers, list) or not layers:
        raise ValueError("Weight payload must contain a non-empty 'layers' array")
    out = []
    for i, entry in enumerate(layers, start=1):
        missing = [k for k in ("rows", "cols", "weight", "bias") if k not in entry]
        if missing:
            raise ValueError(f"Layer {i} missing required fields: {', '.join(missing)}")
        rows, cols = int(entry["rows"]), int(entry["cols"])
        weight = np.asarray(entry["weight"], dtype=np.float64)
        if weight.size != rows * cols:
            raise ValueError(f"Layer {i}: {weight.size} weights do not fill a {rows}x{cols} matrix")
        out.append(AffineFunction(weight.reshape(rows, cols), entry["bias"]))
    return Plnn(tuple(out))


def save_weights(net: Plnn, path: str | Path) -> Path:
    return _write_json(Path(path), plnn_to_dict(net))


def load_weights(path: str | Path) -> Plnn:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"Weight file not found: {p}")
    raw = _load_json_file(p)
    if not isinstance(raw, dict):
        raise ValueError(f"Weight file must contain a JSON object: {p}")
    return plnn_from_dict(raw)


def save_pca(model: PcaModel, path: str | Path) -> Path:
    return _write_json(
        Path(path),
        {
            "mean": model.mean.tolist(),
            "components": model.components.tolist(),
            "eigenvalues": model.eigenvalues.tolist(),
        },
    )


def load_pca(path: str | Path) -> PcaModel:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"PCA file not found: {p}")
    raw = _load_json_file(p)
    if not isinstance(raw, dict):
        raise ValueError(f"PCA file must contain a JSON object: {p}")
    missing = [k for k in ("mean", "components", "eigenvalues") if k not in raw]
    if missing:
        raise ValueError(f"PCA payload missing required fields: {', '.join(missing)}")
    return PcaModel(
        mean=np.asarray(raw["mean"], dtype=np.float64),
        components=np.asarray(raw["components"], dtype=np.float64),
        eigenvalues=np.asarray(raw["eigenvalues"], dtype=np.float64),
    )


def save_tads(t: Tads, path: str | Path, fmt: str = "json") -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(tads_export(t, fmt))
    return p


def load_tads(path: str | Path, store: NodeStore | None = None) -> Tads:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"TADS file not found: {p}")
    return tads_import(p.read_bytes(), store=store)
