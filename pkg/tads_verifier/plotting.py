from __future__ import annotations

import csv
from dataclasses import dataclass
import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402
import numpy as np  # noqa: E402

from .affine import DimensionError, FloatArray, Polytope  # noqa: E402
from .config import LpSettings  # noqa: E402
from .feasibility import bounding_box  # noqa: E402
from .pca import PcaModel  # noqa: E402
from .tads import ClassTerminal, Tads, enumerate_paths, precondition_project, tads_leaf_ids  # noqa: E402

_RC = {"svg.hashsalt": "tads-verifier", "svg.fonttype": "none"}
_PALETTE = ["#d9d9d9", "#f6c945", "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
            "#da8bc3", "#8c8c8c", "#64b5cd"]


@dataclass(frozen=True, eq=False)
class Mark:
    point: FloatArray
    label: str
    color: str = "black"


@dataclass(frozen=True, eq=False)
class RegionPlot:
    svg: bytes
    csv: str
    labels: np.ndarray
    xs: FloatArray
    ys: FloatArray


def _image_shape(n: int) -> tuple[int, int]:
    side = int(round(np.sqrt(n)))
    return (side, side) if side * side == n else (1, n)


def classify_grid(t: Tads, xs: FloatArray, ys: FloatArray) -> np.ndarray:
    """Class label per grid cell (rows follow ys); 0 marks Bottom."""
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.reshape(-1), gy.reshape(-1)])
    leaves = tads_leaf_ids(t, points)
    lookup: dict[int, int] = {}
    for ref in np.unique(leaves):
        term = t.store.node(int(ref))
        lookup[int(ref)] = term.label if isinstance(term, ClassTerminal) else 0
    labels = np.vectorize(lookup.__getitem__, otypes=[np.int64])(leaves)
    return labels.reshape(gy.shape)


def region_csv(t: Tads, settings: LpSettings | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["region", "label", "w1", "w2", "offset", "strict"])
    paths = enumerate_paths(t, lambda term: isinstance(term, ClassTerminal), prune=True, settings=settings)
    for index, (poly, term) in enumerate(paths):
        for c in poly.constraints:
            writer.writerow([index, term.label, repr(float(c.normal[0])), repr(float(c.normal[1])),  # type: ignore[union-attr]
                             repr(c.offset), int(c.strict)])
    return buf.getvalue()


def render_region_plot(
    t: Tads,
    region: Polytope,
    marks: Sequence[Mark] = (),
    *,
    grid: int = 512,
    settings: LpSettings | None = None,
    title: str | None = None,
) -> RegionPlot:
    """Rasterize a 2-D class TADS over ``region`` and list its path regions as CSV."""
    if t.input_dim != 2 or region.dim != 2:
        raise DimensionError(f"region plots need 2-D inputs, got TADS dim {t.input_dim}")
    lo, hi = bounding_box(region, settings)
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    scoped = precondition_project(t, region, prune=True, settings=settings)
    labels = classify_grid(scoped, xs, ys)

    top = max(int(labels.max()), 1)
    cmap = ListedColormap([_PALETTE[i % len(_PALETTE)] for i in range(top + 1)])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 6))
        ax.imshow(
            labels,
            origin="lower",
            extent=(lo[0], hi[0], lo[1], hi[1]),
            cmap=cmap,
            vmin=-0.5,
            vmax=top + 0.5,
            interpolation="nearest",
            aspect="auto",
        )
        for mark in marks:
            ax.scatter([mark.point[0]], [mark.point[1]], c=mark.color, s=40, zorder=3)
            ax.annotate(mark.label, (mark.point[0], mark.point[1]), textcoords="offset points", xytext=(5, 5))
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        if title:
            ax.set_title(title)
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return RegionPlot(buf.getvalue(), region_csv(scoped, settings), labels, xs, ys)


def save_component_images(m: PcaModel, k: int, out_dir: str | Path) -> list[Path]:
    """One PNG and one CSV grid per principal component."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shape = _image_shape(m.dim)
    written: list[Path] = []
    for i in range(min(k, m.stored)):
        image = m.components[i].reshape(shape)
        limit = float(np.max(np.abs(image))) or 1.0
        png = out / f"component_{i + 1:02d}.png"
        with plt.rc_context(_RC):
            fig, ax = plt.subplots(figsize=(3, 3))
            ax.imshow(image, cmap="RdBu_r", vmin=-limit, vmax=limit, interpolation="nearest")
            ax.set_title(f"p{i + 1}  (l1={np.sum(np.abs(m.components[i])):.2f})", fontsize=9)
            ax.axis("off")
            fig.savefig(png, dpi=100, bbox_inches="tight", metadata={"Software": None})
            plt.close(fig)
        grid_path = out / f"component_{i + 1:02d}.csv"
        np.savetxt(grid_path, image, delimiter=",", fmt="%.17g")
        written.extend([png, grid_path])
    return written


def save_adversarial_image(
    x: FloatArray,
    y: FloatArray,
    path: str | Path,
    *,
    labels: tuple[int, int] | None = None,
) -> Path:
    """Original, scaled difference and adversarial side by side."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    shape = _image_shape(x.shape[0])
    diff = y - x
    scale = float(np.max(np.abs(diff))) or 1.0
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    titles = ("original", f"difference (x{1.0 / scale:.3g})", "adversarial")
    if labels is not None:
        titles = (f"original: class {labels[0]}", titles[1], f"adversarial: class {labels[1]}")
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 3, figsize=(9, 3))
        axes[0].imshow(x.reshape(shape), cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
        axes[1].imshow((diff / scale).reshape(shape), cmap="RdBu_r", vmin=-1.0, vmax=1.0, interpolation="nearest")
        axes[2].imshow(y.reshape(shape), cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
        for ax, text in zip(axes, titles):
            ax.set_title(text, fontsize=9)
            ax.axis("off")
        fig.savefig(p, dpi=100, bbox_inches="tight", metadata={"Software": None})
        plt.close(fig)
    return p
