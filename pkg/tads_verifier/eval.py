from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
import json
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import PcaSettings, SweepVariant, TrainConfig
from .nn import LabeledDataset, Plnn, classify_many, train
from .pca import PcaModel, pca_fit


def accuracy(net: Plnn, data: LabeledDataset) -> float:
    if len(data) == 0:
        raise ValueError("cannot measure accuracy on an empty dataset")
    return float(np.mean(classify_many(net, data.inputs) == data.labels + 1))


@dataclass
class SweepRow:
    k: int
    variant: str
    accuracy: float
    reference_accuracy: float


@dataclass
class SweepMetrics:
    reference_accuracy: float
    rows: list[SweepRow] = field(default_factory=list)

    def accuracy_at(self, k: int, variant: SweepVariant | str = SweepVariant.TRAINED) -> float | None:
        name = SweepVariant(variant).value
        for row in self.rows:
            if row.k == k and row.variant == name:
                return row.accuracy
        return None


@dataclass(frozen=True)
class QualityThresholds:
    min_reference_accuracy: float = 0.87
    k2_accuracy_band: tuple[float, float] = (0.38, 0.54)
    k6_accuracy_band: tuple[float, float] = (0.66, 0.82)
    reduction_k_max: int = 78
    min_reduced_accuracy: float = 0.86


def run_accuracy_sweep(
    train_data: LabeledDataset,
    test_data: LabeledDataset,
    ks: Sequence[int],
    variants: Sequence[SweepVariant],
    train_config: TrainConfig,
    pca_settings: PcaSettings | None = None,
    *,
    pca: PcaModel | None = None,
    reference: Plnn | None = None,
    on_point: Callable[[SweepRow], None] | None = None,
) -> SweepMetrics:
    """Test accuracy per PCA dimension for the builtin and the retrained variants."""
    if not ks:
        raise ValueError("ks must not be empty")
    if any(k < 1 or k > train_data.dim for k in ks):
        raise ValueError(f"every k must lie in 1..{train_data.dim}, got {list(ks)}")
    if pca is None or pca.stored < max(ks):
        pca = pca_fit(train_data.inputs, max(ks), pca_settings)
    if reference is None:
        reference = train(train_data, train_config)
    reference_acc = accuracy(reference, test_data)

    metrics = SweepMetrics(reference_accuracy=reference_acc)
    for k in ks:
        for variant in variants:
            if variant == SweepVariant.BUILTIN:
                deployed = reference.precompose(pca.projector(k))
            else:
                encoder = pca.encoder(k)
                deployed = train(train_data, train_config, encoder).precompose(encoder)
            row = SweepRow(k=k, variant=variant.value, accuracy=accuracy(deployed, test_data),
                           reference_accuracy=reference_acc)
            metrics.rows.append(row)
            if on_point is not None:
                on_point(row)
    return metrics


def save_sweep_report(metrics: SweepMetrics, output_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    json_path = out_dir / "sweep_metrics.json"
    csv_path = out_dir / "sweep_accuracy.csv"

    with json_path.open("w", encoding="utf-8") as f:
        json.dump(
            {
                "reference_accuracy": metrics.reference_accuracy,
                "rows": [asdict(r) for r in metrics.rows],
            },
            f,
            ensure_ascii=False,
            indent=2,
        )

    with csv_path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "variant", "accuracy", "reference_accuracy"])
        for row in metrics.rows:
            writer.writerow([row.k, row.variant, row.accuracy, row.reference_accuracy])

    return (json_path, csv_path)


def load_sweep_metrics(path: str | Path) -> SweepMetrics:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return SweepMetrics(
        reference_accuracy=float(raw["reference_accuracy"]),
        rows=[SweepRow(**row) for row in raw.get("rows", [])],
    )


def quality_gate(metrics: SweepMetrics, thresholds: QualityThresholds) -> tuple[bool, list[str]]:
    failures: list[str] = []
    if metrics.reference_accuracy < thresholds.min_reference_accuracy:
        failures.append(
            f"reference_accuracy={metrics.reference_accuracy:.3f} < {thresholds.min_reference_accuracy:.3f}"
        )
    for k, (lo, hi) in ((2, thresholds.k2_accuracy_band), (6, thresholds.k6_accuracy_band)):
        acc = metrics.accuracy_at(k)
        if acc is not None and not lo <= acc <= hi:
            failures.append(f"accuracy@k={k}={acc:.3f} outside [{lo:.2f}, {hi:.2f}]")
    reduced = [
        r.accuracy
        for r in metrics.rows
        if r.variant == SweepVariant.TRAINED.value and r.k <= thresholds.reduction_k_max
    ]
    if reduced and max(reduced) < thresholds.min_reduced_accuracy:
        failures.append(
            f"best accuracy with k<={thresholds.reduction_k_max} is {max(reduced):.3f} "
            f"< {thresholds.min_reduced_accuracy:.3f}"
        )
    return (len(failures) == 0, failures)
