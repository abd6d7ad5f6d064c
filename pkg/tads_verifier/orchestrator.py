from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
import json
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .affine import FloatArray, Polytope
from .audit import AuditEvent, AuditLogger
from .config import RunConfig
from .eval import SweepMetrics, accuracy, run_accuracy_sweep, save_sweep_report
from .loaders import (
    git_blob_sha1,
    load_mnist,
    load_pca,
    load_weights,
    save_pca,
    save_tads,
    save_weights,
)
from .models import RobustnessQuery, RobustnessVerdict, VerdictStatus, VerifyMode
from .nn import EpochReport, LabeledDataset, Plnn, Split, classify, label_to_class, train
from .pca import PcaModel, neighborhood_bound, pca_fit, transfer_epsilon
from .plotting import Mark, render_region_plot, save_adversarial_image, save_component_images
from .tads import Tads, tads_size
from .validators import ValidationError, validate_data_dir, validate_epsilon, validate_k, validate_label
from .verify import classifier_tads, verdict_to_dict, verify


@dataclass
class RunOutcome:
    command: str
    outputs: dict[str, Path] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)
    verdict: RobustnessVerdict | None = None


def _is_image(n: int) -> bool:
    side = int(round(np.sqrt(n)))
    return side * side == n and n >= 16


def select_sample(net: Any, data: LabeledDataset, digit: int) -> int:
    """Index of the first test image of ``digit`` that ``net`` classifies correctly."""
    for i in np.flatnonzero(data.labels == digit):
        if classify(net, data.inputs[i]) == label_to_class(digit):
            return int(i)
    raise ValidationError(f"no correctly classified test image of digit {digit}")


class VerificationRunner:
    """Executes CLI commands against one run configuration and records manifests."""

    def __init__(self, config: RunConfig, audit_log_path: str | Path | None = None) -> None:
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.audit = AuditLogger(audit_log_path or self.out_dir / "audit_log.jsonl", reproducible=config.reproducible)
        self._datasets: dict[Split, LabeledDataset] = {}

    def dataset(self, split: Split) -> LabeledDataset:
        if split not in self._datasets:
            self._datasets[split] = load_mnist(validate_data_dir(self.config.resolved_data_dir()), split)
        return self._datasets[split]

    def write_manifest(
        self,
        command: str,
        inputs: dict[str, Path | None],
        outputs: dict[str, Path],
        extra: dict[str, Any] | None = None,
    ) -> Path:
        payload = {
            "command": command,
            "version": __version__,
            "created_at": None if self.config.reproducible else datetime.now(timezone.utc).isoformat(),
            "config": self.config.model_dump(mode="json"),
            "inputs": {
                name: {"path": str(p), "sha1": git_blob_sha1(p)}
                for name, p in sorted(inputs.items())
                if p is not None
            },
            "outputs": {name: str(p) for name, p in sorted(outputs.items())},
            **(extra or {}),
        }
        path = self.out_dir / f"manifest_{command}.json"
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        return path

    def _mnist_inputs(self) -> dict[str, Path | None]:
        root = self.config.resolved_data_dir()
        return {p.name: p for p in sorted(root.glob("*-ubyte*"))}

    def start(self, command: str) -> None:
        self.audit.write(
            AuditEvent.RUN_START,
            {"command": command, "seed": self.config.seed, "threads": self.config.threads},
        )

    def fail(self, command: str, exc: BaseException) -> None:
        self.audit.write(AuditEvent.RUN_FAILED, {"command": command, "error": f"{type(exc).__name__}: {exc}"})

    def _pca(self, pca_path: Path | None, k: int) -> tuple[PcaModel, Path | None]:
        if pca_path is not None:
            model = load_pca(pca_path)
            validate_k(k, model.stored)
            return model, pca_path
        model = pca_fit(self.dataset(Split.TRAIN).inputs, k, self.config.pca)
        return model, None

    def fit_pca(self, k: int | None = None, dump_components: int | None = None) -> RunOutcome:
        k = k or self.config.pca.k
        train_data = self.dataset(Split.TRAIN)
        validate_k(k, train_data.dim)
        model = pca_fit(train_data.inputs, k, self.config.pca)
        path = save_pca(model, self.out_dir / f"pca_k{k}.json")
        dump = self.config.pca.dump_components if dump_components is None else dump_components
        images = save_component_images(model, min(dump, k), self.out_dir / "components") if dump else []
        bound = neighborhood_bound(model, k)
        summary = {
            "k": k,
            "bound": bound,
            "eigenvalues": model.eigenvalues.tolist(),
            "near_ties": list(model.near_ties),
            "components_written": len(images),
        }
        self.audit.write(AuditEvent.PCA_FIT, summary)
        outputs = {"pca": path}
        outputs["manifest"] = self.write_manifest("pca", self._mnist_inputs(), outputs)
        return RunOutcome("pca", outputs, summary)

    def train(self, k: int | None = None, pca_path: Path | None = None) -> RunOutcome:
        cfg = self.config.train.model_copy(update={"seed": self.config.seed})
        train_data = self.dataset(Split.TRAIN)
        test_data = self.dataset(Split.TEST)
        encoder = None
        used_pca: Path | None = None
        if k is not None:
            model, used_pca = self._pca(pca_path, k)
            if used_pca is None:
                used_pca = save_pca(model, self.out_dir / f"pca_k{k}.json")
            encoder = model.encoder(k)

        def log_epoch(report: EpochReport) -> None:
            self.audit.write(
                AuditEvent.TRAIN_EPOCH,
                {"epoch": report.epoch, "mean_loss": report.mean_loss, "train_accuracy": report.train_accuracy},
            )

        net = train(train_data, cfg, encoder, on_epoch=log_epoch)
        deployed = net if encoder is None else net.precompose(encoder)
        test_acc = accuracy(deployed, test_data)
        name = "weights.json" if k is None else f"weights_k{k}.json"
        weights_path = save_weights(net, self.out_dir / name)
        acc_path = self.out_dir / (name.replace("weights", "accuracy"))
        summary = {
            "k": k,
            "layer_widths": list(cfg.layer_widths),
            "epochs": cfg.epochs,
            "seed": cfg.seed,
            "test_accuracy": test_acc,
        }
        acc_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        self.audit.write(AuditEvent.TRAIN_DONE, summary)
        outputs = {"weights": weights_path, "accuracy": acc_path}
        inputs = {**self._mnist_inputs(), "pca": used_pca}
        outputs["manifest"] = self.write_manifest("train", inputs, outputs)
        return RunOutcome("train", outputs, summary)

    def resolve_point(
        self,
        point: tuple[float, ...] | None,
        sample_index: int | None,
        digit: int | None,
        selector_net: Any,
    ) -> tuple[FloatArray, int | None]:
        if point is not None:
            return np.asarray(point, dtype=np.float64), None
        test_data = self.dataset(Split.TEST)
        if sample_index is None:
            if digit is None:
                raise ValidationError("verify needs --point, --sample-index or --digit")
            sample_index = select_sample(selector_net, test_data, digit)
        if not 0 <= sample_index < len(test_data):
            raise ValidationError(f"sample index {sample_index} outside 0..{len(test_data) - 1}")
        return test_data.inputs[sample_index], sample_index

    def verify(
        self,
        weights_path: Path,
        *,
        pca_path: Path | None = None,
        point: tuple[float, ...] | None = None,
    ) -> RunOutcome:
        vs = self.config.verify
        net = load_weights(weights_path)
        mode = vs.mode
        k = vs.k
        model: PcaModel | None = None
        if mode.needs_pca:
            k = validate_k(k)
            model, pca_path = self._pca(pca_path, k)

        deployed: Any = net
        if mode == VerifyMode.PCA_TRAINED:
            assert model is not None and k is not None
            deployed = net.precompose(model.encoder(k))
        elif mode == VerifyMode.PCA_BUILTIN:
            assert model is not None and k is not None
            deployed = net.precompose(model.projector(k))
        x, sample_index = self.resolve_point(point, vs.sample_index, vs.digit, deployed)

        epsilon = vs.epsilon
        if vs.delta is not None:
            if mode not in (VerifyMode.PCA_BUILTIN, VerifyMode.PCA_TRAINED):
                raise ValidationError("--delta only applies to pca_builtin and pca_trained")
            assert model is not None and k is not None
            epsilon = transfer_epsilon(model, k, vs.delta)
        if epsilon is None:
            raise ValidationError("verify needs --epsilon (or --delta for reduced modes)")
        epsilon = validate_epsilon(epsilon)
        if vs.target_label is not None:
            validate_label(vs.target_label, net.output_dim)

        query = RobustnessQuery(x, epsilon, mode, vs.target_label, k)
        verdict = verify(
            net,
            query,
            model,
            settings=self.config.lp,
            threads=self.config.resolved_threads(),
            prune=vs.prune,
        )
        verdict_path = self.out_dir / "verdict.json"
        verdict_path.write_text(json.dumps(verdict_to_dict(verdict), indent=2) + "\n", encoding="utf-8")
        outputs = {"verdict": verdict_path}
        closest = verdict.closest_adversarial
        if closest is not None and _is_image(x.shape[0]):
            outputs["adversarial_image"] = save_adversarial_image(
                x, closest.point, self.out_dir / "adversarial.png", labels=(verdict.target_label, closest.label)
            )
        summary = {**verdict.summary(), "sample_index": sample_index, "delta": verdict.delta}
        self.audit.write(AuditEvent.VERIFY_DONE, {**summary, "notes": verdict.notes})
        inputs: dict[str, Path | None] = {"weights": weights_path, "pca": pca_path}
        outputs["manifest"] = self.write_manifest("verify", inputs, outputs, {"sample_index": sample_index})
        return RunOutcome("verify", outputs, summary, verdict)

    def _region_tads(self, net: Plnn, center: FloatArray | None, radius: float | None) -> tuple[Tads, Polytope | None]:
        region = None
        if center is not None and radius is not None:
            region = Polytope.box(center, radius)
        return classifier_tads(net, region, prune=self.config.verify.prune, settings=self.config.lp), region

    def export(
        self,
        weights_path: Path,
        fmt: str,
        *,
        center: tuple[float, ...] | None = None,
        radius: float | None = None,
    ) -> RunOutcome:
        net = load_weights(weights_path)
        c = None if center is None else np.asarray(center, dtype=np.float64)
        t, _ = self._region_tads(net, c, radius)
        path = save_tads(t, self.out_dir / f"tads.{fmt}", fmt)
        inner, terminals = tads_size(t)
        summary = {"format": fmt, "inner": inner, "terminals": terminals}
        self.audit.write(AuditEvent.EXPORT_DONE, summary)
        outputs = {"tads": path}
        outputs["manifest"] = self.write_manifest("export", {"weights": weights_path}, outputs)
        return RunOutcome("export", outputs, summary)

    def plot(
        self,
        weights_path: Path,
        center: tuple[float, ...],
        radius: float,
        *,
        marks: tuple[Mark, ...] = (),
    ) -> RunOutcome:
        net = load_weights(weights_path)
        c = np.asarray(center, dtype=np.float64)
        t, region = self._region_tads(net, c, radius)
        assert region is not None
        all_marks = (Mark(c, "x"),) + marks
        rendered = render_region_plot(t, region, all_marks, grid=self.config.verify.grid, settings=self.config.lp)
        svg_path = self.out_dir / "regions.svg"
        csv_path = self.out_dir / "regions.csv"
        svg_path.write_bytes(rendered.svg)
        csv_path.write_text(rendered.csv, encoding="utf-8")
        summary = {"grid": self.config.verify.grid, "classes": sorted(int(v) for v in np.unique(rendered.labels))}
        self.audit.write(AuditEvent.PLOT_DONE, summary)
        outputs = {"svg": svg_path, "csv": csv_path}
        outputs["manifest"] = self.write_manifest("plot", {"weights": weights_path}, outputs)
        return RunOutcome("plot", outputs, summary)

    def sweep(self) -> RunOutcome:
        cfg = self.config.train.model_copy(update={"seed": self.config.seed})
        train_data = self.dataset(Split.TRAIN)
        test_data = self.dataset(Split.TEST)

        def log_point(row: Any) -> None:
            self.audit.write(AuditEvent.SWEEP_POINT, {"k": row.k, "variant": row.variant, "accuracy": row.accuracy})

        metrics: SweepMetrics = run_accuracy_sweep(
            train_data,
            test_data,
            self.config.sweep.ks,
            self.config.sweep.variants,
            cfg,
            self.config.pca,
            on_point=log_point,
        )
        json_path, csv_path = save_sweep_report(metrics, self.out_dir)
        outputs = {"metrics": json_path, "csv": csv_path}
        outputs["manifest"] = self.write_manifest("sweep", self._mnist_inputs(), outputs)
        summary = {
            "reference_accuracy": metrics.reference_accuracy,
            "points": [{"k": r.k, "variant": r.variant, "accuracy": r.accuracy} for r in metrics.rows],
        }
        return RunOutcome("sweep", outputs, summary)


EXIT_CODES = {
    VerdictStatus.ROBUST: 0,
    VerdictStatus.NOT_ROBUST: 1,
    VerdictStatus.INDETERMINATE: 4,
    VerdictStatus.ROBUST_ON_SUBSPACE: 5,
}
