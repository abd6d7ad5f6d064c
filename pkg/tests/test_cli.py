import json
from pathlib import Path

import numpy as np
import pytest

from tads_verifier import cli
from tads_verifier.affine import AffineFunction
from tads_verifier.audit import AuditEvent, read_events
from tads_verifier.loaders import load_tads, save_pca, save_weights
from tads_verifier.nn import Plnn, TrainingDivergedError
from tads_verifier.pca import PcaModel


def _identity_weights(tmp_path: Path) -> Path:
    return save_weights(Plnn((AffineFunction.identity(2),)), tmp_path / "weights.json")


def _identity_pca(tmp_path: Path) -> Path:
    model = PcaModel(mean=np.zeros(2), components=np.eye(2), eigenvalues=np.array([2.0, 1.0]))
    return save_pca(model, tmp_path / "pca.json")


def _run(tmp_path: Path, *args: str) -> int:
    return cli.main(["--out", str(tmp_path / "out"), "--threads", "1", *args])


def _verdict(tmp_path: Path) -> dict:
    return json.loads((tmp_path / "out" / "verdict.json").read_text(encoding="utf-8"))


def test_verify_robust_point_exits_zero(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code = _run(tmp_path, "verify", "--weights", str(_identity_weights(tmp_path)), "--point", "2,0", "--epsilon", "0.5")
    assert code == 0
    assert _verdict(tmp_path)["status"] == "robust"
    printed = json.loads(capsys.readouterr().out)
    assert printed["command"] == "verify"
    assert printed["summary"]["status"] == "robust"

    manifest = json.loads((tmp_path / "out" / "manifest_verify.json").read_text(encoding="utf-8"))
    assert manifest["created_at"] is None
    assert manifest["inputs"]["weights"]["sha1"]
    records = read_events(tmp_path / "out" / "audit_log.jsonl")
    assert [r["event_type"] for r in records] == ["run_start", "verify_done"]
    assert all(r["timestamp"] is None for r in records)


def test_verify_not_robust_exits_one(tmp_path: Path) -> None:
    code = _run(tmp_path, "verify", "--weights", str(_identity_weights(tmp_path)), "--point", "0.3,0", "--epsilon", "0.5")
    assert code == 1
    verdict = _verdict(tmp_path)
    assert verdict["closest"]["distance"] == pytest.approx(0.15, abs=1e-6)
    assert not (tmp_path / "out" / "adversarial.png").exists()


def test_heuristic_mode_exits_five(tmp_path: Path) -> None:
    code = _run(
        tmp_path,
        "verify",
        "--weights",
        str(_identity_weights(tmp_path)),
        "--pca",
        str(_identity_pca(tmp_path)),
        "--mode",
        "pca_heuristic",
        "--k",
        "1",
        "--point",
        "2,0",
        "--epsilon",
        "0.5",
    )
    assert code == 5
    assert _verdict(tmp_path)["status"] == "robust_on_subspace"


def test_builtin_mode_takes_delta(tmp_path: Path) -> None:
    code = _run(
        tmp_path,
        "verify",
        "--weights",
        str(_identity_weights(tmp_path)),
        "--pca",
        str(_identity_pca(tmp_path)),
        "--mode",
        "pca_builtin",
        "--k",
        "2",
        "--point",
        "2,0",
        "--delta",
        "0.5",
    )
    assert code == 0
    verdict = _verdict(tmp_path)
    assert verdict["epsilon"] == pytest.approx(0.5)
    assert verdict["delta"] == pytest.approx(0.5)
    assert verdict["reduced_status"] == "robust"


def test_reduced_counterexample_outside_ball_exits_four(tmp_path: Path) -> None:
    model = PcaModel(mean=np.zeros(2), components=np.array([[0.8, 0.6], [-0.6, 0.8]]), eigenvalues=np.array([2.0, 1.0]))
    pca = save_pca(model, tmp_path / "pca.json")
    weights = save_weights(Plnn((AffineFunction([[1.0], [0.0]], [0.0, 0.0]),)), tmp_path / "net_t.json")
    code = _run(
        tmp_path,
        "verify",
        "--weights",
        str(weights),
        "--pca",
        str(pca),
        "--mode",
        "pca_trained",
        "--k",
        "1",
        "--point",
        "0.4,0.3",
        "--epsilon",
        "0.38",
    )
    assert code == 4
    verdict = _verdict(tmp_path)
    assert verdict["status"] == "indeterminate"
    assert verdict["reduced_status"] == "not_robust"


def test_usage_errors_exit_two(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    weights = str(_identity_weights(tmp_path))
    assert _run(tmp_path, "verify", "--weights", str(tmp_path / "missing.json"), "--point", "0,0", "--epsilon", "0.1") == 2
    assert _run(tmp_path, "verify", "--weights", weights, "--point", "0,x", "--epsilon", "0.1") == 2
    assert _run(tmp_path, "verify", "--weights", weights, "--point", "0,0,0", "--epsilon", "0.1") == 2
    assert _run(tmp_path, "verify", "--weights", weights, "--point", "0,0", "--epsilon", "-1") == 2
    assert _run(tmp_path, "verify", "--weights", weights, "--mode", "pca_trained", "--point", "0,0", "--epsilon", "0.1") == 2
    assert _run(tmp_path, "--threads", "0", "verify", "--weights", weights, "--point", "0,0", "--epsilon", "0.1") == 2

    broken = tmp_path / "broken.json"
    broken.write_text('{"layers": []}', encoding="utf-8")
    assert _run(tmp_path, "verify", "--weights", str(broken), "--point", "0,0", "--epsilon", "0.1") == 2

    monkeypatch.delenv("TADS_DATA_DIR", raising=False)
    assert _run(tmp_path, "pca", "--k", "2") == 2
    assert _run(tmp_path, "--data-dir", str(tmp_path / "absent"), "pca") == 2
    assert _run(tmp_path, "--config", str(tmp_path / "none.toml"), "sweep") == 2


def test_bad_flags_exit_two(tmp_path: Path) -> None:
    with pytest.raises(SystemExit) as info:
        cli.main(["verify"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["verify", "--weights", "w.json", "--mode", "fuzzy"])
    assert info.value.code == 2


def test_failed_runs_are_audited(tmp_path: Path) -> None:
    _run(tmp_path, "verify", "--weights", str(tmp_path / "missing.json"), "--point", "0,0", "--epsilon", "0.1")
    failures = read_events(tmp_path / "out" / "audit_log.jsonl", AuditEvent.RUN_FAILED)
    assert len(failures) == 1
    last = failures[0]
    assert "missing.json" in last["payload"]["error"]


def test_divergence_exits_three(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    def diverge(self: object, k: object = None, pca_path: object = None) -> None:
        raise TrainingDivergedError("non-finite loss nan at epoch 1, batch 0", epoch=1, batch=0, loss=float("nan"))

    monkeypatch.setattr(cli.VerificationRunner, "train", diverge)
    assert _run(tmp_path, "train", "--epochs", "1") == 3


def test_export_json_and_dot(tmp_path: Path) -> None:
    weights = str(_identity_weights(tmp_path))
    assert _run(tmp_path, "export", "--weights", weights, "--format", "json", "--center", "0,0", "--radius", "1") == 0
    t = load_tads(tmp_path / "out" / "tads.json")
    assert t.input_dim == 2
    assert t.domain is not None

    assert _run(tmp_path, "export", "--weights", weights, "--format", "dot") == 0
    dot = (tmp_path / "out" / "tads.dot").read_text(encoding="utf-8")
    assert dot.startswith("digraph tads {")
    assert _run(tmp_path, "export", "--weights", weights, "--center", "0,0") == 2


def test_plot_writes_svg_and_csv(tmp_path: Path) -> None:
    weights = str(_identity_weights(tmp_path))
    assert _run(tmp_path, "plot", "--weights", weights, "--center", "0.3,0", "--radius", "0.5", "--grid", "32") == 0
    assert (tmp_path / "out" / "regions.svg").read_bytes().lstrip().startswith(b"<?xml")
    csv_lines = (tmp_path / "out" / "regions.csv").read_text(encoding="utf-8").splitlines()
    assert csv_lines[0] == "region,label,w1,w2,offset,strict"
    assert len(csv_lines) > 1


def test_global_flags_parse_after_the_subcommand() -> None:
    parser = cli.build_parser()
    args = parser.parse_args(
        ["train", "--k", "2", "--layers", "10,10,10,10,10", "--epochs", "5", "--seed", "0", "--out", "runs/k2"]
    )
    assert args.seed == 0
    assert args.out == "runs/k2"
    assert args.threads is None
    assert args.config is None

    before = parser.parse_args(["--seed", "4", "--threads", "1", "pca", "--k", "3"])
    assert (before.seed, before.threads, before.k) == (4, 1, 3)
    mixed = parser.parse_args(["--seed", "4", "verify", "--weights", "w.json", "--threads", "2"])
    assert (mixed.seed, mixed.threads) == (4, 2)


def test_verify_with_trailing_global_flags(tmp_path: Path) -> None:
    weights = str(_identity_weights(tmp_path))
    out = tmp_path / "trailing"
    code = cli.main(
        ["verify", "--weights", weights, "--point", "2,0", "--epsilon", "0.5", "--out", str(out), "--threads", "1", "--seed", "0"]
    )
    assert code == 0
    verdict = json.loads((out / "verdict.json").read_text(encoding="utf-8"))
    assert verdict["status"] == "robust"
    assert verdict["time_ms"] is None
