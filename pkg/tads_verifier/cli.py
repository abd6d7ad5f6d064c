"""Command-line entry point.

Exit codes:

    0  success, or the query is robust
    1  not robust (an adversarial example within epsilon was found)
    2  usage or configuration error (bad flags, missing files, malformed data)
    3  training diverged
    4  indeterminate verdict
    5  robust on the searched PCA subspace only (pca_heuristic)
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path
import sys
from typing import Any, Sequence

from .config import load_run_config
from .models import VerifyMode
from .nn import TrainingDivergedError
from .orchestrator import EXIT_CODES, RunOutcome, VerificationRunner
from .validators import (
    ValidationError,
    validate_existing_file,
    validate_k_list,
    validate_layer_widths,
    validate_point,
    validate_threads,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def _add_global_flags(parser: argparse.ArgumentParser, default: Any = None) -> None:
    parser.add_argument("--config", type=Path, default=default, help="TOML run configuration")
    parser.add_argument("--seed", type=int, default=default, help="Random seed for training and PCA checks")
    parser.add_argument("--threads", type=int, default=default, help="Worker threads; 1 gives reproducible output")
    parser.add_argument("--out", default=default, help="Output directory")
    parser.add_argument("--data-dir", default=default, help="Directory holding the MNIST IDX files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tads-verifier", description="Exact robustness verification of ReLU networks")
    _add_global_flags(parser)
    # global flags also parse after the subcommand without resetting a value given before it
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="Train a ReLU classifier, optionally through a frozen PCA encoder")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--pca", type=Path, default=None, help="Fitted PCA JSON (fit on the fly otherwise)")
    p.add_argument("--layers", default=None, help="Hidden widths, e.g. 10,10,10,10,10")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default=None)

    p = sub.add_parser("pca", parents=[common], help="Fit PCA on the training images and dump components")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--components", type=int, default=None, help="Number of component images to write")
    p.add_argument("--solver", choices=["jacobi", "lapack"], default=None)

    p = sub.add_parser("verify", parents=[common], help="Verify local robustness of one input")
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--pca", type=Path, default=None)
    p.add_argument("--mode", choices=[m.value for m in VerifyMode], default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--delta", type=float, default=None, help="Neighborhood radius in PCA space")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--point", default=None, help="Comma-separated input vector")
    p.add_argument("--sample-index", type=int, default=None)
    p.add_argument("--digit", type=int, default=None, help="Use the first correctly classified test image of this digit")
    p.add_argument("--target-label", type=int, default=None)
    p.add_argument("--no-prune", action="store_true")

    p = sub.add_parser("export", parents=[common], help="Export the classification TADS as DOT or JSON")
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--format", choices=["dot", "json"], default="json")
    p.add_argument("--center", default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--no-prune", action="store_true")

    p = sub.add_parser("plot", parents=[common], help="Render the class regions of a 2-D network around a point")
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--center", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--grid", type=int, default=None)

    p = sub.add_parser("sweep", parents=[common], help="Test accuracy against the PCA dimension k")
    p.add_argument("--ks", default=None, help="Comma-separated k values")
    p.add_argument("--variants", default=None, help="Comma-separated: trained,builtin")
    p.add_argument("--epochs", type=int, default=None)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {
        "seed": args.seed,
        "threads": validate_threads(args.threads),
        "out_dir": args.out,
        "data_dir": args.data_dir,
    }
    cmd = args.command
    if cmd == "train":
        out.update(
            {
                "train.layer_widths": None if args.layers is None else validate_layer_widths(args.layers),
                "train.epochs": args.epochs,
                "train.batch_size": args.batch_size,
                "train.learning_rate": args.lr,
                "train.optimizer": args.optimizer,
            }
        )
    elif cmd == "pca":
        out.update({"pca.k": args.k, "pca.dump_components": args.components, "pca.solver": args.solver})
    elif cmd == "verify":
        out.update(
            {
                "verify.mode": args.mode,
                "verify.epsilon": args.epsilon,
                "verify.delta": args.delta,
                "verify.k": args.k,
                "verify.sample_index": args.sample_index,
                "verify.digit": args.digit,
                "verify.target_label": args.target_label,
                "verify.prune": False if args.no_prune else None,
            }
        )
    elif cmd == "export":
        out["verify.prune"] = False if args.no_prune else None
    elif cmd == "plot":
        out["verify.grid"] = args.grid
    elif cmd == "sweep":
        out.update(
            {
                "sweep.ks": None if args.ks is None else validate_k_list(args.ks),
                "sweep.variants": None
                if args.variants is None
                else tuple(v.strip() for v in args.variants.split(",") if v.strip()),
                "train.epochs": args.epochs,
            }
        )
    return out


def _dispatch(runner: VerificationRunner, args: argparse.Namespace) -> RunOutcome:
    cmd = args.command
    if cmd == "train":
        pca = None if args.pca is None else validate_existing_file(args.pca, "PCA file")
        return runner.train(args.k, pca)
    if cmd == "pca":
        return runner.fit_pca()
    if cmd == "verify":
        weights = validate_existing_file(args.weights, "weights file")
        pca = None if args.pca is None else validate_existing_file(args.pca, "PCA file")
        point = None if args.point is None else validate_point(args.point)
        return runner.verify(weights, pca_path=pca, point=point)
    if cmd == "export":
        weights = validate_existing_file(args.weights, "weights file")
        center = None if args.center is None else validate_point(args.center)
        if (center is None) != (args.radius is None):
            raise ValidationError("--center and --radius must be given together")
        return runner.export(weights, args.format, center=center, radius=args.radius)
    if cmd == "plot":
        weights = validate_existing_file(args.weights, "weights file")
        return runner.plot(weights, validate_point(args.center), args.radius)
    return runner.sweep()


def _exit_code(outcome: RunOutcome) -> int:
    if outcome.verdict is None:
        return EXIT_OK
    return EXIT_CODES[outcome.verdict.status]


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    runner: VerificationRunner | None = None
    try:
        config = load_run_config(args.config, _overrides(args))
        runner = VerificationRunner(config)
        runner.start(args.command)
        outcome = _dispatch(runner, args)
    # ValueError also covers pydantic validation and the IDX, weight and TADS format errors.
    except (ValidationError, FileNotFoundError, ValueError) as exc:
        if runner is not None:
            runner.fail(args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        if runner is not None:
            runner.fail(args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    payload = {
        "command": outcome.command,
        "summary": outcome.summary,
        "outputs": {name: str(path) for name, path in outcome.outputs.items()},
    }
    print(json.dumps(payload, ensure_ascii=False, indent=2, default=str))
    return _exit_code(outcome)


if __name__ == "__main__":
    raise SystemExit(main())
