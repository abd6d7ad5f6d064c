"""Re-run the MNIST experiments end to end.

Trains the unrestricted and the k=2 / k=6 networks, verifies the walkthrough
samples (first correctly classified "9" at k=2, first "1" at k=6), and runs
the accuracy sweep. Every step writes its own manifest under ``--out``.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path
import sys

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from tads_verifier.config import load_run_config
from tads_verifier.orchestrator import VerificationRunner

WALKTHROUGHS = (
    # (k, digit, delta)
    (2, 9, 0.3),
    (6, 1, 0.3),
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default=None)
    parser.add_argument("--out", type=Path, default=ROOT / "reports" / "repro")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--skip-sweep", action="store_true")
    args = parser.parse_args()

    results: dict[str, object] = {}
    base = {"data_dir": args.data_dir, "seed": args.seed, "threads": 1}

    runner = VerificationRunner(load_run_config(overrides={**base, "out_dir": str(args.out / "reference")}))
    results["reference"] = runner.train().summary

    for k, digit, delta in WALKTHROUGHS:
        out = args.out / f"k{k}"
        overrides = {
            **base,
            "out_dir": str(out),
            "verify.mode": "pca_trained",
            "verify.k": k,
            "verify.delta": delta,
            "verify.digit": digit,
        }
        runner = VerificationRunner(load_run_config(overrides=overrides))
        trained = runner.train(k)
        verdict = runner.verify(trained.outputs["weights"], pca_path=out / f"pca_k{k}.json")
        results[f"k{k}"] = {"train": trained.summary, "verify": verdict.summary}

    if not args.skip_sweep:
        runner = VerificationRunner(load_run_config(overrides={**base, "out_dir": str(args.out / "sweep")}))
        results["sweep"] = runner.sweep().summary

    print(json.dumps(results, ensure_ascii=False, indent=2, default=str))


if __name__ == "__main__":
    main()
