from __future__ import annotations

import argparse
from dataclasses import asdict
import json
from pathlib import Path
import sys

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from tads_verifier.eval import QualityThresholds, load_sweep_metrics, quality_gate


def main() -> None:
    parser = argparse.ArgumentParser(description="Check a sweep report against the accuracy bands")
    parser.add_argument("metrics", type=Path, nargs="?", default=ROOT / "reports" / "sweep" / "sweep_metrics.json")
    args = parser.parse_args()

    metrics = load_sweep_metrics(args.metrics)
    thresholds = QualityThresholds()
    passed, failures = quality_gate(metrics, thresholds)

    payload = {
        "metrics": {
            "reference_accuracy": metrics.reference_accuracy,
            "points": [{"k": r.k, "variant": r.variant, "accuracy": r.accuracy} for r in metrics.rows],
        },
        "thresholds": asdict(thresholds),
        "passed": passed,
        "failures": failures,
    }
    print(json.dumps(payload, ensure_ascii=False, indent=2))
    if not passed:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
