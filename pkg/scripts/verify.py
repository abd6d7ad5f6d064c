"""Byte-compile tads_verifier/, tests/ and scripts/, then run the pytest suite under tests/.

By default tests marked ``slow`` are skipped. ``--all`` runs them too; the
``mnist`` tests among them still skip unless ``TADS_DATA_DIR`` points at the
MNIST IDX files. ``--mnist-only`` runs just the ``mnist`` tests and fails
early when the data directory is not set.
"""

from __future__ import annotations

import argparse
import os
from pathlib import Path
import subprocess
import sys


ROOT = Path(__file__).resolve().parents[1]
DATA_DIR_ENV = "TADS_DATA_DIR"


def _run_step(args: list[str], label: str) -> None:
    print(f"[verify] {label}: {' '.join(args)}")
    completed = subprocess.run(args, cwd=ROOT, check=False)
    if completed.returncode != 0:
        raise SystemExit(completed.returncode)


def main() -> None:
    parser = argparse.ArgumentParser(description="Syntax check and test run for tads-verifier")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--all", action="store_true", help="Include tests marked slow")
    group.add_argument("--mnist-only", action="store_true", help="Run only tests marked mnist")
    args = parser.parse_args()

    if args.mnist_only and not os.getenv(DATA_DIR_ENV):
        raise SystemExit(f"[verify] {DATA_DIR_ENV} is not set; the mnist tests would all skip")

    _run_step([sys.executable, "-m", "compileall", "-q", "tads_verifier", "tests", "scripts"], "syntax")
    marker = "mnist" if args.mnist_only else (None if args.all else "not slow")
    pytest_args = [sys.executable, "-m", "pytest", "tests"]
    if marker is not None:
        pytest_args += ["-m", marker]
    _run_step(pytest_args, "tests")
    print("[verify] all checks passed")


if __name__ == "__main__":
    main()
