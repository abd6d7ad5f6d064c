from __future__ import annotations

from datetime import datetime, timezone
from enum import Enum
import json
from pathlib import Path
from typing import Any

from .sanitizer import SanitizerConfig, compact_payload


class AuditEvent(str, Enum):
    RUN_START = "run_start"
    TRAIN_EPOCH = "train_epoch"
    TRAIN_DONE = "train_done"
    PCA_FIT = "pca_fit"
    VERIFY_DONE = "verify_done"
    EXPORT_DONE = "export_done"
    PLOT_DONE = "plot_done"
    SWEEP_POINT = "sweep_point"
    RUN_FAILED = "run_failed"


class AuditLogger:
    """Append-only JSONL run log.

    With ``reproducible=True`` the timestamp is written as null so that two
    single-threaded runs with the same seed produce identical logs.
    """

    def __init__(
        self,
        log_path: str | Path = "reports/audit_log.jsonl",
        sanitizer_config: SanitizerConfig | None = None,
        reproducible: bool = False,
    ) -> None:
        self._log_path = Path(log_path)
        self._log_path.parent.mkdir(parents=True, exist_ok=True)
        self._sanitizer_config = sanitizer_config or SanitizerConfig()
        self._reproducible = reproducible

    def write(self, event_type: AuditEvent | str, payload: dict[str, Any]) -> dict[str, Any]:
        event = AuditEvent(event_type)
        record = {
            "timestamp": None if self._reproducible else datetime.now(timezone.utc).isoformat(),
            "event_type": event.value,
            "payload": compact_payload(payload, self._sanitizer_config),
        }
        with self._log_path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
        return record

    @property
    def log_path(self) -> Path:
        return self._log_path


def read_events(log_path: str | Path, event_type: AuditEvent | str | None = None) -> list[dict[str, Any]]:
    path = Path(log_path)
    if not path.exists():
        return []
    wanted = None if event_type is None else AuditEvent(event_type).value
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    return [r for r in records if wanted is None or r["event_type"] == wanted]
