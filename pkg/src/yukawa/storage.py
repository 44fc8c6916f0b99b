"""Writers for run artifacts: JSON reports, CSV tables and the run log."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from yukawa.constants import FLOAT_SIGNIFICANT_DIGITS

STDOUT_PATH = "-"


def format_float(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, f".{FLOAT_SIGNIFICANT_DIGITS}g")


def normalize(value: Any) -> Any:
    """Round floats to the output precision so that JSON and CSV agree."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if not math.isfinite(number):
            return format_float(number)
        return float(format_float(number))
    if isinstance(value, np.ndarray):
        return [normalize(item) for item in value.tolist()]
    if isinstance(value, dict):
        return {str(key): normalize(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalize(item) for item in value]
    return value


def _open_target(path: str | Path):
    if str(path) == STDOUT_PATH:
        return None
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    return target.open("w", encoding="utf-8", newline="")


def write_json(path: str | Path, payload: dict[str, Any]) -> None:
    text = json.dumps(normalize(payload), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    handle = _open_target(path)
    if handle is None:
        sys.stdout.write(text)
        return
    with handle as fh:
        fh.write(text)


def csv_text(columns: Sequence[str], rows: Iterable[dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _cell(row.get(key, "")) for key in columns})
    return buffer.getvalue()


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[dict[str, Any]]) -> None:
    text = csv_text(columns, rows)
    handle = _open_target(path)
    if handle is None:
        sys.stdout.write(text)
        return
    with handle as fh:
        fh.write(text)


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def append_log(path: Path, message: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with path.open("a", encoding="utf-8") as fh:
        fh.write(f"{stamp} {message.rstrip()}\n")
