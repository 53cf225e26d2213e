"""CSV and JSON report writers with byte-stable output."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

from .averaging import ReportRow

VERDICT_COLUMNS = ReportRow.COLUMNS


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows), encoding="utf-8")
    return path


def write_rows(path, rows: Iterable[ReportRow]) -> Path:
    return write_csv(path, VERDICT_COLUMNS, (r.as_list() for r in rows))


def write_json(path, doc) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def tally(verdicts: Iterable[str]) -> dict:
    """Counts of ``pass``/``fail``/skipped-like verdicts; empty verdicts are not cells."""
    out = {"cells": 0, "passed": 0, "failed": 0, "skipped": 0}
    for v in verdicts:
        if not v:
            continue
        out["cells"] += 1
        if v in ("pass", "true"):
            out["passed"] += 1
        elif v in ("fail", "false"):
            out["failed"] += 1
        else:
            out["skipped"] += 1
    return out
