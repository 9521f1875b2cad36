"""Report files.  Every writer goes through a temp file and an atomic rename."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .armsrace import CSV_COLUMNS, CycleReport
from .evaluation import ToolScore

__all__ = [
    "atomic_write", "write_json", "write_csv", "cycles_rows", "write_cycles_csv",
    "SCORE_COLUMNS", "score_rows", "write_scores_csv", "text_table",
]

SCORE_COLUMNS = ("rank", "tool", "score", "feature_set", "obfuscated_features")


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, data) -> Path:
    return atomic_write(path, json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _csv_text(columns: Sequence[str], rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in columns})
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[Mapping]) -> Path:
    return atomic_write(path, _csv_text(columns, rows))


def cycles_rows(reports: Sequence[CycleReport]) -> list[dict]:
    return [r.row() for r in reports]


def write_cycles_csv(path, reports: Sequence[CycleReport]) -> Path:
    return write_csv(path, CSV_COLUMNS, cycles_rows(reports))


def _score_text(sc: ToolScore) -> str:
    return "inf" if math.isinf(sc.score) else repr(sc.score)


def score_rows(ranked: Sequence[ToolScore]) -> list[dict]:
    return [
        {
            "rank": i,
            "tool": sc.tool_id,
            "score": _score_text(sc),
            "feature_set": ";".join(sc.feature_set) if sc.feature_set is not None else "INFEASIBLE",
            "obfuscated_features": ";".join(sc.obfuscated),
        }
        for i, sc in enumerate(ranked, 1)
    ]


def write_scores_csv(path, ranked: Sequence[ToolScore]) -> Path:
    return write_csv(path, SCORE_COLUMNS, score_rows(ranked))


def text_table(columns: Sequence[str], rows: Sequence[Mapping]) -> str:
    """Fixed-width plain-text rendering; floats get 4 decimals."""
    def cell(v):
        if isinstance(v, float):
            return "inf" if math.isinf(v) else f"{v:.4f}"
        return "-" if v in ("", None) else str(v)

    body = [[cell(r[c]) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in body]) for i, c in enumerate(columns)]
    line = lambda cells: "  ".join(s.ljust(w) for s, w in zip(cells, widths)).rstrip()
    out = [line(columns), line(["-" * w for w in widths])] + [line(r) for r in body]
    return "\n".join(out) + "\n"
