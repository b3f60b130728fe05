"""Report records and their CSV / JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from .core import Verdict, fmt_point

HEADER = ("analysis", "sequence", "candidate", "r", "epsilon", "n", "ratio", "verdict", "evidence")
VERDICT_LITERALS = frozenset(v.value for v in Verdict)


def fmt_num(x) -> str:
    """Nine significant digits; empty for ``None``."""
    if x is None:
        return ""
    x = float(x)
    if x == 0:
        return "0"
    return f"{x:.9g}"


@dataclass(frozen=True)
class ReportRow:
    analysis: str
    sequence: str
    candidate: Optional[tuple]
    r: Optional[float]
    epsilon: Optional[float]
    n: int
    ratio: Optional[float]
    verdict: str
    evidence: str = ""

    def __post_init__(self):
        verdict = self.verdict.value if isinstance(self.verdict, Verdict) else str(self.verdict)
        object.__setattr__(self, "verdict", verdict)
        if verdict not in VERDICT_LITERALS:
            raise ValueError(f"verdict must be one of {sorted(VERDICT_LITERALS)}, got {verdict!r}")
        if self.ratio is not None and not (0.0 <= self.ratio <= 1.0 and math.isfinite(self.ratio)):
            raise ValueError(f"ratio must lie in [0, 1], got {self.ratio}")

    def cells(self) -> list:
        return [
            self.analysis,
            self.sequence,
            fmt_point(self.candidate) if self.candidate is not None else "",
            fmt_num(self.r),
            fmt_num(self.epsilon),
            str(int(self.n)),
            fmt_num(self.ratio),
            self.verdict,
            self.evidence,
        ]

    def record(self) -> dict:
        d = asdict(self)
        d["candidate"] = list(self.candidate) if self.candidate is not None else None
        return d


def to_csv(rows: Iterable[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for row in rows:
        w.writerow(row.cells())
    return buf.getvalue()


def to_json(rows: Iterable[ReportRow]) -> str:
    return json.dumps([r.record() for r in rows], indent=2, sort_keys=True) + "\n"


def read_csv(text: str) -> list:
    """Parse CSV text written by :func:`to_csv` into dicts keyed by the header."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != HEADER:
        raise ValueError(f"unexpected header {reader.fieldnames}")
    return list(reader)


def write_report(rows, path, fmt: str = "csv") -> None:
    text = to_json(rows) if fmt == "json" else to_csv(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
