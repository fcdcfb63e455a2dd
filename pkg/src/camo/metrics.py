"""Confusion-matrix accounting and the five classification metrics.

Vulnerable is the positive class and an Insecure verdict is a positive
prediction.  A ratio with a zero denominator is ``None`` (shown as
``n/a``), never 0.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Mapping

from camo.bench.runner import MajorityResult
from camo.dataset import Label, Manifest
from camo.errors import CamoError

log = logging.getLogger(__name__)

COLUMNS = ("Model", "Obfuscation", "Accuracy", "Precision", "Recall (TPR)", "Specificity (TNR)", "F1-Score")
METRIC_FIELDS = ("accuracy", "precision", "recall", "specificity", "f1")


class UnknownSample(CamoError):
    pass


class EmptyReport(CamoError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    inconclusive: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn, self.inconclusive) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsRow:
    accuracy: float | None
    precision: float | None
    recall: float | None
    specificity: float | None
    f1: float | None


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def compute(cm: ConfusionMatrix) -> MetricsRow:
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = None  # 0/0 again
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsRow(
        accuracy=_ratio(cm.tp + cm.tn, cm.total),
        precision=precision,
        recall=recall,
        specificity=_ratio(cm.tn, cm.tn + cm.fp),
        f1=f1,
    )


def tally(majorities: Iterable[MajorityResult], manifest: Manifest) -> ConfusionMatrix:
    labels = {s.id: s.label for s in manifest.samples}
    tp = fp = fn = tn = skipped = 0
    for m in majorities:
        if m.final == "Inconclusive":
            skipped += 1
            log.warning("excluding inconclusive majority for %s/%s %s", m.sample_id, m.kind, m.votes)
            continue
        if m.sample_id not in labels:
            raise UnknownSample(f"majority for unknown sample {m.sample_id!r}")
        vulnerable = labels[m.sample_id] is Label.VULNERABLE
        flagged = m.final == "Insecure"
        if flagged and vulnerable:
            tp += 1
        elif flagged:
            fp += 1
        elif vulnerable:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn, skipped)


def fmt(value: float | None) -> str:
    """Three decimals, ties to even, ``n/a`` for undefined values."""
    if value is None:
        return "n/a"
    return str(Decimal(repr(value)).quantize(Decimal("0.001"), rounding=ROUND_HALF_EVEN))


def _cells(row: MetricsRow) -> list[str]:
    return [fmt(getattr(row, f)) for f in METRIC_FIELDS]


def emit_report(rows: Mapping[tuple[str, str], MetricsRow], format: str = "md") -> str:
    """Render ``{(model, obfuscation): row}`` as a markdown or CSV table."""
    if not rows:
        raise EmptyReport("nothing to report")
    body = [[model, obf, *_cells(row)] for (model, obf), row in rows.items()]
    if format == "md":
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "|".join(["---"] * len(COLUMNS)) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in body]
        return "\n".join(lines) + "\n"
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(body)
        return buf.getvalue()
    raise ValueError(f"unknown report format {format!r}")


def metrics_json(entries: Mapping[tuple[str, str], tuple[ConfusionMatrix, MetricsRow]]) -> str:
    """Full-precision companion to the rounded tables."""
    doc = [
        {"model": model, "obfuscation": obf, "confusion": asdict(cm), "metrics": asdict(row)}
        for (model, obf), (cm, row) in entries.items()
    ]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
