"""
Accuracy aggregation over evaluation records, as JSON and as an aligned text table.
"""
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel

from sceneground.evaluation.metrics import HIT_THRESHOLDS, EvalRecord

OVERALL = "overall"


class AccuracyRow(BaseModel):
    """Accuracies in percent, one decimal."""

    split: str
    count: int
    acc25: float
    acc50: float
    mask_acc25: Optional[float] = None
    mask_acc50: Optional[float] = None


class AccuracyReport(BaseModel):
    rows: List[AccuracyRow]

    def row(self, split: str) -> AccuracyRow:
        for r in self.rows:
            if r.split == split:
                return r
        raise KeyError(split)

    @property
    def overall(self) -> AccuracyRow:
        return self.row(OVERALL)


def _percent(hits: int, total: int) -> float:
    return round(100.0 * hits / total, 1)


def _row(split: str, records: Sequence[EvalRecord]) -> AccuracyRow:
    n = len(records)
    row = AccuracyRow(
        split=split,
        count=n,
        acc25=_percent(sum(r.hit25 for r in records), n),
        acc50=_percent(sum(r.hit50 for r in records), n),
    )
    masked = [r.mask_iou for r in records if r.mask_iou is not None]
    if masked:
        row.mask_acc25 = _percent(sum(m > HIT_THRESHOLDS[0] for m in masked), len(masked))
        row.mask_acc50 = _percent(sum(m > HIT_THRESHOLDS[1] for m in masked), len(masked))
    return row


def accuracy_report(records: Sequence[EvalRecord]) -> AccuracyReport:
    """
    Acc@0.25 / Acc@0.5 overall and per split label.

    Split rows appear in first-seen order after the overall row.
    """
    if not records:
        raise ValueError("accuracy_report needs at least one record")

    by_split: Dict[str, List[EvalRecord]] = {}
    for record in records:
        for split in record.splits:
            by_split.setdefault(split, []).append(record)

    rows = [_row(OVERALL, records)]
    rows.extend(_row(split, members) for split, members in by_split.items())
    return AccuracyReport(rows=rows)


def format_report_table(report: AccuracyReport) -> str:
    """Aligned-column text rendering, one row per split."""
    with_masks = any(r.mask_acc25 is not None for r in report.rows)
    header = ["split", "count", "Acc@0.25", "Acc@0.5"]
    if with_masks:
        header += ["Mask@0.25", "Mask@0.5"]

    def fmt(value: Optional[float]) -> str:
        return "-" if value is None else f"{value:.1f}"

    body = []
    for r in report.rows:
        cells = [r.split, str(r.count), fmt(r.acc25), fmt(r.acc50)]
        if with_masks:
            cells += [fmt(r.mask_acc25), fmt(r.mask_acc50)]
        body.append(cells)

    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = []
    for cells in [header] + body:
        lines.append("  ".join(
            cell.ljust(width) if i == 0 else cell.rjust(width)
            for i, (cell, width) in enumerate(zip(cells, widths))
        ).rstrip())
    return "\n".join(lines) + "\n"
