"""Grounding metrics and accuracy reports."""
from sceneground.evaluation.metrics import EvalRecord, iou3d, mask_iou, nr3d_accuracy, nr3d_match
from sceneground.evaluation.report import AccuracyReport, AccuracyRow, accuracy_report, format_report_table

__all__ = [
    "AccuracyReport",
    "AccuracyRow",
    "EvalRecord",
    "accuracy_report",
    "format_report_table",
    "iou3d",
    "mask_iou",
    "nr3d_accuracy",
    "nr3d_match",
]
