from .curve import (
    CURVE_SIZES,
    CurveCondition,
    conflict_curve,
    curve_sizes,
    curve_table,
    curve_training_data,
)
from .exceptions import DegenerateGap, EvaluationError, IncompleteGrid, NoReportsFound
from .rendering import render_curve, render_gap_lines, render_means, render_per_update, render_report
from .reports import (
    PARTITION_ORDER,
    REPORT_FILENAME,
    EvalReport,
    PartitionScore,
    evaluate,
    load_reports,
    read_records,
    write_predictions,
    write_report,
)
from .summary import Summary, aggregate, gap_closure

__all__ = [
    "CURVE_SIZES",
    "CurveCondition",
    "DegenerateGap",
    "EvalReport",
    "EvaluationError",
    "IncompleteGrid",
    "NoReportsFound",
    "PARTITION_ORDER",
    "PartitionScore",
    "REPORT_FILENAME",
    "Summary",
    "aggregate",
    "conflict_curve",
    "curve_sizes",
    "curve_table",
    "curve_training_data",
    "evaluate",
    "gap_closure",
    "load_reports",
    "read_records",
    "render_curve",
    "render_gap_lines",
    "render_means",
    "render_per_update",
    "render_report",
    "write_predictions",
    "write_report",
]
