"""Reports - per-fold results, summary statistics, report files and comparison tables"""

import csv
import io
import json
import logging
import os
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from tools.file_reader import read_file
from tools.file_writer import write_file

logger = logging.getLogger(__name__)

REPORT_FILES = ("report.csv", "report.txt", "config.echo", "report.json")


class FoldResult(BaseModel):
    repetition: int
    fold: int
    accuracy: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    hyperparameters: Dict[str, Any] = {}
    failed: bool = False
    error: Optional[str] = None


class Report(BaseModel):
    method: str
    dataset: str
    folds: List[FoldResult]
    repetitions: int
    num_folds: int = 10
    mean: float
    std: float
    # "repetition means" when R > 1, "folds" for a single repetition
    std_over: Literal["repetition means", "folds"]
    wall_clock_seconds: float = 0.0
    config: Dict[str, Any] = {}

    @classmethod
    def from_folds(
        cls,
        method: str,
        dataset: str,
        folds: Sequence[FoldResult],
        repetitions: int,
        num_folds: int = 10,
        wall_clock_seconds: float = 0.0,
        config: Optional[Dict[str, Any]] = None,
    ) -> "Report":
        mean, std, std_over = summarize(folds, repetitions)
        return cls(
            method=method,
            dataset=dataset,
            folds=list(folds),
            repetitions=repetitions,
            num_folds=num_folds,
            mean=mean,
            std=std,
            std_over=std_over,
            wall_clock_seconds=wall_clock_seconds,
            config=config or {},
        )

    @property
    def failed_folds(self) -> List[FoldResult]:
        return [f for f in self.folds if f.failed]

    def summary_line(self) -> str:
        return f"{self.method} on {self.dataset}: {100 * self.mean:.2f} ± {100 * self.std:.2f} (std over {self.std_over})"

    def comparable(self) -> Dict[str, Any]:
        """Everything except timing, for reproducibility comparisons."""
        return self.model_dump(exclude={"wall_clock_seconds", "method", "config"})


def summarize(folds: Sequence[FoldResult], repetitions: int) -> Tuple[float, float, str]:
    """Mean over successful folds; std over per-repetition means, or over folds when R = 1."""
    scored = [f for f in folds if not f.failed and f.accuracy is not None]
    if not scored:
        return 0.0, 0.0, "folds" if repetitions == 1 else "repetition means"
    mean = float(np.mean([f.accuracy for f in scored]))
    if repetitions == 1:
        return mean, float(np.std([f.accuracy for f in scored])), "folds"
    per_repetition = []
    for r in range(repetitions):
        values = [f.accuracy for f in scored if f.repetition == r]
        if values:
            per_repetition.append(float(np.mean(values)))
    return mean, float(np.std(per_repetition)), "repetition means"


def report_directory(output_dir: str, report: Report) -> str:
    return os.path.join(output_dir, f"{report.dataset}-{report.method}")


def _fold_csv(report: Report) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["repetition", "fold", "accuracy", "failed", "hyperparameters"])
    for f in report.folds:
        accuracy = "" if f.accuracy is None else f"{f.accuracy:.6f}"
        writer.writerow([f.repetition, f.fold, accuracy, int(f.failed), json.dumps(f.hyperparameters, sort_keys=True)])
    return buffer.getvalue()


def write_report(report: Report, directory: str, config_echo: str = "") -> str:
    """Write report.csv, report.txt, config.echo and report.json into `directory`."""
    write_file(os.path.join(directory, "report.csv"), _fold_csv(report))
    text, _ = aggregate([report])
    if report.failed_folds:
        text += f"\n{len(report.failed_folds)} fold(s) failed and were excluded\n"
    write_file(os.path.join(directory, "report.txt"), text)
    write_file(os.path.join(directory, "config.echo"), config_echo)
    write_file(os.path.join(directory, "report.json"), report.model_dump_json(indent=2))
    return directory


def load_report(path: str) -> Report:
    """Read a report from its directory or from the report.json itself."""
    if os.path.isdir(path):
        path = os.path.join(path, "report.json")
    return Report.model_validate_json(read_file(path))


def aggregate(reports: Sequence[Report]) -> Tuple[str, str]:
    """Method x dataset table of mean ± std, best mean per dataset flagged with `*`.

    Returns (text, csv).
    """
    datasets = list(dict.fromkeys(r.dataset for r in reports))
    methods = list(dict.fromkeys(r.method for r in reports))
    cells: Dict[Tuple[str, str], Report] = {}
    for report in reports:
        if (report.method, report.dataset) in cells:
            logger.warning("duplicate report for %s on %s; keeping the last", report.method, report.dataset)
        cells[(report.method, report.dataset)] = report

    best: Dict[str, float] = {}
    for dataset in datasets:
        means = [cells[(m, dataset)].mean for m in methods if (m, dataset) in cells]
        best[dataset] = max(means)

    def cell(method: str, dataset: str) -> str:
        report = cells.get((method, dataset))
        if report is None:
            return "-"
        flag = "*" if report.mean == best[dataset] else ""
        return f"{100 * report.mean:.2f} ± {100 * report.std:.2f}{flag}"

    header = ["method"] + datasets
    rows = [[method] + [cell(method, dataset) for dataset in datasets] for method in methods]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(value.ljust(widths[i]) for i, value in enumerate(row)).rstrip() for row in [header] + rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    notes = sorted({r.std_over for r in reports})
    lines.append("")
    lines.append("accuracy in %, std over " + " / ".join(notes) + "; * best per dataset")
    text = "\n".join(lines) + "\n"

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["method", "dataset", "mean", "std", "std_over", "best"])
    for method in methods:
        for dataset in datasets:
            report = cells.get((method, dataset))
            if report is not None:
                writer.writerow([
                    method, dataset, f"{report.mean:.6f}", f"{report.std:.6f}",
                    report.std_over, int(report.mean == best[dataset]),
                ])
    return text, buffer.getvalue()
