"""Report files: JSON (round-trippable), CSV rows and SVG bar/line plots."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from mfbench.bench.runner import RobustnessReport  # noqa: E402
from mfbench.errors import ConfigError  # noqa: E402

CSV_COLUMNS = ("setting", "family", "category", "ratio", "trials", "sr", "r_score")
FORMATS = ("json", "csv", "svg_plot")


def _cell(v):
    return "" if v is None else v


def report_csv(report: RobustnessReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    multi = len({r.task for r in report.rows}) > 1
    w.writerow(CSV_COLUMNS + (("task",) if multi else ()))
    for r in report.rows:
        row = [r.setting, _cell(r.family), _cell(r.category), _cell(r.ratio), r.trials,
               f"{r.sr:.1f}", "" if r.r_score is None else f"{r.r_score:.1f}"]
        w.writerow(row + ([r.task] if multi else []))
    return buf.getvalue()


def _svg(fig) -> str:
    buf = io.StringIO()
    # fixed metadata and id salt keep the SVG byte-stable across runs
    with plt.rc_context({"svg.hashsalt": "mfbench"}):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "mfbench"})
    plt.close(fig)
    return buf.getvalue()


def report_svg(report: RobustnessReport) -> str:
    """Grouped SR / R-Score bars, one group per (task, setting)."""
    import numpy as np

    rows = report.rows
    labels = [r.setting if len({x.task for x in rows}) == 1 else f"{r.task}\n{r.setting}"
              for r in rows]
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(rows) + 2), 3.6))
    ax.bar(x - 0.2, [r.sr for r in rows], 0.4, label="SR (%)")
    ax.bar(x + 0.2, [r.r_score or 0.0 for r in rows], 0.4, label="R-Score")
    ax.set_xticks(x, labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylim(0, 110)
    ax.set_title(f"{report.policy} [{report.fingerprint}]", fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _svg(fig)


def emit_report(report: RobustnessReport, fmt: str, path: str | Path) -> Path:
    if fmt == "json":
        text = report.dumps()
    elif fmt == "csv":
        text = report_csv(report)
    elif fmt == "svg_plot":
        text = report_svg(report)
    else:
        raise ConfigError(f"unknown report format {fmt!r}, expected one of {FORMATS}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def load_report(path: str | Path) -> RobustnessReport:
    return RobustnessReport.from_dict(json.loads(Path(path).read_text()))


def comparison_csv(reports: Sequence[RobustnessReport], path: str | Path) -> Path:
    """One row per (task, setting), SR and R-Score columns per policy."""
    keys = []
    for rep in reports:
        for r in rep.rows:
            if (r.task, r.setting) not in keys:
                keys.append((r.task, r.setting))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["task", "setting"]
        for rep in reports:
            header += [f"{rep.policy}:sr", f"{rep.policy}:r_score"]
        w.writerow(header)
        for task, setting in keys:
            line = [task, setting]
            for rep in reports:
                try:
                    r = rep.row(setting, task)
                    line += [f"{r.sr:.1f}", "" if r.r_score is None else f"{r.r_score:.1f}"]
                except KeyError:
                    line += ["", ""]
            w.writerow(line)
    return path


def write_frames_sweep(rows: Sequence[dict], csv_path: str | Path,
                       svg_path: str | Path | None = None) -> Path:
    """Success-vs-frames table: rows of {variant, frames, task, trials, sr}."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    cols = ("variant", "frames", "task", "trials", "sr")
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in cols})
    if svg_path is not None:
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for variant, task in sorted({(r["variant"], r["task"]) for r in rows}):
            pts = sorted((r["frames"], r["sr"]) for r in rows
                         if r["variant"] == variant and r["task"] == task)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    label=f"{variant} / {task}")
        ax.set_xlabel("frames M")
        ax.set_ylabel("success rate (%)")
        ax.set_ylim(0, 105)
        ax.legend(fontsize=7)
        fig.tight_layout()
        Path(svg_path).write_text(_svg(fig))
    return csv_path
