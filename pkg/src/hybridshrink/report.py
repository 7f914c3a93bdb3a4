"""Metric tables, ordering checks and the three-by-three sweep figure.

The metric table is long-format CSV with columns
``method, sweep_variable, sweep_value, metric, value, n_selected, seed``;
floats are written with ``repr`` so that reading the table back gives the
exact values.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, ReportIOError
from .model import ALL_METHODS, Method
from .simlab import MetricsRow

METRIC_COLUMNS = ("method", "sweep_variable", "sweep_value", "metric", "value", "n_selected", "seed")
METRICS = ("mse", "bias", "coverage")
SWEEP_ORDER = ("mu", "nu", "rho")
COLORS = {Method.FACE_VALUE: "tab:blue", Method.GLOBAL: "tab:orange", Method.HYBRID: "tab:green"}
LABELS = {Method.FACE_VALUE: "Face Value", Method.GLOBAL: "Global", Method.HYBRID: "Hybrid"}

NOMINAL = 0.90
COVERAGE_TOL = 0.015


@dataclass(frozen=True)
class OrderingCheck:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def format_metrics(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for r in rows:
        for metric in METRICS:
            w.writerow(
                [Method(r.method).value, r.sweep_variable, repr(float(r.sweep_value)), metric,
                 repr(float(getattr(r, metric))), r.n_selected, r.seed]
            )
    return buf.getvalue()


def parse_metrics(text: str) -> list[MetricsRow]:
    """Inverse of :func:`format_metrics`."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != METRIC_COLUMNS:
        raise InvalidInputError(f"metric table header must be {','.join(METRIC_COLUMNS)}")
    cells: dict[tuple, dict] = {}
    for lineno, rec in enumerate(reader, start=2):
        try:
            key = (Method.parse(rec["method"]), rec["sweep_variable"], float(rec["sweep_value"]),
                   int(rec["n_selected"]), int(rec["seed"]))
            metric, value = rec["metric"], float(rec["value"])
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(f"metric table row {lineno}: {exc}") from None
        if metric not in METRICS:
            raise InvalidInputError(f"metric table row {lineno}: unknown metric {metric!r}")
        cells.setdefault(key, {})[metric] = value
    rows = []
    for (m, var, val, n, seed), vals in cells.items():
        missing = set(METRICS) - set(vals)
        if missing:
            raise InvalidInputError(f"metric table lacks {sorted(missing)} for {m.value} {var}={val}")
        rows.append(MetricsRow(m, var, val, vals["mse"], vals["bias"], vals["coverage"], n, seed))
    return rows


def read_metrics(path) -> list[MetricsRow]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return parse_metrics(fh.read())
    except OSError as exc:
        raise ReportIOError(f"cannot read metric table {path}: {exc}") from exc


def _by_point(rows):
    grid: dict[tuple[str, float], dict[Method, MetricsRow]] = {}
    for r in rows:
        grid.setdefault((r.sweep_variable, r.sweep_value), {})[Method(r.method)] = r
    return grid


def ordering_checks(rows: Sequence[MetricsRow], correct_points: dict | None = None) -> list[OrderingCheck]:
    """Pass/fail for each qualitative claim the rows can speak to.

    ``correct_points`` maps a sweep variable to its correctly specified value
    (defaults: ``mu = 0``, ``rho = 0``, and the largest ``nu`` swept as the
    closest to normal tails).
    """
    grid = _by_point(rows)
    points = sorted(grid)
    checks = []

    both = [p for p in points if {Method.HYBRID, Method.FACE_VALUE} <= set(grid[p])]
    if both:
        bad = [p for p in both if grid[p][Method.HYBRID].mse > grid[p][Method.FACE_VALUE].mse]
        checks.append(OrderingCheck(
            "hybrid MSE <= face-value MSE", not bad,
            f"{len(both) - len(bad)}/{len(both)} points" + (f", fails at {_fmt(bad)}" if bad else ""),
        ))

    fv = [p for p in points if Method.FACE_VALUE in grid[p]]
    if fv:
        bad = [p for p in fv if not grid[p][Method.FACE_VALUE].bias > 0]
        checks.append(OrderingCheck(
            "face-value bias > 0", not bad,
            f"{len(fv) - len(bad)}/{len(fv)} points" + (f", fails at {_fmt(bad)}" if bad else ""),
        ))

    targets = {"mu": 0.0, "rho": 0.0}
    nus = [v for var, v in points if var == "nu"]
    if nus:
        targets["nu"] = max(nus)
    targets.update(correct_points or {})
    for var in SWEEP_ORDER:
        p = (var, targets.get(var))
        if p not in grid or Method.GLOBAL not in grid[p]:
            continue
        cell = grid[p]
        g = cell[Method.GLOBAL]
        lowest = all(g.mse <= r.mse for r in cell.values())
        calibrated = abs(g.coverage - NOMINAL) <= COVERAGE_TOL
        checks.append(OrderingCheck(
            f"global optimal at {var}={p[1]:g}", lowest and calibrated,
            f"lowest MSE {'yes' if lowest else 'no'}, coverage {g.coverage:.4f}",
        ))

    heavy = [p for p in points if p[0] == "nu" and p[1] <= 5 and {Method.HYBRID, Method.GLOBAL} <= set(grid[p])]
    for p in heavy:
        h, g = grid[p][Method.HYBRID].coverage, grid[p][Method.GLOBAL].coverage
        checks.append(OrderingCheck(
            f"hybrid coverage >= global at nu={p[1]:g}", h >= g, f"{h:.4f} vs {g:.4f}",
        ))
    return checks


def _fmt(points):
    return ", ".join(f"{v}={x:g}" for v, x in points)


def summary_text(rows: Sequence[MetricsRow], extra: Iterable[OrderingCheck] = ()) -> str:
    grid = _by_point(rows)
    lines = ["sweep summary", ""]
    lines.append(f"{'point':>14}  {'method':<11}{'mse':>10}{'bias':>10}{'coverage':>10}{'n':>8}")
    for p in sorted(grid, key=lambda q: (_sweep_rank(q[0]), q[1])):
        for m in ALL_METHODS:
            if m in grid[p]:
                r = grid[p][m]
                lines.append(
                    f"{p[0] + '=' + format(p[1], 'g'):>14}  {LABELS[m]:<11}"
                    f"{r.mse:>10.4f}{r.bias:>10.4f}{r.coverage:>10.4f}{r.n_selected:>8d}"
                )
    lines += ["", "ordering checks"]
    lines += [c.line() for c in [*ordering_checks(rows), *extra]]
    return "\n".join(lines) + "\n"


def _sweep_rank(var):
    return SWEEP_ORDER.index(var) if var in SWEEP_ORDER else len(SWEEP_ORDER)


def plot_metrics(rows: Sequence[MetricsRow], path) -> None:
    """One row of panels (MSE, bias, coverage) per sweep variable."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    variables = sorted({r.sweep_variable for r in rows}, key=_sweep_rank)
    fig, axes = plt.subplots(len(variables), 3, figsize=(10, 2.8 * len(variables)), squeeze=False)
    for i, var in enumerate(variables):
        sub = [r for r in rows if r.sweep_variable == var]
        for j, metric in enumerate(METRICS):
            ax = axes[i, j]
            for m in ALL_METHODS:
                pts = sorted((r.sweep_value, getattr(r, metric)) for r in sub if Method(r.method) is m)
                if pts:
                    x, y = np.array(pts).T
                    ax.plot(x, y, "o-", color=COLORS[m], label=LABELS[m], lw=1.5, ms=4)
            if metric == "coverage":
                ax.axhline(NOMINAL, color="0.5", ls="--", lw=0.8)
            if metric == "bias":
                ax.axhline(0.0, color="0.5", ls=":", lw=0.8)
            ax.set_xlabel(var)
            if i == 0:
                ax.set_title(metric)
    axes[0, 0].legend(frameon=False, fontsize=8)
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=120, metadata={"Software": None})
    finally:
        plt.close(fig)


def figure1_report(
    rows: Sequence[MetricsRow], path, extra_checks: Iterable[OrderingCheck] = (), plot: bool = True
) -> str:
    """Write ``metrics.csv``, ``summary.txt`` and ``figure1.png`` into directory ``path``.

    Returns the summary text.
    """
    rows = list(rows)
    if not rows:
        raise InvalidInputError("no metric rows to report")
    text = summary_text(rows, extra_checks)
    try:
        os.makedirs(path, exist_ok=True)
        with open(os.path.join(path, "metrics.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(format_metrics(rows))
        with open(os.path.join(path, "summary.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
        if plot:
            plot_metrics(rows, os.path.join(path, "figure1.png"))
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {path}: {exc}") from exc
    return text
