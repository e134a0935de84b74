"""PSNR / MSE / SSIM and the comparison-report rule."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


def _as_array(x) -> np.ndarray:
    values = getattr(x, "values", x)
    return np.asarray(values, dtype=np.float64)


def _check_shapes(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")


def mse(x, y) -> float:
    """Mean of squared element-wise differences."""
    x, y = _as_array(x), _as_array(y)
    _check_shapes(x, y)
    d = x - y
    return float(np.mean(d * d))


def psnr(x, y) -> float:
    """Peak signal-to-noise ratio in dB against ground truth y.

    The peak is the maximum value of y; identical images give +inf.
    """
    x, y = _as_array(x), _as_array(y)
    _check_shapes(x, y)
    peak = float(y.max())
    if peak <= 0.0 and not np.any(y):
        raise ValueError("ground truth is all-zero")
    err = mse(x, y)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def ssim(x, y, c1: float | None = None, c2: float | None = None,
         windowed: bool = False, window: int = 8) -> float:
    """Structural similarity from global image statistics.

    Stabilizers default to (0.01*peak)^2 and (0.03*peak)^2 with the peak taken
    from y. ``windowed=True`` switches to the mean of local SSIM values over a
    sliding square window instead of whole-image statistics.
    """
    x, y = _as_array(x), _as_array(y)
    _check_shapes(x, y)
    peak = float(y.max())
    if c1 is None:
        c1 = (0.01 * peak) ** 2
    if c2 is None:
        c2 = (0.03 * peak) ** 2
    if not windowed:
        return _ssim_stats(x, y, c1, c2)
    rows, cols = x.shape
    w = min(window, rows, cols)
    vals = [
        _ssim_stats(x[i:i + w, j:j + w], y[i:i + w, j:j + w], c1, c2)
        for i in range(rows - w + 1)
        for j in range(cols - w + 1)
    ]
    return float(np.mean(vals))


def _ssim_stats(x: np.ndarray, y: np.ndarray, c1: float, c2: float) -> float:
    mu_x, mu_y = x.mean(), y.mean()
    var_x, var_y = x.var(), y.var()
    cov = ((x - mu_x) * (y - mu_y)).mean()
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return float(num / den)


@dataclass
class ReportCell:
    method: str
    scenario: str
    psnr_avg: float
    ssim_avg: float
    pct_diff_psnr: float = 0.0
    pct_diff_ssim: float = 0.0
    flagged: bool = False
    best: bool = False


@dataclass
class MetricsReport:
    """Per-method, per-scenario averages with differences vs. the column best.

    Differences above 2% in magnitude are flagged as meaningful; methods
    within 2% of the column best share the ``best`` mark.
    """

    cells: list = field(default_factory=list)
    scenarios: list = field(default_factory=list)
    methods: list = field(default_factory=list)

    def cell(self, method: str, scenario: str) -> ReportCell:
        for c in self.cells:
            if c.method == method and c.scenario == scenario:
                return c
        raise KeyError((method, scenario))


MEANINGFUL_DIFF = 0.02  # 2% rule


def build_report(results: dict, baseline: str = "best") -> MetricsReport:
    """Aggregate per-image (psnr, ssim) pairs into a comparison report.

    `results` maps method -> scenario -> list of (psnr, ssim) per image; every
    method must cover the same scenarios with the same image counts. An
    "Average" column aggregates across scenarios. `baseline` names the method
    differences are taken against; "best" uses the per-column best value.
    """
    methods = list(results)
    if not methods:
        return MetricsReport()
    scenarios = list(results[methods[0]])
    for m in methods:
        if list(results[m]) != scenarios:
            raise ValueError(f"method {m!r} covers different scenarios")
        for s in scenarios:
            if len(results[m][s]) != len(results[methods[0]][s]):
                raise ValueError(f"inconsistent image count for {m!r}/{s!r}")

    report = MetricsReport(scenarios=scenarios + ["Average"], methods=methods)
    for m in methods:
        per_scenario = []
        for s in scenarios:
            pairs = np.asarray(results[m][s], dtype=np.float64)
            cell = ReportCell(m, s, float(pairs[:, 0].mean()), float(pairs[:, 1].mean()))
            per_scenario.append(cell)
            report.cells.append(cell)
        report.cells.append(ReportCell(
            m, "Average",
            float(np.mean([c.psnr_avg for c in per_scenario])),
            float(np.mean([c.ssim_avg for c in per_scenario])),
        ))

    for s in report.scenarios:
        column = [report.cell(m, s) for m in methods]
        if baseline == "best":
            ref_psnr = max(c.psnr_avg for c in column)
            ref_ssim = max(c.ssim_avg for c in column)
        else:
            ref = report.cell(baseline, s)
            ref_psnr, ref_ssim = ref.psnr_avg, ref.ssim_avg
        for c in column:
            c.pct_diff_psnr = (c.psnr_avg - ref_psnr) / ref_psnr if ref_psnr else 0.0
            c.pct_diff_ssim = (c.ssim_avg - ref_ssim) / ref_ssim if ref_ssim else 0.0
            c.flagged = (abs(c.pct_diff_psnr) > MEANINGFUL_DIFF
                         or abs(c.pct_diff_ssim) > MEANINGFUL_DIFF)
            c.best = abs(c.pct_diff_psnr) <= MEANINGFUL_DIFF
    return report


def write_report_csv(report: MetricsReport, path) -> None:
    """One row per method x scenario column (including the Average column)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "scenario", "psnr_avg", "ssim_avg",
                         "pct_diff_psnr", "pct_diff_ssim", "flagged", "best"])
        for m in report.methods:
            for s in report.scenarios:
                c = report.cell(m, s)
                writer.writerow([
                    m, s, f"{c.psnr_avg:.6f}", f"{c.ssim_avg:.6f}",
                    f"{100 * c.pct_diff_psnr:.2f}", f"{100 * c.pct_diff_ssim:.2f}",
                    int(c.flagged), int(c.best),
                ])


def render_table(report: MetricsReport) -> str:
    """Plain-text table: method rows, scenario columns, PSNR over SSIM."""
    widths = [max(len(m) for m in report.methods + ["method"]) + 2]
    header = ["method"] + report.scenarios
    lines = []
    col_w = max(18, max(len(s) for s in report.scenarios) + 2)
    lines.append(header[0].ljust(widths[0]) + "".join(s.rjust(col_w) for s in header[1:]))
    for m in report.methods:
        psnr_row, ssim_row = [m.ljust(widths[0])], ["".ljust(widths[0])]
        for s in report.scenarios:
            c = report.cell(m, s)
            mark = "*" if c.best else " "
            psnr_row.append(f"{c.psnr_avg:.1f} ({100 * c.pct_diff_psnr:+.1f}%){mark}".rjust(col_w))
            ssim_row.append(f"{c.ssim_avg:.3f} ({100 * c.pct_diff_ssim:+.1f}%)".rjust(col_w))
        lines.append("".join(psnr_row))
        lines.append("".join(ssim_row))
    return "\n".join(lines) + "\n"
