"""Machine-readable metric reports: per-timestamp rows plus aggregates.

The JSON form round-trips losslessly and is the canonical serialization;
the CSV form is a pair of plot-ready tables (rows, and a .summary.csv with
the aggregates) under documented fixed headers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

ROW_HEADER = "timestamp,variable,model_tag,rmse,ssim"
SUMMARY_HEADER = "variable,model_tag,n,rmse_mean,rmse_sigma,ssim_mean,ssim_sigma"

# Full-scale reference numbers for the same comparison, for report context only;
# desk-scale runs are not expected to reproduce them.
FULL_SCALE_REFERENCE = {
    "tcc": {"bespoke": {"rmse_mean": 0.1656, "rmse_sigma": 0.0076, "ssim_mean": 0.5648, "ssim_sigma": 0.0134},
            "downstream": {"rmse_mean": 0.1677, "rmse_sigma": 0.0084, "ssim_mean": 0.5926, "ssim_sigma": 0.0141}},
    "stl1": {"bespoke": {"rmse_mean": 11.761, "rmse_sigma": 0.14367, "ssim_mean": 0.9633, "ssim_sigma": 0.00034},
             "downstream": {"rmse_mean": 11.784, "rmse_sigma": 0.1645, "ssim_mean": 0.9632, "ssim_sigma": 0.00036}},
}


class ReportError(ValueError):
    pass


@dataclass
class MetricRow:
    timestamp: str
    variable: str
    model_tag: str
    rmse: float
    ssim: float


@dataclass
class MetricAggregate:
    variable: str
    model_tag: str
    n: int
    rmse_mean: float
    rmse_sigma: float
    ssim_mean: float
    ssim_sigma: float


@dataclass
class MetricReport:
    rows: list[MetricRow]
    aggregates: list[MetricAggregate] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregates and self.rows:
            self.aggregates = aggregate_rows(self.rows)


def _sample_sigma(values: list[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    mu = sum(values) / n
    return math.sqrt(sum((v - mu) ** 2 for v in values) / (n - 1))


def aggregate_rows(rows: list[MetricRow]) -> list[MetricAggregate]:
    """Sample mean and sample sigma (n-1) per (variable, model_tag), in row order."""
    groups: dict[tuple[str, str], list[MetricRow]] = {}
    for r in rows:
        groups.setdefault((r.variable, r.model_tag), []).append(r)
    out = []
    for (var, tag), rs in groups.items():
        rmses = [r.rmse for r in rs]
        ssims = [r.ssim for r in rs]
        out.append(MetricAggregate(
            variable=var, model_tag=tag, n=len(rs),
            rmse_mean=sum(rmses) / len(rs), rmse_sigma=_sample_sigma(rmses),
            ssim_mean=sum(ssims) / len(rs), ssim_sigma=_sample_sigma(ssims)))
    return out


def emit_report(report: MetricReport, fmt: str, path: str | Path) -> list[Path]:
    """Write the report; returns the paths produced."""
    path = Path(path)
    if fmt == "json":
        obj = {"rows": [asdict(r) for r in report.rows],
               "aggregates": [asdict(a) for a in report.aggregates],
               "metadata": report.metadata}
        path.write_text(json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n")
        return [path]
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(ROW_HEADER.split(","))
            for r in report.rows:
                w.writerow([r.timestamp, r.variable, r.model_tag, repr(r.rmse), repr(r.ssim)])
        summary = path.with_suffix(".summary.csv")
        with open(summary, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(SUMMARY_HEADER.split(","))
            for a in report.aggregates:
                w.writerow([a.variable, a.model_tag, a.n, repr(a.rmse_mean), repr(a.rmse_sigma),
                            repr(a.ssim_mean), repr(a.ssim_sigma)])
        return [path, summary]
    raise ReportError(f"unknown report format {fmt!r}")


def parse_report(path: str | Path) -> MetricReport:
    """Read back the JSON form."""
    obj = json.loads(Path(path).read_text())
    return MetricReport(rows=[MetricRow(**r) for r in obj["rows"]],
                        aggregates=[MetricAggregate(**a) for a in obj["aggregates"]],
                        metadata=obj["metadata"])
