"""Prediction accuracy, base-normalized cost/time metrics, and verification reports."""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np


class MetricError(ValueError):
    pass


def accuracy(pred, truth):
    """Share of matching entries between two binary tensors.

    ``1 - sum|y - y'| / size``; shapes must agree and entries must be 0 or 1.
    """
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch {pred.shape} vs {truth.shape}")
    for name, arr in (("pred", pred), ("truth", truth)):
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise MetricError(f"{name} holds non-binary entries")
    if pred.size == 0:
        raise MetricError("empty tensors")
    return 1.0 - float(np.abs(pred.astype(float) - truth.astype(float)).sum()) / pred.size


def _base_check(base, what):
    if not base > 0:
        raise MetricError(f"{what} must be positive, got {base}")


def bnc(base_cost, reduced_cost):
    """Base-normalized cost difference in percent: ``|base - reduced| / base * 100``."""
    _base_check(base_cost, "base cost")
    return abs(base_cost - reduced_cost) / base_cost * 100.0


def bnts(base_time, reduced_time):
    """Base-normalized time saved in percent (absolute value)."""
    _base_check(base_time, "base time")
    return abs(base_time - reduced_time) / base_time * 100.0


def signed_time_saved(base_time, reduced_time):
    """Like :func:`bnts` but positive when the reduced model is faster."""
    _base_check(base_time, "base time")
    return (base_time - reduced_time) / base_time * 100.0


def error_histogram(counts):
    """Occupied integer bins of per-sample wrong-prediction counts, sorted by value."""
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise MetricError("counts must be non-negative")
    return dict(sorted(Counter(counts).items()))


def histogram_csv(hist):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["wrong_predictions", "samples"])
    for k, v in hist.items():
        w.writerow([k, v])
    return buf.getvalue()


def render_histogram(hist, width=40):
    if not hist:
        return "(no samples)\n"
    peak = max(hist.values())
    lines = [f"{k:>6} | {'#' * max(1, round(width * v / peak))} {v}" for k, v in hist.items()]
    return "\n".join(lines) + "\n"


def wrong_predictions(pred, truth):
    """Per-sample count of mismatched entries; the first axis indexes samples."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch {pred.shape} vs {truth.shape}")
    return np.abs(pred - truth).reshape(len(pred), -1).sum(axis=1).astype(int)


@dataclass
class VerificationRecord:
    sample: int
    variant: str
    feasible: bool
    base_cost: float
    base_time: float
    red_cost: float
    red_time: float
    wrong_preds: int = 0
    status: str = ""

    def __post_init__(self):
        if self.base_time < 0 or self.red_time < 0:
            raise MetricError("solve times must be non-negative")
        if self.feasible and not (math.isfinite(self.red_cost) and math.isfinite(self.base_cost)):
            raise MetricError("feasible records need finite objectives")

    @property
    def bnc(self):
        return bnc(self.base_cost, self.red_cost) if self.feasible else math.nan

    @property
    def bnts(self):
        return bnts(self.base_time, self.red_time) if self.feasible else math.nan

    @property
    def time_saved(self):
        return signed_time_saved(self.base_time, self.red_time) if self.feasible else math.nan

    def row(self):
        d = asdict(self)
        d.update(bnc=self.bnc, bnts=self.bnts, time_saved=self.time_saved)
        return d


CSV_FIELDS = ("sample", "variant", "feasible", "base_cost", "red_cost", "bnc", "base_time",
              "red_time", "bnts", "time_saved", "wrong_preds", "status")


def verification_csv(records):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in records:
        row = r.row()
        row["feasible"] = int(r.feasible)
        w.writerow(row)
    return buf.getvalue()


def _stats(values):
    values = [v for v in values if math.isfinite(v)]
    if not values:
        return {"mean": None, "median": None, "max": None}
    return {"mean": float(np.mean(values)), "median": float(np.median(values)),
            "max": float(np.max(values))}


def summarize(records):
    """Aggregate records per variant: sample and infeasible counts, BNC, BNTS and signed time saved."""
    out = {}
    for variant in sorted({r.variant for r in records}):
        rows = [r for r in records if r.variant == variant]
        feasible = [r for r in rows if r.feasible]
        out[variant] = {
            "samples": len(rows),
            "feasible_samples": len(feasible),
            "infeasible_samples": len(rows) - len(feasible),
            "feasible_rate": len(feasible) / len(rows),
            "bnc_pct": _stats([r.bnc for r in feasible]),
            "bnts_pct": _stats([r.bnts for r in feasible]),
            "time_saved_pct": _stats([r.time_saved for r in feasible]),
            "base_time_s": _stats([r.base_time for r in rows]),
            "reduced_time_s": _stats([r.red_time for r in feasible]),
            "wrong_predictions": _stats([float(r.wrong_preds) for r in rows]),
        }
    return out


def _fmt(x, spec=".2f"):
    return "-" if x is None else format(x, spec)


def render_summary(summary, accuracies=None):
    """Plain-text tables: prediction accuracy, then one verification row per variant."""
    lines = []
    if accuracies:
        lines.append("PREDICTION ACCURACY")
        for name, value in accuracies.items():
            lines.append(f"  {name:<24} {value * 100:6.2f}%")
        lines.append("")
    lines.append("REDUCED MODEL VERIFICATION")
    header = (f"  {'variant':<12} {'samples':>7} {'Infeasible samples':>18} {'BNC mean %':>10} "
              f"{'BNC med %':>9} {'BNTS mean %':>11} {'saved med %':>11}")
    lines.append(header)
    for variant, s in summary.items():
        lines.append(f"  {variant:<12} {s['samples']:>7} {s['infeasible_samples']:>18} "
                     f"{_fmt(s['bnc_pct']['mean']):>10} {_fmt(s['bnc_pct']['median']):>9} "
                     f"{_fmt(s['bnts_pct']['mean']):>11} "
                     f"{_fmt(s['time_saved_pct']['median']):>11}")
    for variant, s in summary.items():
        lines.append(f"Infeasible samples ({variant}): {s['infeasible_samples']}")
    return "\n".join(lines) + "\n"
