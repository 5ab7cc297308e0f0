"""Prediction- and density-quality metrics: MQE, NLL, CRPS, MISE.

All metrics are means over samples (and, for MQE, additionally over
quantile levels), so values are comparable across dataset sizes.  CRPS and
MISE are numeric integrals (trapezoid rule, 1024 points by default, with the
integration window padded by 6 bandwidths around the relevant mass).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .density import Density, cdf as density_cdf, pdf as density_pdf
from .quantiles import QuantileGrid

NLL_FLOOR = 1e-12
DEFAULT_INTEGRATION_POINTS = 1024


class MetricsError(ValueError):
    """Raised for shape mismatches or missing ground truth."""


@dataclass
class EvalReport:
    mqe: float
    nll: float
    crps: float
    mise: float | None
    per_quantile: np.ndarray  # mean pinball loss per grid level

    def __post_init__(self) -> None:
        self.per_quantile = np.asarray(self.per_quantile, dtype=np.float64)


def per_quantile_losses(predictions, targets, grid: QuantileGrid) -> np.ndarray:
    """Mean-over-samples pinball loss for each grid level.

    ``predictions`` is (n_samples, |grid|), one row per sample.
    """
    preds = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if y.size == 0:
        raise MetricsError("no samples to evaluate")
    if preds.shape != (y.size, len(grid)):
        raise MetricsError(f"predictions shape {preds.shape} != ({y.size}, {len(grid)})")
    diff = y[:, None] - preds
    qs = grid.qs
    losses = np.maximum(qs * diff, (qs - 1.0) * diff)
    return losses.mean(axis=0)


def mqe(predictions, targets, grid: QuantileGrid) -> float:
    """Mean over quantiles of the mean per-sample pinball loss."""
    return float(per_quantile_losses(predictions, targets, grid).mean())


def _check_paired(densities, targets) -> np.ndarray:
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise MetricsError("no samples to evaluate")
    if len(densities) != y.size:
        raise MetricsError(f"{len(densities)} densities for {y.size} targets")
    return y


def nll(densities: list[Density], targets) -> float:
    """Mean negative log predicted density of each observation (floored at 1e-12)."""
    y = _check_paired(densities, targets)
    vals = np.array([density_pdf(d, float(t)) for d, t in zip(densities, y)])
    return float(np.mean(-np.log(np.maximum(vals, NLL_FLOOR))))


def crps(densities: list[Density], targets, points: int = DEFAULT_INTEGRATION_POINTS) -> float:
    """Mean integrated squared difference between each predicted cdf and the
    observation's step function."""
    y = _check_paired(densities, targets)
    total = 0.0
    for d, t in zip(densities, y):
        lo, hi = d.support()
        lo, hi = min(lo, float(t) - 6.0 * d.bandwidth), max(hi, float(t) + 6.0 * d.bandwidth)
        xs = np.linspace(lo, hi, points)
        integrand = (density_cdf(d, xs) - (xs >= t)) ** 2
        total += float(np.trapezoid(integrand, xs))
    return total / y.size


def mise(
    densities: list[Density],
    true_pdfs,
    integration_range: tuple[float, float],
    points: int = DEFAULT_INTEGRATION_POINTS,
) -> float:
    """Mean integrated squared error of each density against its true pdf.

    ``true_pdfs`` supplies one callable per sample (synthetic data only,
    where the generating distribution is known).
    """
    if len(true_pdfs) != len(densities):
        raise MetricsError(f"{len(true_pdfs)} true pdfs for {len(densities)} densities")
    if not densities:
        raise MetricsError("no samples to evaluate")
    lo, hi = integration_range
    if not hi > lo:
        raise MetricsError(f"bad integration range ({lo}, {hi})")
    xs = np.linspace(lo, hi, points)
    total = 0.0
    for d, f in zip(densities, true_pdfs):
        if f is None:
            raise MetricsError("missing true density for a sample")
        total += float(np.trapezoid((density_pdf(d, xs) - f(xs)) ** 2, xs))
    return total / len(densities)


def build_report(
    predictions,
    targets,
    grid: QuantileGrid,
    densities: list[Density],
    true_pdfs=None,
    integration_range: tuple[float, float] | None = None,
    points: int = DEFAULT_INTEGRATION_POINTS,
) -> EvalReport:
    per_q = per_quantile_losses(predictions, targets, grid)
    mise_val = None
    if true_pdfs is not None:
        if integration_range is None:
            raise MetricsError("mise needs an integration range")
        mise_val = mise(densities, true_pdfs, integration_range, points)
    return EvalReport(
        mqe=float(per_q.mean()),
        nll=nll(densities, targets),
        crps=crps(densities, targets, points),
        mise=mise_val,
        per_quantile=per_q,
    )


def report_json(report: EvalReport, grid: QuantileGrid) -> str:
    return json.dumps(
        {
            "mqe": report.mqe,
            "nll": report.nll,
            "crps": report.crps,
            "mise": report.mise,
            "per_quantile": [
                {"q": q, "loss": loss}
                for q, loss in zip(grid, report.per_quantile.tolist())
            ],
        },
        indent=1,
    )


def report_table(report: EvalReport) -> str:
    rows = [("mqe", report.mqe), ("nll", report.nll), ("crps", report.crps)]
    if report.mise is not None:
        rows.append(("mise", report.mise))
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value:.6g}" for name, value in rows)
