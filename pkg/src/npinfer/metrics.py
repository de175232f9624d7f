"""Repeated-sampling performance summaries across Monte Carlo iterations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_1d_float, check_same_length
from .errors import DataError


@dataclass(frozen=True)
class MetricsRow:
    method: str
    scenario: str
    qr_spec: str
    pm_spec: str
    gamma1: float
    outcome: str
    rbias: float
    rmse: float
    crci: float
    rlci: float
    rse: float
    k: int


def compute_metrics(values: np.ndarray, variances: np.ndarray,
                    ci_low: np.ndarray, ci_high: np.ndarray,
                    truth: float) -> dict[str, float]:
    """Relative bias/RMSE, CI coverage and length, and the SE ratio.

    All relative quantities are percentages of the truth.  The SE ratio
    compares the mean reported standard error to the across-iteration
    standard deviation (K - 1 denominator); with a single iteration it is
    undefined and reported as NaN.
    """
    values = as_1d_float(values, "values")
    variances = as_1d_float(variances, "variances")
    ci_low = as_1d_float(ci_low, "ci_low")
    ci_high = as_1d_float(ci_high, "ci_high")
    check_same_length(values.shape[0], variances=variances, ci_low=ci_low,
                      ci_high=ci_high)
    k = values.shape[0]
    if k == 0:
        raise DataError("no iterations to summarize")
    if truth == 0.0:
        raise DataError("relative metrics are undefined at a zero truth")

    err = values - truth
    rbias = 100.0 * float(err.mean()) / truth
    rmse = 100.0 * math.sqrt(float((err ** 2).mean())) / truth
    covered = (ci_low <= truth) & (truth <= ci_high)
    crci = 100.0 * float(covered.mean())
    rlci = 100.0 * float((ci_high - ci_low).mean()) / truth
    if k >= 2:
        sd = float(values.std(ddof=1))
        rse = float(np.sqrt(variances).mean()) / sd if sd > 0.0 else math.inf
    else:
        rse = math.nan
    return {"rbias": rbias, "rmse": rmse, "crci": crci, "rlci": rlci,
            "rse": rse, "k": k}


METRICS_CSV_HEADER = ("method", "scenario", "qr_spec", "pm_spec", "gamma1",
                      "outcome", "rbias", "rmse", "crci", "rlci", "rse", "k")


def metrics_row(method: str, scenario: str, qr_spec: str, pm_spec: str,
                gamma1: float, outcome: str, summary: dict[str, float]) -> MetricsRow:
    return MetricsRow(method=method, scenario=scenario, qr_spec=qr_spec,
                      pm_spec=pm_spec, gamma1=gamma1, outcome=outcome,
                      rbias=summary["rbias"], rmse=summary["rmse"],
                      crci=summary["crci"], rlci=summary["rlci"],
                      rse=summary["rse"], k=int(summary["k"]))
