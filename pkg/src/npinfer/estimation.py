"""Point estimators, per-replicate estimation cells, and their combination.

Doubly robust estimators share one template: fit a prediction model on the
non-probability bootstrap sample, predict for every synthetic-population
row, and combine a sample residual sum with the synthetic prediction total,
divided by the replicate's weight total.  They differ only in how the
estimated selection odds enter the prediction model (kernel term, spline
term, inverse-odds regressor, or residual inverse-weighting).

Replicate-level values on the (B, L) grid are combined by the
between-replicate rule: point = grand mean, variance =
(B+1)/(B(B-1)) * sum over b of (b-mean - grand mean)^2, interval from a t
reference with min(m - H, B - 1) degrees of freedom.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import as_1d_float, as_2d_float
from .errors import DataError, DegenerateInputError, EstimationError
from .logistic import estimate_pseudo_propensity, misspecify_design, qr_design
from .polya import SyntheticPopulation
from .sampling import NonProbSample
from .smoothing import SmootherSpec, fit_partially_linear, predict

DR_METHODS = ("GPPP", "PSPP", "LWP", "AIPW")
_SMOOTHER_KIND = {"GPPP": "GP", "PSPP": "PSPLINE", "LWP": "LWP", "AIPW": "PLAIN"}


@dataclass(frozen=True)
class EstimateRecord:
    method: str
    b: int
    l: int
    value: float
    n_used: int


@dataclass(frozen=True)
class CombinedEstimate:
    method: str
    point: float
    variance: float
    ci_low: float
    ci_high: float
    df: int
    b_used: int


@dataclass(frozen=True)
class CellSpec:
    """What one (b, l) estimation cell should compute.

    ``mode`` is "simulate" for generated populations (scalar x plus the
    stratum and log-weight design covariates, with true/false model choices)
    or "external" for user data (all shared covariate columns, correctly
    specified designs only).
    """

    qr_true: bool = True
    pm_true: bool = True
    link: str = "identity"
    methods: tuple[str, ...] = DR_METHODS + ("IPSW",)
    mode: str = "simulate"
    h_strata: int | None = None


def unweighted_mean(y: np.ndarray) -> float:
    y = as_1d_float(y, "y")
    if y.shape[0] == 0:
        raise DataError("empty sample")
    return float(y.mean())


def weighted_mean(y: np.ndarray, w: np.ndarray) -> float:
    y = as_1d_float(y, "y")
    w = as_1d_float(w, "w")
    if y.shape[0] == 0:
        raise DataError("empty sample")
    total = float(w.sum())
    if total <= 0.0:
        raise EstimationError("weights must have positive total")
    return float((w * y).sum() / total)


def hajek_mean(y: np.ndarray, pi: np.ndarray) -> float:
    """Self-normalized inverse-propensity mean."""
    pi = as_1d_float(pi, "pi")
    if np.any(pi <= 0.0):
        raise EstimationError("propensities must be positive")
    return weighted_mean(y, 1.0 / pi)


def model_based_mean(y_sample: np.ndarray, yhat_sample: np.ndarray,
                     yhat_synth: np.ndarray, multiplicity: np.ndarray,
                     N_hat: float) -> float:
    """(sample residual total + synthetic prediction total) / N_hat."""
    if N_hat <= 0.0:
        raise EstimationError("N_hat must be positive")
    resid = as_1d_float(y_sample, "y_sample") - as_1d_float(yhat_sample, "yhat_sample")
    synth_total = float(np.sum(as_1d_float(multiplicity, "multiplicity")
                               * as_1d_float(yhat_synth, "yhat_synth")))
    return float((resid.sum() + synth_total) / N_hat)


def aipw_mean(y_sample: np.ndarray, yhat_sample: np.ndarray, pi_sample: np.ndarray,
              yhat_synth: np.ndarray, multiplicity: np.ndarray, N_hat: float) -> float:
    """Residuals inverse-weighted by the selection odds, plus the prediction total."""
    if N_hat <= 0.0:
        raise EstimationError("N_hat must be positive")
    pi = as_1d_float(pi_sample, "pi_sample")
    if np.any(pi <= 0.0):
        raise EstimationError("propensities must be positive")
    resid = as_1d_float(y_sample, "y_sample") - as_1d_float(yhat_sample, "yhat_sample")
    synth_total = float(np.sum(as_1d_float(multiplicity, "multiplicity")
                               * as_1d_float(yhat_synth, "yhat_synth")))
    return float(((resid / pi).sum() + synth_total) / N_hat)


def selection_design(x: np.ndarray, spec: CellSpec) -> np.ndarray:
    if spec.mode == "external":
        return qr_design(x)
    return qr_design(x) if spec.qr_true else misspecify_design(x)


def prediction_design(x: np.ndarray, stratum: np.ndarray | None,
                      logw: np.ndarray | None, spec: CellSpec) -> np.ndarray:
    if spec.mode == "external":
        x2 = as_2d_float(x, "x")
        return np.column_stack([np.ones(x2.shape[0]), x2])
    x1 = as_1d_float(x, "x")
    if not spec.pm_true:
        return np.column_stack([np.ones(x1.shape[0]), x1 ** 2])
    if stratum is None or logw is None or spec.h_strata is None:
        raise EstimationError("true prediction design needs stratum and log-weight columns")
    cols = [np.ones(x1.shape[0]), x1]
    # stratum 0 is the baseline; a category missing at training shows up as an
    # all-zero column and resolves through the solver's ridge fallback
    for h in range(1, spec.h_strata):
        cols.append((stratum == h).astype(float))
    cols.append(as_1d_float(logw, "logw"))
    return np.column_stack(cols)


def cell_propensity(sa_boot: NonProbSample, synth: SyntheticPopulation,
                    spec: CellSpec):
    """Stacked-fit selection odds for one cell; shareable across PM choices."""
    X_sa_sel = selection_design(sa_boot.x, spec)
    X_sy_sel = selection_design(synth.x, spec)
    return estimate_pseudo_propensity(X_sa_sel, X_sy_sel, synth.multiplicity)


def estimate_cell(sa_boot: NonProbSample, synth: SyntheticPopulation,
                  N_hat: float, spec: CellSpec,
                  propensity=None) -> dict[str, float]:
    """All propensity-dependent estimates for one (replicate, synthesis) pair."""
    wanted = [m for m in spec.methods if m in DR_METHODS or m == "IPSW"]
    if not wanted:
        return {}

    if propensity is None:
        propensity = cell_propensity(sa_boot, synth, spec)
    pi_sa = propensity.pi_hat_sample
    pi_sy = propensity.pi_hat

    out: dict[str, float] = {}
    if "IPSW" in wanted:
        out["IPSW"] = hajek_mean(sa_boot.y, pi_sa)

    dr = [m for m in wanted if m in DR_METHODS]
    if not dr:
        return out

    X_sa_pm = prediction_design(sa_boot.x, sa_boot.stratum, sa_boot.logw, spec)
    X_sy_pm = prediction_design(synth.x, synth.stratum, synth.logw, spec)

    log_pi_sa = np.log(pi_sa)
    log_pi_sy = np.log(pi_sy)
    for method in dr:
        kind = _SMOOTHER_KIND[method]
        if kind in ("GP", "PSPLINE"):
            g_fit, g_new = log_pi_sa, log_pi_sy
        elif kind == "LWP":
            g_fit, g_new = pi_sa, pi_sy
        else:
            g_fit = g_new = None
        try:
            fit = fit_partially_linear(SmootherSpec(kind=kind, link=spec.link),
                                       sa_boot.y, X_sa_pm, g=g_fit)
        except DegenerateInputError:
            # constant propensity carries no signal; drop the smooth term
            fit = fit_partially_linear(SmootherSpec(kind="PLAIN", link=spec.link),
                                       sa_boot.y, X_sa_pm)
            g_fit = g_new = None
        yhat_sa = predict(fit, X_sa_pm, g_fit)
        yhat_sy = predict(fit, X_sy_pm, g_new)
        if method == "AIPW":
            out[method] = aipw_mean(sa_boot.y, yhat_sa, pi_sa, yhat_sy,
                                    synth.multiplicity, N_hat)
        else:
            out[method] = model_based_mean(sa_boot.y, yhat_sa, yhat_sy,
                                           synth.multiplicity, N_hat)
    return out


def combine_values(values: np.ndarray, B: int, L: int, m: int, H: int,
                   method: str = "", point_override: float | None = None,
                   ci_reference: str = "t") -> CombinedEstimate:
    """Between-replicate combination of a complete (B, L) value grid.

    ``values`` has shape (B, L) (rows may contain NaN for aborted cells; a
    row with no finite entry drops out of the combination).  The variance is
    always measured around the replicate grand mean; ``point_override``
    replaces only the reported point, which is how the baseline estimators
    report the original-sample statistic alongside a bootstrap spread.
    """
    values = np.asarray(values, dtype=float).reshape(B, L)
    with warnings.catch_warnings():
        # an aborted replicate is an all-NaN row; nanmean's complaint about
        # it is the expected path, not a defect
        warnings.simplefilter("ignore", RuntimeWarning)
        b_means = np.nanmean(values, axis=1)
    keep = np.isfinite(b_means)
    b_used = int(keep.sum())
    if b_used < 2:
        raise EstimationError("need at least two replicate means to combine")
    b_means = b_means[keep]
    grand = float(b_means.mean())
    point = grand if point_override is None else float(point_override)
    variance = (b_used + 1.0) / (b_used * (b_used - 1.0)) * float(((b_means - grand) ** 2).sum())
    df = max(int(min(m - H, B - 1)), 1)
    if ci_reference == "t":
        q = float(stats.t.ppf(0.975, df))
    elif ci_reference == "z":
        q = float(stats.norm.ppf(0.975))
    else:
        raise EstimationError(f"unknown ci reference {ci_reference!r}")
    half = q * float(np.sqrt(variance))
    return CombinedEstimate(method=method, point=point, variance=variance,
                            ci_low=point - half, ci_high=point + half, df=df,
                            b_used=b_used)


def rubin_combine(records: list[EstimateRecord], B: int, L: int, m: int, H: int,
                  ci_reference: str = "t",
                  allow_incomplete: bool = False) -> CombinedEstimate:
    """Combine a record stream covering the (B, L) grid for one method."""
    if not records:
        raise EstimationError("no records to combine")
    method = records[0].method
    if any(r.method != method for r in records):
        raise EstimationError("records mix methods")
    grid = np.full((B, L), np.nan)
    for r in records:
        if not (0 <= r.b < B and 0 <= r.l < L):
            raise EstimationError(f"record index ({r.b}, {r.l}) outside the grid")
        grid[r.b, r.l] = r.value
    missing = int(np.isnan(grid).sum())
    if missing and not allow_incomplete:
        raise EstimationError(f"{missing} cells of the (B, L) grid are missing")
    return combine_values(grid, B, L, m, H, method=method, ci_reference=ci_reference)
