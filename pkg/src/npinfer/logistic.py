"""Weighted logistic regression and pseudo-inclusion-probability estimation.

The selection probability of a non-probability sample is estimated by
stacking the sample (label 1, unit weight) on a synthetic population (label
0, multiplicity case-weights) and fitting a weighted logistic regression.
Because every sampled unit is also represented in the synthetic population,
the fitted odds p/(1 - p) estimate the unit's selection probability; the
stacked fit needs no duplicate bookkeeping beyond the case-weights.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, xlogy

from ._validation import as_1d_float, as_2d_float
from .errors import DegenerateInputError, EstimationError

DEVIANCE_RTOL = 1e-8
MAX_ITERATIONS = 50
MAX_STEP_HALVINGS = 30
RIDGE = 1e-8
PROBABILITY_CLIP = 1e-6


@dataclass
class LogisticFit:
    beta: np.ndarray
    converged: bool
    iterations: int
    final_deviance: float


@dataclass
class PropensityAssignment:
    """Estimated selection odds aligned to synthetic-population and sample rows."""

    pi_hat: np.ndarray
    pi_hat_sample: np.ndarray
    beta: np.ndarray
    converged: bool


def _deviance(y: np.ndarray, p: np.ndarray, w: np.ndarray) -> float:
    return float(-2.0 * np.sum(w * (xlogy(y, p) + xlogy(1.0 - y, 1.0 - p))))


def _weighted_ls(X: np.ndarray, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    XtW = X.T * w
    A = XtW @ X
    b = XtW @ z
    try:
        beta = np.linalg.solve(A, b)
        if not np.all(np.isfinite(beta)):
            raise np.linalg.LinAlgError
        return beta
    except np.linalg.LinAlgError:
        warnings.warn("design is rank deficient; adding a small ridge", RuntimeWarning)
        A = A + RIDGE * np.eye(X.shape[1])
        return np.linalg.solve(A, b)


def fit_logistic(X: np.ndarray, y: np.ndarray,
                 case_weights: np.ndarray | None = None) -> LogisticFit:
    """Maximize the weighted Bernoulli likelihood by reweighted least squares.

    Stops when the relative deviance change drops below 1e-8 or after 50
    iterations; a step that increases the deviance is halved until it does
    not, so the deviance sequence is non-increasing.  Complete separation
    shows up as the iteration cap with converged=False.
    """
    X = as_2d_float(X, "X")
    y = as_1d_float(y, "y")
    if X.shape[0] != y.shape[0]:
        raise EstimationError("X and y row counts differ")
    if case_weights is None:
        w = np.ones(y.shape[0])
    else:
        w = as_1d_float(case_weights, "case_weights")
        if np.any(w < 0.0):
            raise EstimationError("case weights must be nonnegative")

    beta = np.zeros(X.shape[1])
    eta = X @ beta
    p = expit(eta)
    dev = _deviance(y, p, w)
    iterations = 0
    converged = False

    for iterations in range(1, MAX_ITERATIONS + 1):
        mu_var = np.clip(p * (1.0 - p), 1e-10, None)
        z = eta + (y - p) / mu_var
        proposal = _weighted_ls(X, z, w * mu_var)
        step = proposal - beta

        scale = 1.0
        for _ in range(MAX_STEP_HALVINGS):
            candidate = beta + scale * step
            p_new = expit(X @ candidate)
            dev_new = _deviance(y, p_new, w)
            if dev_new <= dev + 1e-12 * max(1.0, abs(dev)):
                break
            scale *= 0.5
        else:
            candidate = beta
            p_new = p
            dev_new = dev

        beta = candidate
        eta = X @ beta
        p = p_new
        # strictly relative: near separation the deviance keeps shrinking by a
        # constant factor, which must not count as convergence
        if abs(dev - dev_new) <= DEVIANCE_RTOL * max(abs(dev), 1e-300):
            dev = dev_new
            converged = True
            break
        dev = dev_new

    # a deviance this close to zero means the classes separated; the fitted
    # probabilities are saturated and beta is off to infinity
    if dev < 1e-8 * float(w.sum()):
        converged = False
    return LogisticFit(beta=beta, converged=converged, iterations=iterations,
                       final_deviance=dev)


def qr_design(x: np.ndarray) -> np.ndarray:
    """Intercept-plus-covariate design for the selection model."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(x.shape[0]), x])


def misspecify_design(x: np.ndarray) -> np.ndarray:
    """Deliberately wrong selection design: intercept and squared covariate only."""
    x = as_1d_float(x, "x")
    return np.column_stack([np.ones(x.shape[0]), x ** 2])


def estimate_pseudo_propensity(X_sample: np.ndarray, X_synth: np.ndarray,
                               multiplicity: np.ndarray) -> PropensityAssignment:
    """Selection odds for sample and synthetic rows from the stacked fit.

    ``X_sample`` and ``X_synth`` must share a column layout.  Synthetic rows
    enter with their multiplicities as case-weights, which is
    likelihood-identical to physically replicating them.  Fitted
    probabilities are clipped to [1e-6, 1 - 1e-6] before the odds transform
    so downstream inverse-weighting never divides by zero.
    """
    X_sample = as_2d_float(X_sample, "X_sample")
    X_synth = as_2d_float(X_synth, "X_synth")
    if X_sample.shape[1] != X_synth.shape[1]:
        raise EstimationError("sample and synthetic designs have different columns")
    mult = as_1d_float(multiplicity, "multiplicity")
    if mult.shape[0] != X_synth.shape[0]:
        raise EstimationError("multiplicity length does not match synthetic rows")
    if X_sample.shape[0] == 0 or X_synth.shape[0] == 0:
        raise DegenerateInputError("stacked fit needs rows in both classes")

    X = np.vstack([X_sample, X_synth])
    delta = np.concatenate([np.ones(X_sample.shape[0]), np.zeros(X_synth.shape[0])])
    w = np.concatenate([np.ones(X_sample.shape[0]), mult])
    fit = fit_logistic(X, delta, case_weights=w)

    def odds(design: np.ndarray) -> np.ndarray:
        p = expit(design @ fit.beta)
        p = np.clip(p, PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP)
        return p / (1.0 - p)

    return PropensityAssignment(
        pi_hat=odds(X_synth),
        pi_hat_sample=odds(X_sample),
        beta=fit.beta,
        converged=fit.converged,
    )
