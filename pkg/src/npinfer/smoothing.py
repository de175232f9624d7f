"""Penalized partially linear regression for outcome prediction.

A fit combines an unpenalized linear block with one of four propensity
terms:

* ``GP``        kernel expansion in g = log of the estimated selection odds,
                with a Matern-type covariance and a roughness penalty
                lambda * v' K v;
* ``PSPLINE``   cubic truncated-power spline in g with a ridge penalty on
                the truncated coefficients;
* ``LWP``       the single unpenalized column 1/propensity;
* ``PLAIN``     no propensity term at all.

The smoothing parameter is chosen by generalized cross-validation over a
fixed log-spaced grid.  The identity link solves penalized normal equations
directly; the logit link wraps the same penalized solve in reweighted least
squares.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.special import expit, xlogy

from ._validation import as_1d_float, as_2d_float, require_finite
from .errors import DegenerateInputError, EstimationError

LAMBDA_GRID: tuple[float, ...] = tuple(np.logspace(-4.0, 4.0, 15))
DEFAULT_KNOTS = 10
GCV_EPS = 1e-6
KINDS = ("GP", "PSPLINE", "LWP", "PLAIN")
LINKS = ("identity", "logit")


@dataclass
class SmootherSpec:
    kind: str = "GP"
    link: str = "identity"
    lambda_grid: tuple[float, ...] = LAMBDA_GRID
    knots: int = DEFAULT_KNOTS

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise EstimationError(f"unknown smoother kind {self.kind!r}")
        if self.link not in LINKS:
            raise EstimationError(f"unknown link {self.link!r}")
        if self.kind in ("GP", "PSPLINE"):
            if len(self.lambda_grid) == 0:
                raise EstimationError("lambda grid must be nonempty")
            if list(self.lambda_grid) != sorted(self.lambda_grid):
                raise EstimationError("lambda grid must be sorted ascending")
            if any(lam <= 0.0 for lam in self.lambda_grid):
                raise EstimationError("lambda values must be positive")
        if self.kind == "PSPLINE" and self.knots < 4:
            raise EstimationError("cubic spline needs at least 4 knots")


@dataclass
class SmootherFit:
    kind: str
    link: str
    theta: np.ndarray
    v: np.ndarray
    lam: float | None
    rho: float | None
    centers: np.ndarray | None
    knot_locations: np.ndarray | None
    n_linear: int
    edf: float
    gcv: float | None
    sigma2_hat: float | None
    g_range: tuple[float, float] | None = None
    basis_scale: np.ndarray | None = None
    eta_range: tuple[float, float] | None = None


def matern_kernel(d, rho: float):
    """Correlation (1 + d/rho) * exp(-d/rho); 1 at d=0, decaying in d."""
    if rho <= 0.0:
        raise EstimationError("kernel range rho must be positive")
    r = np.asarray(d, dtype=float) / rho
    if np.any(r < 0.0):
        raise EstimationError("distances must be nonnegative")
    out = (1.0 + r) * np.exp(-r)
    if np.isscalar(d) or np.asarray(d).ndim == 0:
        return float(out)
    return out


def default_rho(inputs: np.ndarray) -> float:
    """Largest pairwise distance of the 1-D inputs (max minus min)."""
    g = as_1d_float(inputs, "inputs")
    if g.shape[0] < 2:
        raise DegenerateInputError("need at least two inputs for a kernel range")
    rho = float(g.max() - g.min())
    if rho <= 0.0:
        raise DegenerateInputError("all smoother inputs identical; no kernel range")
    return rho


def spline_knots(g: np.ndarray, knots: int) -> np.ndarray:
    """Interior knots evenly spaced on the observed range."""
    g = as_1d_float(g, "g")
    lo, hi = float(g.min()), float(g.max())
    if hi <= lo:
        raise DegenerateInputError("all smoother inputs identical; no knot layout")
    step = (hi - lo) / (knots + 1)
    return lo + step * np.arange(1, knots + 1)


def _gp_blocks(g: np.ndarray, centers: np.ndarray, rho: float) -> tuple[np.ndarray, np.ndarray]:
    cross = matern_kernel(np.abs(g[:, None] - centers[None, :]), rho)
    penalty = matern_kernel(np.abs(centers[:, None] - centers[None, :]), rho)
    return cross, penalty


def _spline_basis(g: np.ndarray, knot_locations: np.ndarray) -> np.ndarray:
    """Truncated cubic columns (g - kappa)_+^3, one per knot.

    The global part of the smooth is just the unpenalized linear slope in g
    (mirroring the kernel variant), so the smooth is linear below the first
    knot and all curvature carries the ridge penalty.
    """
    return np.clip(g[:, None] - knot_locations[None, :], 0.0, None) ** 3


def _basis_scale(trunc: np.ndarray) -> np.ndarray:
    """Per-column root mean square of the training basis.

    Raw truncated cubics grow like the cube of the input range, so on a wide
    range a single ridge parameter barely touches them while the unpenalized
    linear block absorbs huge cancelling coefficients; the fit then looks
    fine on the training inputs and explodes off them.  Normalizing every
    column to unit scale makes one lambda mean the same thing for each
    coefficient and prices that cancellation out of the solution.
    """
    scale = np.sqrt(np.mean(trunc ** 2, axis=0))
    return np.where(scale > 0.0, scale, 1.0)


def _assemble(spec: SmootherSpec, X_linear: np.ndarray, g: np.ndarray | None,
              centers: np.ndarray | None, rho: float | None,
              knot_locations: np.ndarray | None,
              basis_scale: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Unpenalized block, penalized block, penalty matrix for the spec kind."""
    if spec.kind == "PLAIN":
        return X_linear, None, None
    if g is None:
        raise EstimationError(f"kind {spec.kind} needs smoother inputs g")
    if spec.kind == "GP":
        cross, penalty = _gp_blocks(g, centers, rho)
        return np.column_stack([X_linear, g]), cross, penalty
    if spec.kind == "PSPLINE":
        trunc = _spline_basis(g, knot_locations)
        if basis_scale is not None:
            trunc = trunc / basis_scale
        return np.column_stack([X_linear, g]), trunc, np.eye(trunc.shape[1])
    # LWP: inverse propensity as one more unpenalized regressor
    if np.any(g <= 0.0):
        raise EstimationError("propensities must be positive for the inverse term")
    if float(g.max()) == float(g.min()):
        # constant propensity: the inverse column is collinear with the
        # intercept, same no-signal situation the other kinds reject
        raise DegenerateInputError("all smoother inputs identical; no inverse-term signal")
    return np.column_stack([X_linear, 1.0 / g]), None, None


def _solve_penalized(S: np.ndarray, b: np.ndarray, P: np.ndarray | None,
                     lam: float, m: int) -> tuple[np.ndarray, tuple, np.ndarray | None]:
    """Solve (S + lam*P_full) c = b; returns c, the Cholesky factor, and Sinv.

    P acts on the trailing m coefficients.  Near-singular systems get jitter
    on the penalized diagonal (1e-8 then 1e-6 of its mean diagonal), and as a
    last resort a small ridge on the whole system with a warning; a column
    that is identically zero in training (an unrepresented category) then
    resolves to a coefficient of essentially zero.

    Sinv (the solve of S's columns, whose trace is the effective degrees of
    freedom) is only materialized on the jitter and ridge paths, where the
    factored matrix is no longer exactly S + lam*P_full; on the clean path
    callers derive the trace from the factor alone, which costs one
    triangular solve against m columns instead of a full solve against q.
    """
    q = S.shape[0]
    M = S.copy()
    if P is not None and m > 0:
        M[q - m:, q - m:] += lam * P
    scale = max(float(np.trace(M)) / q, 1e-300)

    attempts: list[float] = [0.0]
    if P is not None and m > 0:
        pscale = max(float(np.trace(P)) / m, 1e-300)
        attempts += [1e-8 * pscale, 1e-6 * pscale]
    for jitter in attempts:
        Mj = M.copy()
        if jitter > 0.0:
            Mj[q - m:, q - m:] += lam * jitter * np.eye(m)
        try:
            factor = cho_factor(Mj, lower=True, check_finite=False)
            c = cho_solve(factor, b, check_finite=False)
            if np.all(np.isfinite(c)):
                if jitter > 0.0:
                    Sinv = cho_solve(factor, S, check_finite=False)
                    return c, factor, Sinv
                return c, factor, None
        except LinAlgError:
            continue
    warnings.warn("penalized system is singular; adding a whole-system ridge",
                  RuntimeWarning)
    Mj = M + 1e-8 * scale * np.eye(q)
    factor = cho_factor(Mj, lower=True, check_finite=False)
    c = cho_solve(factor, b, check_finite=False)
    Sinv = cho_solve(factor, S, check_finite=False)
    return c, factor, Sinv


def _penalty_root(P: np.ndarray) -> np.ndarray:
    """Symmetric factor H with P = H H', via the eigendecomposition.

    Tiny negative eigenvalues (roundoff in a Gram matrix) are clipped to
    zero, so the root reproduces P up to that noise.
    """
    eigval, eigvec = np.linalg.eigh(P)
    return eigvec * np.sqrt(np.clip(eigval, 0.0, None))


def _edf_from_factor(factor: tuple, lam: float, H_pad: np.ndarray | None) -> float:
    """Effective degrees of freedom trace(M^-1 S) without forming M^-1 S.

    With M = S + lam*P_full and P_full = H_pad H_pad', the trace identity
    trace(M^-1 S) = q - lam * ||L^-1 H_pad||_F^2 needs only a triangular
    solve against the m penalized columns.
    """
    q = factor[0].shape[0]
    if H_pad is None:
        return float(q)
    T = solve_triangular(factor[0], H_pad, lower=True, check_finite=False)
    return float(q) - lam * float(np.sum(T * T))


def _fit_identity(A: np.ndarray, Z: np.ndarray | None, P: np.ndarray | None,
                  Y: np.ndarray, w: np.ndarray,
                  grid: tuple[float, ...]) -> list[tuple[np.ndarray, np.ndarray, float | None, float, float | None, float | None]]:
    """Penalized least squares for every column of Y over the lambda grid.

    The factorization and the effective degrees of freedom at each lambda
    depend only on the design, so sharing them across response columns makes
    a multi-response fit barely costlier than a single one.  GCV (and hence
    the selected lambda) is still per column.
    """
    design = A if Z is None else np.column_stack([A, Z])
    m = 0 if Z is None else Z.shape[1]
    s = Y.shape[1]
    DtW = design.T * w
    S = DtW @ design
    Bmat = DtW @ Y
    n_eff = float(w.sum())

    H_pad = None
    if P is not None and m > 0:
        H_pad = np.vstack([np.zeros((design.shape[1] - m, m)), _penalty_root(P)])

    lambdas = list(grid) if m > 0 else [0.0]
    best_gcv = np.full(s, np.inf)
    best: list[tuple | None] = [None] * s
    for lam in lambdas:
        C, factor, Sinv = _solve_penalized(S, Bmat, P, lam, m)
        C = C.reshape(design.shape[1], s)
        resid = Y - design @ C
        rss = w @ (resid ** 2)
        edf = float(np.trace(Sinv)) if Sinv is not None else _edf_from_factor(factor, lam, H_pad)
        denom = n_eff - edf
        gcv = np.full(s, np.inf) if denom <= GCV_EPS else n_eff * rss / denom ** 2
        for j in range(s):
            if best[j] is None or gcv[j] < best_gcv[j]:
                best_gcv[j] = gcv[j]
                best[j] = (lam, C[:, j].copy(), edf, float(rss[j]), float(gcv[j]))
    out = []
    for j in range(s):
        lam, c, edf, rss_j, gcv_j = best[j]
        sigma2 = rss_j / max(n_eff - edf, 1.0)
        theta = c[:design.shape[1] - m]
        v = c[design.shape[1] - m:]
        out.append((theta, v, lam if m > 0 else None, edf,
                    gcv_j if m > 0 else None, sigma2))
    return out


def _fit_logit(A: np.ndarray, Z: np.ndarray | None, P: np.ndarray | None,
               y: np.ndarray, w: np.ndarray,
               grid: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray, float | None, float, float | None]:
    design = A if Z is None else np.column_stack([A, Z])
    m = 0 if Z is None else Z.shape[1]
    n_eff = float(w.sum())

    def deviance(p: np.ndarray) -> float:
        return float(-2.0 * np.sum(w * (xlogy(y, p) + xlogy(1.0 - y, 1.0 - p))))

    def penalty(c: np.ndarray, lam: float) -> float:
        if m == 0:
            return 0.0
        v = c[-m:]
        return float(lam * v @ P @ v)

    H_pad = None
    if P is not None and m > 0:
        H_pad = np.vstack([np.zeros((design.shape[1] - m, m)), _penalty_root(P)])

    lambdas = list(grid) if m > 0 else [0.0]
    best = None
    for lam in lambdas:
        c = np.zeros(design.shape[1])
        eta = design @ c
        p = expit(eta)
        obj = deviance(p) + penalty(c, lam)
        edf = float(design.shape[1])
        for _ in range(50):
            mu_var = np.clip(p * (1.0 - p), 1e-10, None)
            wt = w * mu_var
            z = eta + (y - p) / mu_var
            DtW = design.T * wt
            S = DtW @ design
            b = DtW @ z
            proposal, factor, Sinv = _solve_penalized(S, b, P, lam, m)
            step = proposal - c
            scale = 1.0
            for _ in range(30):
                cand = c + scale * step
                p_new = expit(design @ cand)
                obj_new = deviance(p_new) + penalty(cand, lam)
                if obj_new <= obj + 1e-12 * max(1.0, abs(obj)):
                    break
                scale *= 0.5
            else:
                cand, p_new, obj_new = c, p, obj
            c, p = cand, p_new
            eta = design @ c
            edf = float(np.trace(Sinv)) if Sinv is not None else _edf_from_factor(factor, lam, H_pad)
            if abs(obj - obj_new) <= 1e-8 * max(1.0, abs(obj)):
                obj = obj_new
                break
            obj = obj_new
        dev = deviance(p)
        denom = n_eff - edf
        gcv = np.inf if denom <= GCV_EPS else n_eff * dev / denom ** 2
        if best is None or gcv < best[0]:
            best = (gcv, lam, c, edf)
    gcv, lam, c, edf = best
    theta = c[:design.shape[1] - m]
    v = c[design.shape[1] - m:]
    return theta, v, (lam if m > 0 else None), edf, (gcv if m > 0 else None)


def fit_partially_linear_batch(spec: SmootherSpec, Y: np.ndarray | list[np.ndarray],
                               X_linear: np.ndarray, g: np.ndarray | None = None,
                               case_weights: np.ndarray | None = None) -> list[SmootherFit]:
    """Fit the partially linear model to one or several response columns.

    ``g`` carries the propensity input: log estimated odds for GP and
    PSPLINE, the estimated odds themselves for LWP (the reciprocal is taken
    internally), ignored for PLAIN.  For the identity link all columns share
    the design factorizations; smoothing parameters are still selected per
    column.
    """
    if isinstance(Y, list):
        Y = np.column_stack([as_1d_float(col, "y") for col in Y])
    else:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
    X_linear = as_2d_float(X_linear, "X_linear")
    require_finite(X_linear, "X_linear")
    require_finite(Y, "Y")
    if X_linear.shape[0] != Y.shape[0]:
        raise EstimationError("X_linear rows do not match the responses")
    if case_weights is None:
        w = np.ones(Y.shape[0])
    else:
        w = as_1d_float(case_weights, "case_weights")
        require_finite(w, "case_weights")
        if np.any(w < 0.0):
            raise EstimationError("case weights must be nonnegative")
    if spec.link == "logit" and not np.all((Y == 0.0) | (Y == 1.0)):
        raise EstimationError("logit link requires 0/1 responses")

    centers = rho = knot_locations = basis_scale = None
    if spec.kind != "PLAIN":
        if g is None:
            raise EstimationError(f"kind {spec.kind} needs smoother inputs g")
        g = as_1d_float(g, "g")
        require_finite(g, "g")
        if g.shape[0] != Y.shape[0]:
            raise EstimationError("g does not match the responses")
        if spec.kind == "GP":
            centers = np.unique(g)
            if centers.shape[0] < 2:
                raise DegenerateInputError("all smoother inputs identical; no kernel range")
            rho = default_rho(centers)
        elif spec.kind == "PSPLINE":
            knot_locations = spline_knots(g, spec.knots)
            basis_scale = _basis_scale(_spline_basis(g, knot_locations))

    A, Z, P = _assemble(spec, X_linear, g, centers, rho, knot_locations, basis_scale)
    if spec.link == "identity":
        solved = _fit_identity(A, Z, P, Y, w, spec.lambda_grid)
    else:
        solved = []
        for j in range(Y.shape[1]):
            theta, v, lam, edf, gcv = _fit_logit(A, Z, P, Y[:, j], w, spec.lambda_grid)
            solved.append((theta, v, lam, edf, gcv, None))

    fits = []
    g_range = None if g is None or spec.kind == "PLAIN" else (float(g.min()), float(g.max()))
    for theta, v, lam, edf, gcv, sigma2 in solved:
        eta_range = None
        if spec.kind == "PSPLINE":
            # a cubic tail has no data off the training support, and on a
            # narrow support the unpenalized block can carry large mutually
            # cancelling coefficients that only balance where the smoother
            # saw data; new points are therefore held inside the range of
            # training fitted values, the same boundary policy as the g clamp
            eta_train = A @ theta + (Z @ v if Z is not None else 0.0)
            eta_range = (float(eta_train.min()), float(eta_train.max()))
        fits.append(SmootherFit(
            kind=spec.kind,
            link=spec.link,
            theta=theta,
            v=v,
            lam=lam,
            rho=rho,
            centers=centers,
            knot_locations=knot_locations,
            n_linear=X_linear.shape[1],
            edf=edf,
            gcv=gcv,
            sigma2_hat=sigma2,
            g_range=g_range,
            basis_scale=basis_scale,
            eta_range=eta_range,
        ))
    return fits


def fit_partially_linear(spec: SmootherSpec, y: np.ndarray, X_linear: np.ndarray,
                         g: np.ndarray | None = None,
                         case_weights: np.ndarray | None = None) -> SmootherFit:
    """Single-response convenience wrapper around the batch fit."""
    return fit_partially_linear_batch(spec, as_1d_float(y, "y"), X_linear,
                                      g=g, case_weights=case_weights)[0]


def predict(fit: SmootherFit, X_linear_new: np.ndarray,
            g_new: np.ndarray | None = None) -> np.ndarray:
    """Evaluate a fit at new rows; logit link returns probabilities."""
    X = as_2d_float(X_linear_new, "X_linear_new")
    if X.shape[1] != fit.n_linear:
        raise EstimationError("linear block layout differs from the fit")
    if fit.kind == "PLAIN":
        eta = X @ fit.theta
    else:
        if g_new is None:
            raise EstimationError(f"kind {fit.kind} needs smoother inputs g")
        g = as_1d_float(g_new, "g_new")
        if g.shape[0] != X.shape[0]:
            raise EstimationError("g_new does not match X_linear_new")
        if fit.kind == "GP":
            cross = matern_kernel(np.abs(g[:, None] - fit.centers[None, :]), fit.rho)
            eta = np.column_stack([X, g]) @ fit.theta + cross @ fit.v
        elif fit.kind == "PSPLINE":
            # above the fitted range the truncated cubics keep growing with no
            # data support; hold the smooth at its boundary value there (below
            # the first knot the basis is already exactly linear)
            if fit.g_range is not None:
                g = np.clip(g, fit.g_range[0], fit.g_range[1])
            trunc = _spline_basis(g, fit.knot_locations)
            if fit.basis_scale is not None:
                trunc = trunc / fit.basis_scale
            eta = np.column_stack([X, g]) @ fit.theta + trunc @ fit.v
            if fit.eta_range is not None:
                eta = np.clip(eta, fit.eta_range[0], fit.eta_range[1])
        else:
            if np.any(g <= 0.0):
                raise EstimationError("propensities must be positive for the inverse term")
            eta = np.column_stack([X, 1.0 / g]) @ fit.theta
    if fit.link == "logit":
        return expit(eta)
    return eta
