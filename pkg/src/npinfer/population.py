"""Finite populations under a stratified two-stage reference design.

A population has H strata, M_h clusters (PSUs) per stratum and N_hj units
(SSUs) per cluster.  Cluster measures of size v1 ~ Exp(1) and unit measures
v2 ~ Uniform(1, 5) drive pps selection at both stages.  The log of the
reference weight enters the covariate equation and both outcome equations,
which is what makes the reference design informative for the analysis
variables.

Two weight scales coexist on purpose.  ``w_ref`` is the inverse of the
single-draw selection shares (PSU share within stratum times SSU share within
cluster); its log is centred near ``log(M_h * N_hj)`` and is the quantity the
covariate and outcome equations use.  ``design_weight`` is the inverse of the
realised inclusion probabilities for the (m_h, n_hj) design, so
Horvitz-Thompson totals built from a drawn sample are exactly unbiased and
the weight sum over a sample estimates N.  The two differ by the per-stage
sampling fractions.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from . import rng as streams
from .errors import CalibrationError, DegenerateInputError
from .pps import inclusion_probabilities

if TYPE_CHECKING:
    from .config import SimConfig

CONTINUOUS_NOISE_VARIANCE = 4.0
LOGISTIC_LATENT_VARIANCE = math.pi ** 2 / 3.0
PSU_RATIO_TARGET = 30.0
X_OFFSET = -7.0
CONTINUOUS_INTERCEPT = 1.0
BINARY_INTERCEPT = -7.0
STRATUM_SLOPE = -0.1
INTERACTION_SLOPE = 0.2
NOISE_CORRELATION = 0.5

SCENARIOS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "LIN": lambda x: np.asarray(x, dtype=float),
    "CUB": lambda x: (np.asarray(x, dtype=float) / 3.0) ** 3,
    "EXP": lambda x: np.exp(np.asarray(x, dtype=float) / 2.0) / 5.0,
    "SIN": lambda x: 5.0 * np.sin(np.pi * np.asarray(x, dtype=float) / 2.0),
}


def scenario_function(name: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {tuple(SCENARIOS)}") from None


class UnitRecord(NamedTuple):
    id: int
    stratum: int
    cluster: int
    x: float
    w_ref: float
    pi_A: float
    y_cont: float
    y_bin: float


@dataclass
class FinitePopulation:
    """Column-oriented population with its design bookkeeping.

    Per-unit arrays have length N; per-cluster arrays have length H * M_h.
    ``stratum`` doubles as the numeric design covariate d (0 .. H-1).
    """

    scenario: str
    seed: int
    N: int
    H: int
    M_h: int
    N_hj: int
    m_h: int
    n_hj: int
    stratum: np.ndarray
    cluster: np.ndarray
    psu_stratum: np.ndarray
    mos_psu: np.ndarray
    mos_ssu: np.ndarray
    stratum_shift: np.ndarray
    psu_share: np.ndarray
    ssu_share: np.ndarray
    psu_inclusion: np.ndarray
    ssu_inclusion: np.ndarray
    w_ref: np.ndarray
    design_weight: np.ndarray
    x: np.ndarray
    noise_scale: float
    gamma0: float
    gamma1: float
    pi_a: np.ndarray
    y_cont: np.ndarray
    y_bin: np.ndarray
    true_mean_continuous: float
    true_mean_binary: float
    icc: float

    def __len__(self) -> int:
        return self.N

    def unit(self, i: int) -> UnitRecord:
        return UnitRecord(
            id=int(i),
            stratum=int(self.stratum[i]),
            cluster=int(self.cluster[i]),
            x=float(self.x[i]),
            w_ref=float(self.w_ref[i]),
            pi_A=float(self.pi_a[i]),
            y_cont=float(self.y_cont[i]),
            y_bin=float(self.y_bin[i]),
        )

    def true_mean(self, outcome: str) -> float:
        if outcome == "continuous":
            return self.true_mean_continuous
        if outcome == "binary":
            return self.true_mean_binary
        raise KeyError(f"unknown outcome {outcome!r}")


def random_effect_scale(icc: float, residual_variance: float) -> float:
    """Cluster-effect standard deviation giving the requested intraclass correlation."""
    if not 0.0 <= icc < 1.0:
        raise ValueError("icc must lie in [0, 1)")
    return math.sqrt(icc * residual_variance / (1.0 - icc))


def compute_selection_probs(x: np.ndarray, intercept: float, slope: float) -> np.ndarray:
    """Logistic selection probabilities, stable for linear predictors up to +-700."""
    eta = intercept + slope * np.asarray(x, dtype=float)
    return expit(eta)


def calibrate_gamma0(x: np.ndarray, slope: float, target: float,
                     tol: float = 1e-6) -> float:
    """Intercept such that the selection probabilities sum to ``target``.

    The sum is strictly increasing in the intercept, so a sign-changing
    bracket always exists for 0 < target < len(x); it is located by doubling
    and resolved with Brent's method.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise CalibrationError("cannot calibrate on an empty covariate array")
    if not 0.0 < target < x.size:
        raise CalibrationError(f"target {target} must lie strictly between 0 and {x.size}")

    def gap(g: float) -> float:
        return float(expit(g + slope * x).sum() - target)

    lo, hi = -8.0, 8.0
    for _ in range(60):
        if gap(lo) < 0.0:
            break
        lo *= 2.0
    else:
        raise CalibrationError("no lower bracket for the selection intercept")
    for _ in range(60):
        if gap(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise CalibrationError("no upper bracket for the selection intercept")

    root = float(brentq(gap, lo, hi, xtol=1e-12, rtol=8.9e-16, maxiter=200))
    if abs(gap(root)) > tol * target:
        raise CalibrationError("selection intercept calibration did not reach tolerance")
    return root


def _stratum_shifts(v1: np.ndarray) -> np.ndarray:
    """Per-stratum offsets c making max/min of (c + v1) equal the ratio target.

    When the raw ratio is already below the target the offset is zero and the
    raw measures are used untouched.
    """
    vmax = v1.max(axis=1)
    vmin = v1.min(axis=1)
    c = (vmax - PSU_RATIO_TARGET * vmin) / (PSU_RATIO_TARGET - 1.0)
    return np.maximum(c, 0.0)


def _clamped_inclusions(mos: np.ndarray, m: int) -> np.ndarray:
    """Row-wise inclusion probabilities for groups laid out as a 2-D array."""
    cand = m * mos / mos.sum(axis=1, keepdims=True)
    if cand.max() <= 1.0:
        return cand
    out = cand.copy()
    for i in np.flatnonzero((cand > 1.0).any(axis=1)):
        out[i] = inclusion_probabilities(mos[i], m)
    return out


def generate_population(cfg: "SimConfig", seed: int, scenario: str | None = None) -> FinitePopulation:
    """Generate one finite population.

    Parameters
    ----------
    cfg : SimConfig
        Dimensions, sample sizes, selection slope and intraclass correlation.
    seed : int
        Root seed.  The draw order (v1, v2, covariate noise, cluster effects,
        outcome noise, binary uniforms) is fixed, so populations generated for
        different scenarios from the same seed share every random quantity and
        differ only through the scenario mean function.
    scenario : str, optional
        Mean-function name; defaults to the first configured scenario.
    """
    name = scenario if scenario is not None else cfg.scenarios[0]
    f = scenario_function(name)

    H, M_h, N_hj = cfg.H, cfg.M_h, cfg.N_hj
    M = H * M_h
    N = H * M_h * N_hj
    if N != cfg.N:
        raise DegenerateInputError("configured N does not match H * M_h * N_hj")

    gen = streams.stream(seed, streams.POPULATION)
    v1 = gen.exponential(1.0, size=M)
    v2 = gen.uniform(1.0, 5.0, size=N)
    eps_x = gen.standard_normal(N)
    cluster_effect = gen.standard_normal(M)
    eps_y = gen.standard_normal(N)
    binary_uniform = gen.random(N)

    psu_stratum = np.repeat(np.arange(H), M_h)
    cluster = np.repeat(np.arange(M), N_hj)
    stratum = psu_stratum[cluster]

    v1_rows = v1.reshape(H, M_h)
    shift = _stratum_shifts(v1_rows)
    shifted = v1_rows + shift[:, None]
    psu_share = (shifted / shifted.sum(axis=1, keepdims=True)).ravel()

    v2_rows = v2.reshape(M, N_hj)
    ssu_share = (v2_rows / v2_rows.sum(axis=1, keepdims=True)).ravel()

    psu_inclusion = _clamped_inclusions(shifted, cfg.m_h).ravel()
    ssu_inclusion = _clamped_inclusions(v2_rows, cfg.n_hj).ravel()

    w_ref = 1.0 / (psu_share[cluster] * ssu_share)
    design_weight = 1.0 / (psu_inclusion[cluster] * ssu_inclusion)

    log_w = np.log(w_ref)
    if cfg.x_noise_scale is not None:
        noise_scale = float(cfg.x_noise_scale)
    else:
        sd = float(log_w.std())
        noise_scale = sd * math.sqrt(1.0 / NOISE_CORRELATION ** 2 - 1.0)
    x = X_OFFSET + log_w + noise_scale * eps_x

    gamma0 = calibrate_gamma0(x, cfg.gamma1, float(cfg.n_A))
    pi_a = compute_selection_probs(x, gamma0, cfg.gamma1)

    d = stratum.astype(float)
    base = f(x) + log_w + STRATUM_SLOPE * d + INTERACTION_SLOPE * x * log_w

    u_cont = random_effect_scale(cfg.icc, CONTINUOUS_NOISE_VARIANCE) * cluster_effect
    mu_cont = CONTINUOUS_INTERCEPT + base + u_cont[cluster]
    y_cont = mu_cont + math.sqrt(CONTINUOUS_NOISE_VARIANCE) * eps_y

    u_bin = random_effect_scale(cfg.icc, LOGISTIC_LATENT_VARIANCE) * cluster_effect
    p_bin = expit(BINARY_INTERCEPT + base + u_bin[cluster])
    y_bin = (binary_uniform < p_bin).astype(float)

    return FinitePopulation(
        scenario=name,
        seed=int(seed),
        N=N,
        H=H,
        M_h=M_h,
        N_hj=N_hj,
        m_h=cfg.m_h,
        n_hj=cfg.n_hj,
        stratum=stratum,
        cluster=cluster,
        psu_stratum=psu_stratum,
        mos_psu=v1,
        mos_ssu=v2,
        stratum_shift=shift,
        psu_share=psu_share,
        ssu_share=ssu_share,
        psu_inclusion=psu_inclusion,
        ssu_inclusion=ssu_inclusion,
        w_ref=w_ref,
        design_weight=design_weight,
        x=x,
        noise_scale=noise_scale,
        gamma0=gamma0,
        gamma1=cfg.gamma1,
        pi_a=pi_a,
        y_cont=y_cont,
        y_bin=y_bin,
        true_mean_continuous=float(y_cont.mean()),
        true_mean_binary=float(y_bin.mean()),
        icc=cfg.icc,
    )


POPULATION_CSV_HEADER = ("id", "stratum", "cluster", "x", "w_ref", "pi_A", "y_cont", "y_bin")


def population_to_csv(pop: FinitePopulation, path: str) -> None:
    """Dump unit-level columns for audit; floats keep full precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(POPULATION_CSV_HEADER)
        for i in range(pop.N):
            writer.writerow((
                i,
                int(pop.stratum[i]),
                int(pop.cluster[i]),
                format(pop.x[i], ".17g"),
                format(pop.w_ref[i], ".17g"),
                format(pop.pi_a[i], ".17g"),
                format(pop.y_cont[i], ".17g"),
                format(pop.y_bin[i], ".17g"),
            ))
