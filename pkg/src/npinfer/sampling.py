"""Sample draws and design-respecting bootstrap replication.

The reference survey is a stratified two-stage selection: PSUs by
probability-proportional-to-size within stratum, SSUs by pps within each
selected PSU.  The non-probability sample is Poisson sampling on the unit
selection probabilities.  Replication for the reference sample follows the
rescaling cluster bootstrap (m_h - 1 PSUs redrawn with replacement per
stratum, weights scaled by m_h/(m_h - 1)); the non-probability sample is
resampled by a plain with-replacement bootstrap.

Row order inside every structure is deterministic (strata ascending, PSUs
ascending, then original row order), so a fixed generator state reproduces
byte-identical samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_1d_float
from .errors import DataError
from .population import FinitePopulation
from .pps import systematic_pps


@dataclass
class NonProbSample:
    """Rows of the non-probability sample (or a bootstrap resample of it).

    ``x`` is 1-D in simulation; user-supplied data may carry several
    covariate columns, in which case ``x`` has shape (n, p).  ``stratum`` and
    ``logw`` are design covariates known in simulation and absent for user
    data.
    """

    x: np.ndarray
    y: np.ndarray
    stratum: np.ndarray | None = None
    logw: np.ndarray | None = None
    unit_idx: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    def take(self, idx: np.ndarray) -> "NonProbSample":
        return NonProbSample(
            x=self.x[idx],
            y=self.y[idx],
            stratum=None if self.stratum is None else self.stratum[idx],
            logw=None if self.logw is None else self.logw[idx],
            unit_idx=None if self.unit_idx is None else self.unit_idx[idx],
        )


@dataclass
class ProbabilitySample:
    """Reference survey rows with their design bookkeeping.

    ``weight`` is the design weight (inverse realized inclusion
    probability); ``logw`` is the log reference-weight covariate used by the
    outcome analysis, populated in simulation only.
    """

    stratum: np.ndarray
    psu: np.ndarray
    weight: np.ndarray
    x: np.ndarray
    logw: np.ndarray | None = None
    y: np.ndarray | None = None
    unit_idx: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    def strata(self) -> np.ndarray:
        return np.unique(self.stratum)

    def total_psus(self) -> int:
        pairs = np.stack([self.stratum, self.psu], axis=1)
        return int(np.unique(pairs, axis=0).shape[0])


@dataclass
class BootstrapReplicate:
    """One rescaled replicate of the reference sample.

    ``weight`` holds the rescaled weights whose sum is ``N_hat``;
    ``weight_norm`` is the same vector scaled so it sums to the population
    size (the urn operates on that scale).  ``n_star`` records the
    one-PSU-per-stratum-removed size convention n_R - H of the source sample;
    the number of physical rows is ``len(weight)`` and is what resampling
    arithmetic uses.
    """

    x: np.ndarray
    weight: np.ndarray
    weight_norm: np.ndarray
    n_star: int
    N_hat: float
    N: int
    stratum: np.ndarray | None = None
    logw: np.ndarray | None = None
    y: np.ndarray | None = None
    unit_idx: np.ndarray | None = None

    @property
    def n_rows(self) -> int:
        return int(self.weight.shape[0])


def poisson_indices(pop: FinitePopulation, rng: np.random.Generator) -> np.ndarray:
    """Unit indices selected by one Poisson draw on the unit probabilities."""
    u = rng.random(pop.N)
    return np.flatnonzero(u < pop.pi_a)


def nonprob_from_indices(pop: FinitePopulation, idx: np.ndarray, outcome: str) -> NonProbSample:
    y = pop.y_cont if outcome == "continuous" else pop.y_bin
    return NonProbSample(
        x=pop.x[idx],
        y=y[idx],
        stratum=pop.stratum[idx],
        logw=np.log(pop.w_ref[idx]),
        unit_idx=np.asarray(idx, dtype=np.int64),
    )


def draw_poisson_sample(pop: FinitePopulation, rng: np.random.Generator,
                        outcome: str = "continuous") -> NonProbSample:
    return nonprob_from_indices(pop, poisson_indices(pop, rng), outcome)


def reference_indices(pop: FinitePopulation, m_h: int, n_hj: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Unit indices of one stratified two-stage pps draw, in row order.

    Draw order is strata ascending; within a stratum the PSU stage consumes
    randomness first, then the SSU stage per selected PSU in ascending
    cluster order.
    """
    if m_h > pop.M_h:
        raise DataError(f"m_h={m_h} exceeds the {pop.M_h} PSUs per stratum")
    if n_hj > pop.N_hj:
        raise DataError(f"n_hj={n_hj} exceeds the {pop.N_hj} SSUs per cluster")
    shifted = pop.mos_psu.reshape(pop.H, pop.M_h) + pop.stratum_shift[:, None]
    chunks: list[np.ndarray] = []
    for h in range(pop.H):
        local = systematic_pps(shifted[h], m_h, rng)
        for j in local:
            cluster_id = h * pop.M_h + int(j)
            first = cluster_id * pop.N_hj
            mos = pop.mos_ssu[first:first + pop.N_hj]
            picked = systematic_pps(mos, n_hj, rng)
            chunks.append(first + picked)
    return np.concatenate(chunks)


def reference_from_indices(pop: FinitePopulation, idx: np.ndarray,
                           outcome: str | None = "continuous") -> ProbabilitySample:
    y = None
    if outcome is not None:
        y = (pop.y_cont if outcome == "continuous" else pop.y_bin)[idx]
    return ProbabilitySample(
        stratum=pop.stratum[idx],
        psu=pop.cluster[idx],
        weight=pop.design_weight[idx],
        x=pop.x[idx],
        logw=np.log(pop.w_ref[idx]),
        y=y,
        unit_idx=np.asarray(idx, dtype=np.int64),
    )


def draw_reference_sample(pop: FinitePopulation, m_h: int, n_hj: int,
                          rng: np.random.Generator,
                          outcome: str | None = "continuous") -> ProbabilitySample:
    return reference_from_indices(pop, reference_indices(pop, m_h, n_hj, rng), outcome)


def srs_bootstrap(sa: NonProbSample, rng: np.random.Generator) -> NonProbSample:
    """With-replacement resample of the same size."""
    if sa.n == 0:
        raise DataError("cannot bootstrap an empty sample")
    idx = rng.integers(0, sa.n, size=sa.n)
    return sa.take(idx)


def _stratum_psu_layout(s: ProbabilitySample) -> list[tuple[int, list[np.ndarray]]]:
    """Per stratum (ascending), the row-index arrays of its PSUs (ascending)."""
    layout = []
    for h in np.unique(s.stratum):
        in_h = np.flatnonzero(s.stratum == h)
        psus = np.unique(s.psu[in_h])
        rows = [in_h[s.psu[in_h] == j] for j in psus]
        layout.append((int(h), rows))
    return layout


def rao_wu_bootstrap(s: ProbabilitySample, N: int, rng: np.random.Generator) -> BootstrapReplicate:
    """Rescaling cluster bootstrap of a stratified multistage sample.

    Per stratum, m_h - 1 of the sampled PSUs are redrawn with replacement
    (uniformly).  Every SSU row of a drawn PSU enters the replicate once per
    draw, with weight w * m_h/(m_h - 1), so the expected weight total equals
    the original weight total.  The replicate drops strata/PSU structure:
    rows are exchangeable slots from there on.
    """
    layout = _stratum_psu_layout(s)
    picked: list[np.ndarray] = []
    factors: list[float] = []
    for h, rows in layout:
        m = len(rows)
        if m < 2:
            raise DataError(f"stratum {h} has a single PSU; replication needs at least two")
        draws = rng.integers(0, m, size=m - 1)
        counts = np.bincount(draws, minlength=m)
        factor = m / (m - 1.0)
        for j, c in enumerate(counts):
            for _ in range(int(c)):
                picked.append(rows[j])
                factors.append(factor)
    idx = np.concatenate(picked)
    fac = np.repeat(np.asarray(factors), [len(p) for p in picked])
    weight = s.weight[idx] * fac
    N_hat = float(weight.sum())
    if N_hat <= 0.0:
        raise DataError("replicate weight total is not positive")
    weight_norm = weight * (float(N) / N_hat)
    return BootstrapReplicate(
        x=s.x[idx],
        weight=weight,
        weight_norm=weight_norm,
        n_star=s.n - len(layout),
        N_hat=N_hat,
        N=int(N),
        stratum=s.stratum[idx],
        logw=None if s.logw is None else s.logw[idx],
        y=None if s.y is None else s.y[idx],
        unit_idx=None if s.unit_idx is None else s.unit_idx[idx],
    )


def design_ignoring_replicate(s: ProbabilitySample, N: int) -> BootstrapReplicate:
    """The ablation replicate: the sample itself, design weights unrescaled.

    No PSU resampling takes place, so across b the reference side contributes
    no variation; downstream variance then understates the true design
    variance whenever clustering matters.
    """
    weight = as_1d_float(s.weight).copy()
    N_hat = float(weight.sum())
    if N_hat <= 0.0:
        raise DataError("sample weight total is not positive")
    layout = _stratum_psu_layout(s)
    return BootstrapReplicate(
        x=s.x.copy(),
        weight=weight,
        weight_norm=weight * (float(N) / N_hat),
        n_star=s.n - len(layout),
        N_hat=N_hat,
        N=int(N),
        stratum=s.stratum.copy(),
        logw=None if s.logw is None else s.logw.copy(),
        y=None if s.y is None else s.y.copy(),
        unit_idx=None if s.unit_idx is None else s.unit_idx.copy(),
    )
