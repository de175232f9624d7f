"""Probability-proportional-to-size selection primitives.

Selection is systematic on a uniformly random ordering of the units, which
realises the target first-order inclusion probabilities exactly.  Measures of
size large enough to push ``m * share`` above one are clamped to certain
selection and the remainder is redistributed proportionally.
"""
from __future__ import annotations

import numpy as np

from .errors import DataError

_ONE = 1.0 + 1e-12


def inclusion_probabilities(mos: np.ndarray, m: int) -> np.ndarray:
    """First-order inclusion probabilities for an ``m``-unit pps draw.

    Parameters
    ----------
    mos : array of positive measures of size.
    m : number of units to select, ``1 <= m <= len(mos)``.

    Returns
    -------
    Array summing to ``m`` with every entry in ``(0, 1]``.
    """
    mos = np.asarray(mos, dtype=float)
    n = mos.size
    if mos.ndim != 1 or n == 0:
        raise DataError("measure-of-size array must be one-dimensional and non-empty")
    if not np.all(np.isfinite(mos)) or np.any(mos <= 0):
        raise DataError("measures of size must be positive and finite")
    if not 1 <= m <= n:
        raise DataError(f"cannot select {m} units from {n}")

    pi = np.zeros(n)
    active = np.ones(n, dtype=bool)
    remaining = m
    # Each pass certain-selects the units whose proportional share exceeds one.
    while remaining > 0:
        share = mos[active] / mos[active].sum()
        cand = remaining * share
        if cand.max() <= _ONE:
            pi[active] = np.minimum(cand, 1.0)
            break
        idx = np.flatnonzero(active)[cand >= 1.0]
        pi[idx] = 1.0
        active[idx] = False
        remaining = m - int(np.count_nonzero(pi >= 1.0))
        if not active.any():
            break
    return pi


def systematic_pps(mos: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``m`` distinct indices, systematic pps on a random permutation.

    The realised first-order inclusion probability of unit ``i`` equals
    ``inclusion_probabilities(mos, m)[i]``, so Horvitz-Thompson weighting with
    the inverse of those probabilities is exactly unbiased.
    """
    pi = inclusion_probabilities(mos, m)
    n = pi.size
    perm = rng.permutation(n)
    cum = np.cumsum(pi[perm])
    targets = rng.random() + np.arange(m)
    pos = np.searchsorted(cum, targets, side="left")
    pos = np.minimum(pos, n - 1)
    chosen = perm[pos]
    if np.unique(chosen).size != m:  # cannot happen while every pi <= 1
        raise DataError("systematic selection produced duplicate units")
    return np.sort(chosen)
