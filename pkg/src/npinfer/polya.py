"""Synthetic populations from a weighted Polya posterior urn.

A replicate of k rows with weights summing to N is completed to a population
of N by N - k sequential draws.  At each draw, row i is selected with
probability proportional to l_i * alpha + w_i - 1, where l_i counts previous
selections of i and alpha = (N - k)/k; the selected row's score rises by
alpha.  The initial scores w_i - 1 sum to N - k, so the selection
probabilities are normalized by construction, and the finished urn holds each
row 1 + (times drawn) times, totalling N exactly.

The mean multiplicity of row i over repeated syntheses equals w_i (the urn is
the predictive scheme of a Dirichlet posterior centred on the weight shares),
which is what makes the completed populations design-consistent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateInputError
from .sampling import BootstrapReplicate


class FenwickTree:
    """Prefix sums over nonnegative float scores with O(log n) update/search."""

    __slots__ = ("size", "tree")

    def __init__(self, values: np.ndarray) -> None:
        n = len(values)
        self.size = n
        tree = np.zeros(n + 1)
        tree[1:] = values
        for i in range(1, n + 1):
            parent = i + (i & -i)
            if parent <= n:
                tree[parent] += tree[i]
        self.tree = tree

    def add(self, i: int, delta: float) -> None:
        i += 1
        tree = self.tree
        n = self.size
        while i <= n:
            tree[i] += delta
            i += i & -i

    def total(self) -> float:
        i = self.size
        tree = self.tree
        acc = 0.0
        while i > 0:
            acc += tree[i]
            i -= i & -i
        return acc

    def search(self, target: float) -> int:
        """Smallest index i with prefix_sum(0..i) > target."""
        pos = 0
        step = 1
        n = self.size
        tree = self.tree
        while step * 2 <= n:
            step *= 2
        while step > 0:
            nxt = pos + step
            if nxt <= n and tree[nxt] <= target:
                target -= tree[nxt]
                pos = nxt
            step //= 2
        return min(pos, n - 1)


@dataclass
class SyntheticPopulation:
    """A completed population: replicate rows with multiplicity counts."""

    x: np.ndarray
    multiplicity: np.ndarray
    total: int
    source_b: int = -1
    source_l: int = -1
    degenerate: bool = False
    stratum: np.ndarray | None = None
    logw: np.ndarray | None = None

    @property
    def n_rows(self) -> int:
        return int(self.multiplicity.shape[0])


def floor_weights(w: np.ndarray, N: float) -> np.ndarray:
    """Floor weights at 1, rescaling the excesses above 1 to keep the sum.

    The urn scores are w - 1 and must be nonnegative; rows whose normalized
    weight fell below 1 get exactly 1 and the remaining rows' excesses are
    scaled by a common factor so the total stays N.
    """
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise DataError("weights must be positive and finite")
    low = w < 1.0
    if not low.any():
        return w.copy()
    k = w.shape[0]
    excess = w - 1.0
    pool = float(excess[~low].sum())
    target = float(N) - k
    if pool <= 0.0 or target <= 0.0:
        raise DegenerateInputError("no weight mass above 1 to redistribute")
    out = np.ones(k)
    out[~low] = 1.0 + excess[~low] * (target / pool)
    return out


def polya_synthesize(rep: BootstrapReplicate, N: int, rng: np.random.Generator,
                     source_b: int = -1, source_l: int = -1) -> SyntheticPopulation:
    """Complete a replicate to a population of exactly N via the weighted urn."""
    k = rep.n_rows
    if k == 0:
        raise DataError("replicate is empty")
    N = int(N)
    if N <= k:
        # Nothing to draw; the replicate itself stands in, flagged.
        return SyntheticPopulation(
            x=rep.x.copy(),
            multiplicity=np.ones(k, dtype=np.int64),
            total=k,
            source_b=source_b,
            source_l=source_l,
            degenerate=True,
            stratum=None if rep.stratum is None else rep.stratum.copy(),
            logw=None if rep.logw is None else rep.logw.copy(),
        )

    w = np.asarray(rep.weight_norm, dtype=float)
    total_w = float(w.sum())
    if total_w <= 0.0:
        raise DataError("replicate weights must have positive total")
    w = w * (N / total_w)
    w = floor_weights(w, N)

    alpha = (N - k) / k
    scores = w - 1.0
    total = float(scores.sum())
    if abs(total - (N - k)) > 1e-8 * max(1.0, N - k):
        raise DataError("urn scores are not normalized; weight preparation failed")

    tree = FenwickTree(scores)
    counts = np.zeros(k, dtype=np.int64)
    draws = N - k
    uniforms = rng.random(draws)
    running = total
    for t in range(draws):
        i = tree.search(uniforms[t] * running)
        counts[i] += 1
        tree.add(i, alpha)
        running += alpha

    multiplicity = counts + 1
    assert int(multiplicity.sum()) == N
    return SyntheticPopulation(
        x=rep.x.copy(),
        multiplicity=multiplicity,
        total=N,
        source_b=source_b,
        source_l=source_l,
        degenerate=False,
        stratum=None if rep.stratum is None else rep.stratum.copy(),
        logw=None if rep.logw is None else rep.logw.copy(),
    )


def initial_selection_weights(rep: BootstrapReplicate, N: int) -> np.ndarray:
    """First-draw selection probabilities (w - 1)/(N - k); sums to 1."""
    k = rep.n_rows
    if N <= k:
        raise DegenerateInputError("population size must exceed the replicate size")
    w = np.asarray(rep.weight_norm, dtype=float)
    w = floor_weights(w * (N / float(w.sum())), N)
    return (w - 1.0) / (N - k)


def expected_frequency_check(rep: BootstrapReplicate, N: int, draws: int,
                             rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo mean multiplicity per row across repeated syntheses."""
    if draws <= 0:
        raise DegenerateInputError("draws must be at least 1")
    acc = np.zeros(rep.n_rows)
    for _ in range(draws):
        acc += polya_synthesize(rep, N, rng).multiplicity
    return acc / draws
