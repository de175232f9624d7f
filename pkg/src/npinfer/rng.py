"""Deterministic random stream derivation.

Every stochastic stage draws from a counter-based generator keyed by the root
seed plus the logical coordinates of the work item (iteration, bootstrap
replicate, synthesis index).  Results therefore do not depend on scheduling or
on the number of worker processes.  The stage tags and the draw order inside
each stage are part of the reproducibility contract.
"""
from __future__ import annotations

import numpy as np

# Stage tags.  Appending logical indices after the tag keeps streams disjoint.
# The estimate and synthesize modes reuse the bootstrap/urn tags with
# iteration index 0, which is what makes a round trip through exported files
# reproduce a simulation iteration draw for draw.
POPULATION = 0
REFERENCE_DRAW = 1
NONPROB_DRAW = 2
SAMPLE_BOOT = 3
REFERENCE_BOOT = 4
POLYA = 5

STAGE_TAGS = {
    "population": POPULATION,
    "reference_draw": REFERENCE_DRAW,
    "nonprob_draw": NONPROB_DRAW,
    "sample_boot": SAMPLE_BOOT,
    "reference_boot": REFERENCE_BOOT,
    "polya": POLYA,
}


def stream(root_seed: int, *path: int) -> np.random.Generator:
    """Return the generator for ``(root_seed, *path)``.

    The same arguments always produce the same stream; distinct paths produce
    statistically independent streams (Philox keyed through ``SeedSequence``).
    """
    parts = [int(root_seed)] + [int(p) for p in path]
    if any(p < 0 for p in parts):
        raise ValueError("stream path components must be non-negative")
    ss = np.random.SeedSequence(parts)
    return np.random.Generator(np.random.Philox(ss))
