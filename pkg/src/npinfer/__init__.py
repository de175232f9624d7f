"""Finite-population inference for non-probability samples.

Combines a non-probability sample with a design-weighted reference survey:
bootstrap replication of the reference design, weighted Polya-urn completion
to synthetic populations, pseudo-propensity estimation by stacking, and
doubly robust prediction-model estimators combined across replicates.

The package root stays import-light so the command-line entry point can pin
threading environment variables before any numerical library loads; import
the submodules (``npinfer.harness``, ``npinfer.estimation``, ...) directly.
"""

__version__ = "0.1.0"
