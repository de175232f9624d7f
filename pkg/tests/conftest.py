import os

# Pin BLAS thread pools before numpy loads anywhere in the suite so that
# timing-sensitive tests and byte-identity checks see the same math kernels
# the CLI pins for itself.
for _var in (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(_var, "1")
