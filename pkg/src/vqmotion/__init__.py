"""Quantized latent motion control for a planar simulated character."""

import os

# Pin BLAS to one thread before numpy loads anywhere in the package. The
# models here are small enough that threading only adds scheduling noise,
# and single-threaded kernels keep every run bitwise reproducible.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
