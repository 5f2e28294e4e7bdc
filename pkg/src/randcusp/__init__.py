"""Random cusp forms for SL2(Z): kernels, sampling and norm statistics."""

__version__ = "0.1.0"
