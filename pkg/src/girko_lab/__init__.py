"""Numerical laboratory for the spectrum of ``X + A``.

``X`` is an i.i.d. noise matrix and ``A`` a deterministic shift. The package
collects dense linear algebra with checked conventions, hermitization
identities, the matrix Dyson equation, deterministic per-matrix statistics
and reproducible Monte Carlo experiments on eigenvalues and singular values.
"""
__version__ = '0.1.0'

from . import (errors, linalg, ensembles, hermitization, mde, spectral,  # noqa: F401
               montecarlo)
from .errors import GirkoLabError  # noqa: F401
