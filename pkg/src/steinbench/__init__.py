"""steinbench: explicit normal/gamma approximation bounds with verification.

The package computes explicit Wasserstein / total-variation / gamma-target
distance bounds for sums, quadratic forms and multiple stochastic integrals
of independent random variables, and verifies them against Monte Carlo
estimates, density convolutions and brute-force algebraic oracles.
"""

from . import bounds, chaos, distributions, verify  # noqa: F401
from .errors import SteinbenchError  # noqa: F401

__version__ = "0.1.0"
