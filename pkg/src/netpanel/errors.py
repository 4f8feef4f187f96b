"""Exception types shared across the package.

The command-line layer maps these onto process exit codes, so library code
should raise the most specific type that applies rather than bare
``RuntimeError``/``ValueError``.
"""

from __future__ import annotations


class DataError(ValueError):
    """Input data violates a documented contract (non-positive levels,
    ragged panels, malformed CSV, calendar gaps)."""


class ConfigError(ValueError):
    """A configuration file or CLI flag combination is invalid."""


class NumericError(RuntimeError):
    """A numerical routine failed to produce a usable result
    (non-convergence, overflow, no admissible candidate)."""


class StationarityError(NumericError):
    """Requested dynamics are explosive: the companion spectral radius is
    at or above one."""

    def __init__(self, radius: float):
        self.radius = float(radius)
        super().__init__(
            f"autoregressive dynamics are non-stationary "
            f"(companion spectral radius {self.radius:.6g} >= 1)"
        )


class SingularityError(RuntimeError):
    """The least-squares design matrix is rank deficient.

    ``columns`` names the offending regressor columns so the caller can see
    which lag/stage terms are collinear on the given network.
    """

    def __init__(self, columns: list[str]):
        self.columns = list(columns)
        names = ", ".join(self.columns)
        super().__init__(f"rank-deficient design matrix; offending columns: {names}")
