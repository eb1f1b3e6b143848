"""Exception types shared across the package.

Everything raised on bad input or a failed numerical contract derives from
SigntrackError so callers (and the CLI) can map failures to exit codes
without string matching.
"""

from __future__ import annotations


class SigntrackError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SigntrackError):
    """Invalid configuration input (bad value, unknown key, missing field)."""


class NegativeOffDiagonal(ConfigError):
    """Generator matrix has a negative off-diagonal entry."""

    def __init__(self, row: int, col: int, value: float):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(
            f"generator entry ({row}, {col}) = {value!r} is negative; "
            "off-diagonal rates must be >= 0"
        )


class RowSumNonzero(ConfigError):
    """Generator matrix row does not sum to zero."""

    def __init__(self, row: int, total: float):
        self.row = row
        self.total = total
        super().__init__(
            f"generator row {row} sums to {total!r}; rows must sum to 0 "
            "within 1e-12"
        )


class NotIrreducible(ConfigError):
    """Generator's positive-rate graph is not strongly connected."""

    def __init__(self, detail: str = ""):
        super().__init__(
            "generator is not irreducible" + (f": {detail}" if detail else "")
        )


class SingularSystem(SigntrackError):
    """A linear solve needed by the caller has no reliable solution."""


class SingularLyapunov(SingularSystem):
    """Lyapunov equation is singular (some eigenvalue pair sums to zero)."""


class DimensionMismatch(ConfigError):
    """Operands have incompatible shapes."""


class NonGaussianClosedForm(ConfigError):
    """Closed-form effective matrix requested for a non-Gaussian model."""


class MonteCarloVarianceTooHigh(SigntrackError):
    """Monte Carlo estimate's standard error exceeds the allowed fraction."""

    def __init__(self, stderr: float, limit: float):
        self.stderr = stderr
        self.limit = limit
        super().__init__(
            f"Monte Carlo standard error {stderr:.3e} exceeds limit {limit:.3e}; "
            "increase the sample count"
        )


class NotPositiveSemidefinite(SigntrackError):
    """Matrix expected to be PSD has an eigenvalue below -1e-10."""

    def __init__(self, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"matrix has eigenvalue {min_eigenvalue!r} below the PSD tolerance"
        )


class DivergenceDetected(SigntrackError):
    """A filter iterate left the configured norm guard."""

    def __init__(self, step: int, norm: float, replication: int | None = None):
        self.step = step
        self.norm = norm
        self.replication = replication
        where = f"step {step}"
        if replication is not None:
            where += f", replication {replication}"
        super().__init__(f"estimate norm {norm:.3e} exceeded the guard at {where}")


class UnknownState(ConfigError):
    """State index outside the regime's state set."""

    def __init__(self, index: int, m0: int):
        self.index = index
        self.m0 = m0
        super().__init__(f"state index {index} outside 0..{m0 - 1}")


class OutOfHorizon(SigntrackError):
    """Interpolation time lies outside the simulated horizon."""

    def __init__(self, t: float, horizon: float):
        self.t = t
        self.horizon = horizon
        super().__init__(f"t = {t!r} is outside the simulated horizon [0, {horizon!r})")
