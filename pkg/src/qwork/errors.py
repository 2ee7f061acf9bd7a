"""Exception hierarchy for physics guards.

Every guard failure carries the guard name and the offending quantity so the
command-line driver can report both and map the failure to exit code 1.
Violated preconditions on plain inputs raise ``ValueError`` instead.
"""


class QuenchError(Exception):
    """Base class for physics guard failures."""

    guard = "physics-guard"

    def __init__(self, message, quantity=None):
        super().__init__(message)
        self.quantity = quantity

    def __str__(self):
        msg = super().__str__()
        if self.quantity is not None:
            return f"{self.guard}: {msg} (offending quantity: {self.quantity!r})"
        return f"{self.guard}: {msg}"


class TemperatureError(QuenchError):
    guard = "temperature-too-high"


class UnboundedSpectrumError(QuenchError):
    guard = "unbounded-spectrum"


class CapExceededError(QuenchError):
    guard = "hard-cap"


class TruncationError(QuenchError):
    guard = "truncation"


class SeriesOverflowError(QuenchError):
    guard = "series-overflow"


class BranchTrackingError(QuenchError):
    guard = "branch-tracking"


class DegenerateError(QuenchError):
    guard = "degenerate"


class EigensolverError(QuenchError):
    guard = "eigensolver"


class GridError(QuenchError):
    guard = "grid"
