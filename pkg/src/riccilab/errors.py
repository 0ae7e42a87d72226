"""Exception types shared across the package."""


class RicciLabError(Exception):
    """Base class for all package errors."""


class NonPositiveMetric(RicciLabError):
    """phi <= 0 somewhere, or psi <= 0 at an interior non-pole node."""


class PoleRegularityViolation(RicciLabError):
    """Pole invariants (psi = 0, psi_s = +/-1, psi_ss = 0) fail beyond tolerance."""


class OracleMismatch(RicciLabError):
    """Fast-path curvature disagrees with the coordinate oracle beyond tolerance."""


class Extinction(RicciLabError):
    """An Einstein factor scale reached zero."""

    def __init__(self, message, extinction_time):
        super().__init__(message)
        self.extinction_time = extinction_time


class SingularChart(RicciLabError):
    """Oracle sample point too close to a chart singularity or domain edge."""


class UnsupportedTopology(RicciLabError):
    """Requested model class is deliberately excluded."""


class DomainTooSmall(RicciLabError):
    """A ball-sup predicate would need samples outside the profile's domain."""


class CoverageFailure(RicciLabError):
    """Greedy ball selection terminated without covering the domain."""

    def __init__(self, message, uncovered_point):
        super().__init__(message)
        self.uncovered_point = uncovered_point


class RadiusTooSmall(RicciLabError):
    """Ball cutoff requested with r < rbar/sqrt(K)."""


class SeparationViolation(RicciLabError):
    """The inner/outer ball split required by the glued cutoff cannot be realized."""


class DegenerateGrid(RicciLabError):
    """Non-positive arclength spacing."""


class BlowupDetected(RicciLabError):
    """Non-finite state or psi crossing zero away from a pole (neckpinch signal)."""

    def __init__(self, message, time=None, last_good=None):
        super().__init__(message)
        self.time = time
        self.last_good = last_good


class CoverMismatch(RicciLabError):
    """Trajectory bookkeeping was not run against the given cover."""


class SnapshotsTooSparse(RicciLabError):
    """Snapshot cadence too coarse for finite-difference time derivatives."""


class InsufficientSamples(RicciLabError):
    """Too few usable nodes in the fitting range."""


class AllBelowFloor(RicciLabError):
    """Every candidate value sits below the log-fit floor; decay holds vacuously."""


class ParseError(RicciLabError):
    """Config file failed to parse; message carries line/column from the parser."""


class ValidationError(RicciLabError):
    """Config value failed validation."""

    def __init__(self, field, message=""):
        super().__init__(f"{field}: {message}" if message else field)
        self.field = field
