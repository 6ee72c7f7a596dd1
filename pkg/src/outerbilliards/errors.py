"""Exception types shared by all modules."""


class BilliardError(Exception):
    """Base class for every error raised by the package."""


class OnSingularity(BilliardError):
    """A point lies on (or within tolerance of) a discontinuity line."""


class Ambiguous(OnSingularity):
    """Two distinct support points tie; the point sits on a singular line."""


class InsideShape(BilliardError):
    """The point is inside the billiard table, where the map is undefined."""


class WrongRegion(BilliardError):
    """An angle lies outside the band where a region formula applies."""


class RegionExit(BilliardError):
    """An iterate left the region in which a measurement was requested."""


class InsufficientRange(BilliardError):
    """Too few sample radii for a slope fit."""


class ResidualTooLarge(BilliardError):
    """A closed form and its defining equation disagree."""


class NoConvergence(BilliardError):
    """An iterative solver did not converge."""


class SingularOrbit(BilliardError):
    """An orbit hit the table or a singular line while being followed."""


class MaxStepsExceeded(BilliardError):
    """An orbit did not return within the step budget."""


class BandViolation(BilliardError):
    """A return-map state lies outside the band where a passage formula holds."""


class ConditioningFailure(BilliardError):
    """A polynomial fit is too poorly determined to be trusted."""


class NotElliptic(BilliardError):
    """The linear part at a fixed point is not elliptic."""


class Resonance(BilliardError):
    """A low-order resonance makes the normal form ill defined."""


class OrbitEscaped(BilliardError):
    """An orbit left the neighbourhood it was supposed to stay in."""


class OnBoundary(BilliardError):
    """A sawtooth state sits on the boundary between continuity domains."""


class NotClosed(BilliardError):
    """Successive rotations of a polygon edge do not close up."""


class EnergyTooLow(BilliardError):
    """A Fermi-Ulam state has action below the validity threshold."""


class ConfigError(BilliardError):
    """Invalid experiment configuration."""
