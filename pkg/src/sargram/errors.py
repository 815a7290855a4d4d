"""Exception types shared across the package."""


class SargramError(Exception):
    """Base class for all package errors."""


# -- geometry ---------------------------------------------------------------

class NonConvergence(SargramError):
    """An iterative solver failed to reach its tolerance within its cap."""


class NoZeroDoppler(SargramError):
    """No zero-Doppler time exists on (or just beyond) the platform track."""


class NoIntersection(SargramError):
    """The range sphere does not reach the requested height surface."""


class OutOfTrackBounds(SargramError):
    """Requested time lies beyond the trajectory's allowed extrapolation."""


class DegenerateGeometry(SargramError):
    """Stereo intersection geometry is too ill-conditioned to solve."""


# -- raster / file formats --------------------------------------------------

class MalformedHeader(SargramError):
    """Grid file header fails validation."""


class TruncatedPayload(SargramError):
    """Grid file payload is shorter than the header promises."""


class DimensionOverflow(SargramError):
    """Grid dimensions exceed supported limits."""


class MissingField(SargramError):
    """A required manifest field is absent."""

    def __init__(self, field: str):
        self.field = field
        super().__init__(f"manifest is missing required field '{field}'")


class InconsistentTrajectory(SargramError):
    """Trajectory sample times are not strictly increasing."""


# -- tiling / matching ------------------------------------------------------

class PatchLargerThanImage(SargramError):
    """Requested patch dimensions exceed the image."""


class PatchTooSmall(SargramError):
    """Patch is too small for the requested pyramid configuration."""


# -- bridge protocol --------------------------------------------------------

class IoFailure(SargramError):
    """Filesystem operation of the match protocol failed."""


class Timeout(SargramError):
    """No response arrived within the allotted time."""


class MalformedResponse(SargramError):
    """A matcher response violates the protocol contract."""


class SpawnFailure(SargramError):
    """External matcher process could not be started or died unproductively."""


# -- reconstruction / evaluation --------------------------------------------

class EmptyFusion(SargramError):
    """No points available to grid."""


class InsufficientOverlap(SargramError):
    """Too few co-located valid cells to calibrate."""


class DimensionMismatch(SargramError):
    """Grids passed to a loss or metric differ in shape."""


class NoOverlap(SargramError):
    """Measured and reference grids share no valid cells."""


class SplitLeakage(SargramError):
    """A test-area image pair leaks into the train or validation split."""


class FootprintMiss(SargramError):
    """A synthetic track cannot image the requested extent."""
