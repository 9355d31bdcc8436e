"""Exception hierarchy for light-field pose estimation and rectification.

Every condition the library treats as unrecoverable in the current call is a
subclass of :class:`LfRectError`, so callers can catch the whole family or a
specific failure.  Functions that can tolerate a bad sample (resampling,
rendering) report it through masks instead of raising.
"""

__all__ = [
    "LfRectError",
    "ConfigError",
    "NonPositiveDepth",
    "DegenerateDisparity",
    "ZeroVector",
    "DegenerateSpread",
    "RankDeficient",
    "CoplanarDegeneracy",
    "SingularInput",
    "IllConditioned",
    "NumericalFailure",
    "InsufficientObservations",
    "BehindCamera",
    "ZeroBaseline",
    "CollinearConstruction",
    "ParallelRay",
    "DegenerateSegment",
    "NoOverlap",
    "OutOfAperture",
    "IndexOutOfRange",
]


class LfRectError(Exception):
    """Base class for all library-specific errors."""


class ConfigError(LfRectError):
    """A configuration file or CLI argument set is malformed."""


class NonPositiveDepth(LfRectError):
    """A scene point lies on or behind the camera plane (Z <= 0)."""


class DegenerateDisparity(LfRectError):
    """The disparity is at the value that maps to infinite depth."""


class ZeroVector(LfRectError):
    """A direction-valued argument has (numerically) zero length."""


class DegenerateSpread(LfRectError):
    """Point coordinates have zero variance along an axis; they cannot be
    scaled to unit RMS."""


class RankDeficient(LfRectError):
    """The linear system admits no unique null vector: its two smallest
    singular values are (nearly) equal."""


class CoplanarDegeneracy(LfRectError):
    """The scene points are coplanar, so the linear pose solution is not
    unique.  Carries the degeneracy report that triggered the diagnosis."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularInput(LfRectError):
    """A matrix that must be invertible is singular to working precision."""


class IllConditioned(LfRectError):
    """A least-squares system is too badly conditioned to trust."""


class NumericalFailure(LfRectError):
    """An iterative solver produced non-finite values."""


class InsufficientObservations(LfRectError):
    """Too few observations to determine the requested quantity."""


class BehindCamera(LfRectError):
    """A generated scene point fell behind one of the cameras."""


class ZeroBaseline(LfRectError):
    """The two cameras share a centre; no rectifying frame exists."""


class CollinearConstruction(LfRectError):
    """The rectifying-frame construction degenerates: the baseline is
    parallel to the auxiliary direction used to fix the second axis."""


class ParallelRay(LfRectError):
    """A ray is parallel to the parameterization planes and has no
    closed-form image under the two-plane transform."""


class DegenerateSegment(LfRectError):
    """The two construction points of a transformed ray have (numerically)
    equal depth; the geometric route cannot intersect the planes."""


class NoOverlap(LfRectError):
    """The warped aperture hulls of the two light fields share no grid row;
    no aligned grid exists.  Carries hull diagnostics when available."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class OutOfAperture(LfRectError):
    """A query ray leaves the sampled aperture or pixel grid."""


class IndexOutOfRange(LfRectError, IndexError):
    """A grid row / scan-line index is outside the sampled range."""
