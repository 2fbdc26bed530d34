"""Exception taxonomy shared across the package.

Every error raised by library code derives from PDError so callers (and the
CLI, which maps them to exit code 2) can catch one base class.
"""


class PDError(Exception):
    """Base class for all errors raised by this package."""


# --- file formats ---------------------------------------------------------

class IoError(PDError):
    """Underlying OS read/write failure."""


class BadMagic(PDError):
    """File does not start with the expected 4-byte magic."""


class HeaderMismatch(PDError):
    """Declared header fields do not match the payload actually present."""


class NonFiniteValue(PDError):
    """A numeric payload contains NaN or Inf."""


class LabelOutOfRange(PDError):
    """A class label is outside {0..C-1}."""


class InvariantViolation(PDError):
    """A value-type invariant does not hold."""


# --- selection / index construction --------------------------------------

class ZeroVector(PDError):
    """Cosine similarity undefined for a zero-norm point."""


class EmptyInput(PDError):
    """An operation received an empty point set or subset."""


class EmptyClass(PDError):
    """Index construction requires every class to be nonempty."""


class InvalidBeta(PDError):
    """Normalization scale must lie strictly inside (0, 1)."""


class AllDirectionsDegenerate(PDError):
    """Every candidate direction for a query was skipped as degenerate."""


# --- threat evaluation ----------------------------------------------------

class DimensionMismatch(PDError):
    """Vector dimensions disagree."""


class EmptyDirectionSet(PDError):
    """Threat evaluation needs at least one unsafe direction."""


class EmptyMask(PDError):
    """A boolean mask with no set bits cannot drive masked evaluation."""


class WeightOutOfRange(PDError):
    """Relative class weights must lie in [0, 1]."""


class ShapeMismatch(PDError):
    """Paired datasets disagree in sample count or dimension."""


# --- class weights --------------------------------------------------------

class UnmappedClass(PDError):
    """A class id has no vertex in the hierarchy leaf map."""


class MalformedTree(PDError):
    """Hierarchy is not a single rooted tree."""


class SizeMismatch(PDError):
    """Weight matrices being combined have different sizes."""


class EmptyPartsList(PDError):
    """Combination requires at least one weight matrix."""


# --- sublevel geometry ----------------------------------------------------

class NonPositiveEpsilon(PDError):
    """Sublevel thresholds must be strictly positive."""


class NonUnitDirection(PDError):
    """Halfspace normals must have unit Euclidean norm."""


# --- 2D oracle ------------------------------------------------------------

class PointOutsideDomain(PDError):
    """Query point is outside the task domain."""


# --- corruptions ----------------------------------------------------------

class GeometryMismatch(PDError):
    """Image geometry (height, width, channels) does not match d."""


class NotImageDomain(PDError):
    """Corruption generators require an image-domain dataset in [0,1]^d."""
