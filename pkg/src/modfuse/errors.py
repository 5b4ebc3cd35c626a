"""Exception hierarchy.

Two broad families: DataError (bad files, formats, manifests, geometry;
CLI exit code 2) and NumericError (non-finite values in the math path;
CLI exit code 3).
"""


class ModfuseError(Exception):
    """Base class for every error raised by this package."""


class DataError(ModfuseError):
    pass


class NumericError(ModfuseError):
    pass


# -- file / container formats --------------------------------------------

class FormatError(DataError):
    """Malformed container: bad RIFF/magic bytes, bogus header fields."""


class UnsupportedEncodingError(DataError):
    """Valid container but a codec we do not handle."""


class TruncationError(DataError):
    """Payload shorter than the header declares."""


class RateMismatchError(DataError):
    """Audio sample rate differs from the fixed 16 kHz."""


# -- inputs / geometry ----------------------------------------------------

class EmptyInputError(DataError):
    pass


class ParameterError(DataError):
    """Caller-supplied parameter outside its documented domain."""


class ShapeError(DataError):
    """Matrix/vector dimensions do not conform."""


class GeometryError(ShapeError):
    """Feature geometry differs from the fixed pipeline layout."""


# -- protocols / manifests -------------------------------------------------

class ParseError(DataError):
    """Positioned parse failure; carries the 1-based line number."""

    def __init__(self, message, line_no=None, path=None):
        self.line_no = line_no
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line_no is not None:
            where += f"{line_no}: "
        super().__init__(where + message)


class LabelError(ParseError):
    """Unknown bonafide/spoof key."""


class DuplicateUttError(ParseError):
    pass


class SchemaError(DataError):
    """Manifest or config header missing a required column/key."""


class ManifestError(DataError):
    """Manifest entry cannot be resolved to its files."""


class CacheInvalidError(DataError):
    """Cached feature file corrupt or inconsistent with the config."""


class CheckpointError(DataError):
    pass


class DegenerateClassError(DataError):
    """An operation that needs both classes saw only one."""


class EmptyResultError(DataError):
    """No group satisfied the reporting threshold."""


class UndefinedImprovementError(DataError):
    """Relative improvement against a zero baseline."""


# -- numerics --------------------------------------------------------------

class PoisonedGradientError(NumericError):
    """A NaN gradient reached the optimizer; names the parameter."""


class ProbeError(NumericError):
    """Finite-difference probe evaluated to a non-finite value."""
