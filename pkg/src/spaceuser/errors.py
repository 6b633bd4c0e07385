"""Exception types shared across the package."""

from __future__ import annotations


class SpaceUserError(Exception):
    """Base class for all errors raised by this package."""


# -- TLE ingestion ---------------------------------------------------------

class TleError(SpaceUserError):
    """A malformed TLE record.  ``line_no`` is 1-based within the source."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(where + message)


class ChecksumMismatch(TleError):
    def __init__(self, line_no: int, expected: int | None = None, found: str | None = None):
        self.expected = expected
        self.found = found
        super().__init__(f"checksum mismatch (expected {expected}, found {found!r})", line_no)


class FieldOutOfRange(TleError):
    def __init__(self, field: str, line_no: int, value: object = None):
        self.field = field
        self.value = value
        super().__init__(f"field {field!r} out of range ({value!r})", line_no)


class DeepSpaceRejected(TleError):
    def __init__(self, catalog_id: int, line_no: int | None = None):
        self.catalog_id = catalog_id
        super().__init__(f"catalog {catalog_id}: period >= 225 min (deep space)", line_no)


class PropagationDiverged(SpaceUserError):
    def __init__(self, catalog_id: int, code: int, detail: str = "", epoch=None):
        self.catalog_id = catalog_id
        self.code = code
        self.epoch = epoch
        where = f" at {epoch.isoformat()}" if epoch is not None else ""
        super().__init__(f"catalog {catalog_id}: SGP4 error {code} {detail}".rstrip() + where)


class EpochTooFar(SpaceUserError):
    pass


# -- geometry ---------------------------------------------------------------

class EpochMismatch(SpaceUserError):
    pass


# -- link quality -------------------------------------------------------------

class NonPositiveInput(SpaceUserError, ValueError):
    pass


class EpsilonOutOfRange(SpaceUserError, ValueError):
    def __init__(self, epsilon: float):
        self.epsilon = epsilon
        super().__init__(f"|epsilon| = {abs(epsilon):.4f} >= 0.5: link is interference-limited")


class UnknownWeatherClass(SpaceUserError, KeyError):
    pass


class UnknownTier(SpaceUserError, KeyError):
    pass


class NoPopAvailable(SpaceUserError):
    pass


class SchemaViolation(SpaceUserError, ValueError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


# -- scheduling / simulation ---------------------------------------------------

class DimensionMismatch(SpaceUserError, ValueError):
    pass


class EmptyInput(SpaceUserError, ValueError):
    pass


class ConfigError(SpaceUserError, ValueError):
    pass
