"""Exception hierarchy shared across the pipeline.

Every domain error derives from :class:`CtxrayError` so the CLI can map
them to exit code 1 uniformly.
"""


class CtxrayError(Exception):
    """Base class for all pipeline errors."""


class IoFailure(CtxrayError):
    pass


class MalformedHeader(CtxrayError):
    pass


class UnsupportedDatatype(CtxrayError):
    pass


class DimensionMismatch(CtxrayError):
    pass


class GeometryMismatch(CtxrayError):
    pass


class InvalidOrientation(CtxrayError):
    pass


class SchemaError(CtxrayError):
    pass


class InvariantViolation(CtxrayError):
    pass


class DegeneratePolygon(CtxrayError):
    pass


class InsufficientPool(CtxrayError):
    def __init__(self, required: int, available: int, what: str = "items"):
        self.required = required
        self.available = available
        super().__init__(f"need {required} {what}, only {available} available")


class InsufficientSamples(CtxrayError):
    pass


class ImageSetMismatch(CtxrayError):
    pass


class ConfigError(CtxrayError):
    pass
