"""Exception hierarchy.

Every error carries a ``category`` (ingest, config, io, data) that the CLI
prints as a machine-parsable prefix, e.g. ``error[ingest:TruncatedFrame]``.
"""


class TubeforgeError(Exception):
    category = "data"

    @property
    def code(self) -> str:
        return f"{self.category}:{type(self).__name__}"


# geometry / clustering
class DegenerateBox(TubeforgeError):
    pass


class EmptyCluster(TubeforgeError):
    pass


# ingest
class IngestError(TubeforgeError):
    category = "ingest"


class TruncatedFrame(IngestError):
    pass


class ParseError(IngestError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NegativeArea(ParseError):
    pass


class OverlappingIntervals(IngestError):
    pass


class IntervalOutOfRange(IngestError):
    # labels and frames disagree, which is a configuration problem
    category = "config"


class ConfigError(TubeforgeError):
    category = "config"


# augment
class DimensionMismatch(TubeforgeError):
    pass


class LengthMismatch(TubeforgeError):
    pass


# tensor io
class IoFailure(TubeforgeError):
    category = "io"


class ShapeMismatch(IoFailure):
    pass


class BadMagic(IoFailure):
    pass


class UnsupportedDescr(IoFailure):
    pass


class HeaderParseError(IoFailure):
    pass


class PayloadTruncated(IoFailure):
    pass


class SidecarMissing(IoFailure):
    pass


class ChecksumMismatch(IoFailure):
    pass


class CorruptIndex(IoFailure):
    pass


class CountMismatch(IoFailure):
    pass


# metrics / bench
class EmptyInput(TubeforgeError):
    pass


class CorpusMissing(IoFailure):
    pass
