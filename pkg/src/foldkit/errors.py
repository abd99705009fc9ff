"""Exception types shared across the toolkit.

Every contract violation raises one of these rather than a bare ValueError,
so callers (and the CLI) can distinguish usage errors from runtime failures.
"""


class FoldkitError(Exception):
    """Base class for all toolkit errors."""


class EmptyInputError(FoldkitError):
    """An operation received an empty point set."""


class BadKError(FoldkitError):
    """Requested sample count is outside the valid range."""


class SizeMismatchError(FoldkitError):
    """Two corresponded arrays disagree in length."""


class DegenerateGeometryError(FoldkitError):
    """Input collapses to a point or segment where a polygon is required.

    `kind` is "point" or "segment".
    """

    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        super().__init__(message or f"degenerate geometry: {kind}")


class DegenerateSegmentError(FoldkitError):
    """Grasp and target coincide (below the 1 mm resolution floor)."""


class NothingToFoldError(FoldkitError):
    """No observed material lies in the stage's moving region."""


class NoMotionError(FoldkitError):
    """Flow between two frames is identically zero (below 1e-6 m)."""


class TooShortError(FoldkitError):
    """Trajectory has too few frames for the requested slice cadence."""


class NotGraspedError(FoldkitError):
    """move/release issued for a vertex that is not currently pinned."""


class NumericalBlowupError(FoldkitError):
    """Simulation produced non-finite or absurdly large coordinates."""


class BadSpecError(FoldkitError):
    """A garment spec field is invalid; `field` names the offender."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(message or f"invalid garment spec field: {field}")


class UnknownInstructionError(FoldkitError):
    """Instruction text contains segments that match no known fold."""

    def __init__(self, segments, message: str = ""):
        self.segments = list(segments)
        super().__init__(message or f"unmatched instruction segments: {self.segments}")


class CategoryMismatchError(FoldkitError):
    """Instruction names a fold that the garment category does not have."""


class RecordParseError(FoldkitError):
    """A trajectory record file is corrupt; `offset` is the failing byte."""

    def __init__(self, offset: int, message: str = ""):
        self.offset = offset
        super().__init__(message or f"record parse failure at byte {offset}")
