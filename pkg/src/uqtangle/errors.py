"""Exception types shared across the engine."""


class UqtangleError(Exception):
    """Base class for all engine errors."""


class NegativeProbabilityError(UqtangleError):
    """A probability entry lies below the negative round-off tolerance."""


class NonNormalizedError(UqtangleError):
    """A class-probability vector does not sum to 1 within tolerance."""


class NonFiniteDataError(UqtangleError):
    """An array contains NaN or infinite entries."""


class InvariantViolationError(UqtangleError):
    """A mathematical invariant was violated beyond numerical tolerance."""


class ShapeError(UqtangleError):
    """An array has an unexpected shape for the requested operation."""


class ShapeMismatchError(UqtangleError):
    """Two arrays that must share a shape do not."""


class PatchTooLargeError(UqtangleError):
    """Requested patch does not fit inside the image."""


class EmptySplitError(UqtangleError):
    """A dataset split required by the computation contains no images."""


class EmptyInputError(UqtangleError):
    """An operation received no data."""


class UnknownTaskError(UqtangleError):
    """Task name is not one of the supported downstream tasks."""


class MissingCellError(UqtangleError):
    """Rank aggregation found models without scores for some (task, split)."""

    def __init__(self, missing):
        self.missing = tuple(missing)
        listing = ", ".join(f"({m}, {t}, {s})" for m, t, s in self.missing)
        super().__init__(f"missing result cells: {listing}")


class BadConfigError(UqtangleError):
    """Configuration values are out of range or inconsistent."""


class BadHeaderError(UqtangleError):
    """Array file header could not be parsed or declares an unsupported dtype."""


class ShapeRankError(UqtangleError):
    """Array file holds a tensor of the wrong rank."""


class ManifestParseError(UqtangleError):
    """Manifest file is not valid JSON or violates the schema."""


class ManifestValidationError(UqtangleError):
    """Manifest content checks failed; carries every violation found."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(self.violations))


class MissingFileError(ManifestValidationError):
    """A file referenced by the manifest does not exist."""


class InconsistentClassCountError(ManifestValidationError):
    """A referenced array disagrees with the manifest class count."""


class InconsistentManifestError(ManifestValidationError):
    """Manifest entries contradict each other (e.g. duplicate image ids)."""


class PipelineStageError(UqtangleError):
    """Wraps a module error with the pipeline stage and image it occurred in."""

    def __init__(self, stage, image_id, original):
        self.stage = stage
        self.image_id = image_id
        self.original = original
        super().__init__(f"stage={stage} image_id={image_id}: {original}")
