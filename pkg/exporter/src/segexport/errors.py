"""Exporter exception types."""


class ExportError(Exception):
    """Base class for exporter errors."""


class SpecError(ExportError):
    """Export spec file is malformed or inconsistent."""


class ModelOutputShapeError(ExportError):
    """Model callable returned something other than [C][H][W] probabilities."""


class SimplexViolationError(ExportError):
    """Per-pixel class probabilities are off the simplex beyond tolerance."""


class LabelRangeError(ExportError):
    """Annotation labels fall outside [0, class_count)."""
