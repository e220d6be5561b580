"""Exception types shared across the package."""

from __future__ import annotations


class HarmkitError(Exception):
    """Base class for every error this package raises on purpose."""


class InvalidInputError(HarmkitError, ValueError):
    """A value violates a documented precondition or domain invariant."""


class ProjectionError(HarmkitError):
    """A point cannot be projected into the image plane.

    Carries the index of the offending vertex so callers can report which
    corner sits behind the camera.
    """

    def __init__(self, message: str, vertex_index: int) -> None:
        super().__init__(message)
        self.vertex_index = vertex_index


class GenerationError(HarmkitError):
    """Scenario generation failed; names the seed for reproduction."""

    def __init__(self, message: str, seed: int) -> None:
        super().__init__(message)
        self.seed = seed


class DatasetFormatError(HarmkitError):
    """A dataset or detections file is malformed or has the wrong version."""

    def __init__(self, message: str, path: str | None = None,
                 line_number: int | None = None) -> None:
        loc = ""
        if path is not None:
            loc = f"{path}:{line_number}: " if line_number is not None else f"{path}: "
        super().__init__(loc + message)
        self.path = path
        self.line_number = line_number


class EvalInputError(HarmkitError):
    """Detections reference data missing from the dataset under evaluation."""

    def __init__(self, message: str, detection_index: int | None = None) -> None:
        super().__init__(message)
        self.detection_index = detection_index


class ConfigError(HarmkitError):
    """A config file or flag set cannot be parsed into a valid spec."""
