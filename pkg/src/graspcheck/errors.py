"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class GraspCheckError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GraspCheckError):
    """Invalid or unknown configuration keys/values."""


# dataset loading
class MissingManifest(GraspCheckError):
    pass


class MalformedAnnotation(GraspCheckError):
    pass


class DanglingImageRef(GraspCheckError):
    pass


# scene synthesis / geometry
class DegenerateHull(GraspCheckError):
    pass


class PlacementFailure(GraspCheckError):
    pass


class ObjectTooLarge(GraspCheckError):
    pass


class PreconditionViolation(GraspCheckError):
    pass


class GripperOutOfView(GraspCheckError):
    pass


# detection / pipeline
class GripperNotFound(GraspCheckError):
    """No detection at any threshold of the schedule; verification impossible."""


class EmptyCrop(GraspCheckError):
    pass


# evaluation
class MissingGroundTruth(GraspCheckError):
    pass


# VQA baseline
class UnparseableAnswer(GraspCheckError):
    pass


class UnsupportedOption(GraspCheckError):
    pass


class ClientFailure(GraspCheckError):
    """Transport-level VQA client error. Carries any partial results."""

    def __init__(self, message: str, partial_records: list | None = None):
        super().__init__(message)
        self.partial_records = partial_records or []
