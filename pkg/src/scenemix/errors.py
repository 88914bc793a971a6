"""Exception types raised across the toolkit."""

from __future__ import annotations


class SceneMixError(Exception):
    """Base class for all toolkit errors."""


class EmptyCloud(SceneMixError):
    """An operation that requires points received an empty cloud."""


class EmptyBatch(SceneMixError):
    """A batch-level operation received no scenes."""


class AttributeMismatch(SceneMixError):
    """Clouds disagree on which optional per-point arrays are present."""


class MissingAttribute(SceneMixError):
    """A required optional attribute (colors, labels, instances) is absent."""


class Truncated(SceneMixError):
    """A binary payload is shorter than its declared record count requires."""


class UnsupportedEncoding(SceneMixError):
    """A file declares an encoding the codec does not support."""


class MissingProperty(SceneMixError):
    """A scene file lacks a required property (x, y or z)."""


class CountMismatch(SceneMixError):
    """A label payload does not match the declared point count."""


class ParseError(SceneMixError):
    """A text scene file has a malformed line."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class InconsistentInstance(SceneMixError):
    """An instance id maps to more than one semantic label."""


class EmptyInstanceSet(SceneMixError):
    """Instance mixing needs at least one instance in the target scene."""


class EmptyCrop(SceneMixError):
    """Repeated crop attempts all produced zero surviving points."""


class ConfigError(SceneMixError):
    """A pipeline configuration is malformed or out of range."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class StatsError(SceneMixError):
    """A manifest line could not be parsed while aggregating statistics."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"manifest line {line_number}: {message}")
        self.line_number = line_number
