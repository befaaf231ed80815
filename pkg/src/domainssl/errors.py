"""Shared exception types. The CLI maps each to a distinct exit code."""


class FormatError(ValueError):
    """A persisted artifact (permutation file, manifest, config, checkpoint) failed validation."""


class ScenarioError(ValueError):
    """Training inputs do not match the configured scenario."""


class TrainingDiverged(RuntimeError):
    """A loss term became non-finite; the message names the offending term."""


class UnsupportedArchitecture(ValueError):
    """The configured backbone cannot support the requested operation."""
