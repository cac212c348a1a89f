"""Shared exception types.

Every failure mode that callers are expected to handle gets its own type here so
the CLI can map them onto stable exit codes and tests can assert on them.
"""

from __future__ import annotations


class ScenergyError(Exception):
    """Base class for all package-specific errors."""


class EvaluationError(ScenergyError):
    """Malformed compute graph: shape mismatch, non-scalar backprop root, ..."""


class OptimizerError(ScenergyError):
    """Rejected optimizer update (non-finite gradient, state mismatch)."""


class SceneFormatError(ScenergyError):
    """Scene/episode JSON that does not match the schema; carries a field path."""


class SceneValidationError(ScenergyError):
    """Well-formed scene JSON whose values violate a model invariant."""


class SamplerError(ScenergyError):
    """Langevin sampling failed (non-finite energy or gradient)."""


class GenerationError(ScenergyError):
    """Procedural generation exhausted its rejection budget."""


class TrainingAborted(ScenergyError):
    """Training diverged or hit a non-finite value; carries the partial report."""

    def __init__(self, message: str, report: list | None = None):
        super().__init__(message)
        self.report = report or []


class InstructionParseError(ScenergyError):
    """Out-of-grammar instruction; names the first unconsumed token."""


class GroundingError(ScenergyError):
    """A filter matched no scene entity."""


class AmbiguityError(GroundingError):
    """A singular filter matched more than one entity; lists the candidates."""


class CompileError(ScenergyError):
    """Program cannot be compiled into an energy expression."""


class PlanningError(ScenergyError):
    """Goal planning cannot run (e.g. every entity is fixed, unbound params)."""


class ExecutionError(ScenergyError):
    """Pick-and-place execution failed structurally (e.g. unknown entity)."""


class CheckpointError(ScenergyError):
    """Unreadable, corrupt, or wrong-metadata checkpoint file."""


class ConfigError(ScenergyError):
    """Bad run-configuration file (unknown key, unparsable value)."""
