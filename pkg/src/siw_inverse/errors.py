"""Exception hierarchy shared by the solver, dataset, engine and pipeline layers.

Purpose
-------
Give every failure the package can diagnose a named type so the CLI can map
domain failures to exit code 2 while unexpected crashes keep their traceback.

Contents
--------
* :class:`SiwInverseError` - root of every diagnosable failure.
* Solver errors: :class:`InvalidSubstrateError`, :class:`BelowCutoffError`,
  :class:`NumericDegeneracyError`, :class:`GeometryInfeasibleError`.
* Dataset errors: :class:`EmptyGridError`, :class:`DegenerateStatisticsError`,
  :class:`ShapeMismatchError`, :class:`DatasetTooSmallError`,
  :class:`DatasetIntegrityError`, :class:`SchemaVersionError`.
* Engine and pipeline errors: :class:`NonFiniteError`, :class:`MissingCacheError`,
  :class:`CheckpointError`, :class:`StageOrderError`, :class:`GridMismatchError`,
  :class:`MissingArtifactError`.

System Role
-----------
Lowest architecture layer next to :mod:`siw_inverse.models`; imports nothing
from the package.
"""

from __future__ import annotations


class SiwInverseError(Exception):
    """Base class for every failure the CLI reports as a data/model error (exit 2)."""


class InvalidSubstrateError(SiwInverseError, ValueError):
    """Substrate constants violate their invariants or yield a non-positive effective width."""


class BelowCutoffError(SiwInverseError, ValueError):
    """A frequency at or below the TE10 cutoff was requested.

    Attributes
    ----------
    frequency_ghz:
        Offending frequency.
    cutoff_ghz:
        Cutoff of the equivalent waveguide.
    """

    def __init__(self, frequency_ghz: float, cutoff_ghz: float):
        self.frequency_ghz = frequency_ghz
        self.cutoff_ghz = cutoff_ghz
        super().__init__(f"Frequency {frequency_ghz:.6g} GHz is not above the cutoff {cutoff_ghz:.6g} GHz")


class NumericDegeneracyError(SiwInverseError, ArithmeticError):
    """ABCD-to-S conversion hit a vanishing denominator."""


class GeometryInfeasibleError(SiwInverseError, ValueError):
    """A geometry violates its invariants or leaves no room for the end sections.

    Attributes
    ----------
    ordinal:
        Dataset ordinal of the offending geometry when raised during generation.
    """

    def __init__(self, message: str, *, ordinal: int | None = None):
        self.ordinal = ordinal
        if ordinal is not None:
            message = f"{message} (ordinal {ordinal})"
        super().__init__(message)


class EmptyGridError(SiwInverseError, ValueError):
    """Enumeration produced no constraint-valid geometry."""


class DegenerateStatisticsError(SiwInverseError, ValueError):
    """Normalisation statistics cannot be fitted (too few samples or a constant target)."""


class ShapeMismatchError(SiwInverseError, ValueError):
    """Array or layer dimensions do not chain."""


class DatasetTooSmallError(SiwInverseError, ValueError):
    """The dataset holds fewer samples than the split requires."""


class DatasetIntegrityError(SiwInverseError):
    """A persisted artifact failed its checksum, is truncated, or fails re-validation."""


class SchemaVersionError(SiwInverseError):
    """A persisted artifact declares a schema version this release cannot read."""


class NonFiniteError(SiwInverseError, FloatingPointError):
    """Training produced a non-finite loss or gradient.

    Attributes
    ----------
    epoch:
        1-based epoch in which the value appeared, when known.
    batch:
        0-based batch index inside that epoch, when known.
    """

    def __init__(self, message: str, *, epoch: int | None = None, batch: int | None = None):
        self.epoch = epoch
        self.batch = batch
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if batch is not None:
            where.append(f"batch {batch}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class MissingCacheError(SiwInverseError, RuntimeError):
    """Backward pass requested without a preceding train-mode forward pass."""


class CheckpointError(SiwInverseError):
    """A checkpoint is malformed or does not match the requested architecture."""


class StageOrderError(SiwInverseError, RuntimeError):
    """A pipeline stage was trained before the stage it depends on."""


class GridMismatchError(SiwInverseError, ValueError):
    """A spectrum is not sampled on the grid the models were trained on."""


class MissingArtifactError(SiwInverseError, FileNotFoundError):
    """A workflow step needs an artifact an earlier step has not produced.

    Attributes
    ----------
    artifact:
        Human-readable name of the missing artifact.
    hint:
        Command that produces it.
    """

    def __init__(self, artifact: str, *, hint: str):
        self.artifact = artifact
        self.hint = hint
        super().__init__(f"Missing {artifact}; run `{hint}` first")


__all__ = [
    "BelowCutoffError",
    "CheckpointError",
    "DatasetIntegrityError",
    "DatasetTooSmallError",
    "DegenerateStatisticsError",
    "EmptyGridError",
    "GeometryInfeasibleError",
    "GridMismatchError",
    "InvalidSubstrateError",
    "MissingArtifactError",
    "MissingCacheError",
    "NonFiniteError",
    "NumericDegeneracyError",
    "SchemaVersionError",
    "ShapeMismatchError",
    "SiwInverseError",
    "StageOrderError",
]
