"""Domain model: unit records, datasets, targets, and gap arithmetic.

All types are frozen dataclasses and every function here is pure, so the
whole module is safe to share across threads.

Data must be strictly positive: the gap norms divide componentwise by the
evaluated unit's own inputs and outputs, so a zero anywhere would silently
change the geometry of every model built on top. Ingestion rejects it
instead of patching it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DataError,
    DimensionMismatch,
    DominanceViolation,
    DuplicateId,
    NonPositiveValue,
    TooFewUnits,
)

#: absolute per-component tolerance used by dominance comparisons;
#: targets come out of floating-point LP solves.
DOMINANCE_TOL = 1e-9


@dataclass(frozen=True)
class DmuRecord:
    """One observed unit: an id plus its input and output bundles."""

    id: str
    inputs: tuple[float, ...]
    outputs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(float(v) for v in self.inputs))
        object.__setattr__(self, "outputs", tuple(float(v) for v in self.outputs))
        if not self.id:
            raise DataError("unit id must be a non-empty string")
        if len(self.inputs) < 1 or len(self.outputs) < 1:
            raise DimensionMismatch(f"unit {self.id!r} needs at least one input and one output")
        for name, vec in (("input", self.inputs), ("output", self.outputs)):
            for k, v in enumerate(vec):
                if not np.isfinite(v) or v <= 0.0:
                    raise NonPositiveValue(
                        f"unit {self.id!r}: {name} {k} is {v!r}; all data must be strictly positive"
                    )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of units sharing one input/output schema."""

    dmus: tuple[DmuRecord, ...]
    input_names: tuple[str, ...] = ()
    output_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "dmus", tuple(self.dmus))
        if len(self.dmus) < 2:
            raise TooFewUnits("a frontier needs at least two units")
        m = len(self.dmus[0].inputs)
        s = len(self.dmus[0].outputs)
        for rec in self.dmus:
            if len(rec.inputs) != m or len(rec.outputs) != s:
                raise DimensionMismatch(
                    f"unit {rec.id!r} has {len(rec.inputs)}x{len(rec.outputs)} data, expected {m}x{s}"
                )
        seen = set()
        for rec in self.dmus:
            if rec.id in seen:
                raise DuplicateId(f"unit id {rec.id!r} appears more than once")
            seen.add(rec.id)
        if not self.input_names:
            object.__setattr__(self, "input_names", tuple(f"x{i+1}" for i in range(m)))
        if not self.output_names:
            object.__setattr__(self, "output_names", tuple(f"y{r+1}" for r in range(s)))
        if len(self.input_names) != m or len(self.output_names) != s:
            raise DimensionMismatch("variable name lists do not match the data dimensions")

    @property
    def m(self) -> int:
        return len(self.dmus[0].inputs)

    @property
    def s(self) -> int:
        return len(self.dmus[0].outputs)

    @property
    def n(self) -> int:
        return len(self.dmus)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(rec.id for rec in self.dmus)

    def record(self, dmu_id: str) -> DmuRecord:
        for rec in self.dmus:
            if rec.id == dmu_id:
                return rec
        raise KeyError(f"no unit with id {dmu_id!r}")

    def index_of(self, dmu_id: str) -> int:
        for k, rec in enumerate(self.dmus):
            if rec.id == dmu_id:
                return k
        raise KeyError(f"no unit with id {dmu_id!r}")

    def bundles(self, ids: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """Stack the selected units into an (k, m) input and (k, s) output matrix."""
        recs = [self.record(i) for i in ids]
        X = np.array([r.inputs for r in recs], dtype=float)
        Y = np.array([r.outputs for r in recs], dtype=float)
        return X, Y


@dataclass(frozen=True)
class TargetVector:
    """A point in input/output space, typically a frontier target."""

    inputs: tuple[float, ...]
    outputs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(float(v) for v in self.inputs))
        object.__setattr__(self, "outputs", tuple(float(v) for v in self.outputs))

    @classmethod
    def of(cls, record: DmuRecord) -> "TargetVector":
        return cls(record.inputs, record.outputs)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.inputs), np.asarray(self.outputs)


@dataclass(frozen=True)
class GapDecomposition:
    """Normalized L1 gaps of a two-stage plan: unit->intermediate and intermediate->final."""

    step1: float
    step2: float

    def __post_init__(self):
        if self.step1 < -DOMINANCE_TOL or self.step2 < -DOMINANCE_TOL:
            raise DominanceViolation("gap components must be nonnegative")

    def total(self, alpha: float) -> float:
        return alpha * self.step1 + (1.0 - alpha) * self.step2


def validate_dataset(raw: Dataset) -> Dataset:
    """Return the dataset unchanged if all invariants hold.

    The dataclass constructors already enforce everything; this entry point
    exists so ingestion code has one obvious call to make and one place to
    catch ``DataError`` from.
    """
    if not isinstance(raw, Dataset):
        raise DimensionMismatch(f"expected a Dataset, got {type(raw).__name__}")
    return raw


def _check_same_shape(a: TargetVector, b: TargetVector) -> None:
    if len(a.inputs) != len(b.inputs) or len(a.outputs) != len(b.outputs):
        raise DimensionMismatch("target vectors have different dimensions")


def weakly_dominates(a: TargetVector, b: TargetVector, tol: float = DOMINANCE_TOL) -> bool:
    """True iff ``a`` uses no more of any input and produces no less of any output than ``b``."""
    _check_same_shape(a, b)
    ax, ay = a.as_arrays()
    bx, by = b.as_arrays()
    return bool(np.all(ax <= bx + tol) and np.all(ay >= by - tol))


def weighted_l1_gap(
    reference: DmuRecord | TargetVector,
    start: TargetVector,
    end: TargetVector,
    tol: float = DOMINANCE_TOL,
) -> float:
    """Normalized L1 distance from ``start`` to a dominating point ``end``.

    Input savings and output expansions are divided by the reference
    bundle's own components, so the result is a sum of per-variable
    improvement fractions. Raises ``DominanceViolation`` if ``end`` does
    not weakly dominate ``start``.
    """
    _check_same_shape(start, end)
    rx = np.asarray(reference.inputs, dtype=float)
    ry = np.asarray(reference.outputs, dtype=float)
    if len(rx) != len(start.inputs) or len(ry) != len(start.outputs):
        raise DimensionMismatch("reference bundle does not match the target dimensions")
    if np.any(rx <= 0) or np.any(ry <= 0):
        raise NonPositiveValue("reference bundle must be strictly positive")
    sx, sy = start.as_arrays()
    ex, ey = end.as_arrays()
    dx = sx - ex  # input savings
    dy = ey - sy  # output gains
    if np.any(dx < -tol) or np.any(dy < -tol):
        raise DominanceViolation("end point does not weakly dominate the start point")
    return float(np.clip(dx, 0.0, None) @ (1.0 / rx) + np.clip(dy, 0.0, None) @ (1.0 / ry))
