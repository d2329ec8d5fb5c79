"""Slope estimation from per-cell sufficient statistics.

Every estimator here works on a :class:`CellTable` of counts and response
sums, never on the ``n x 2**P`` design.  Because the design's Gram matrix is
``H diag(counts) H`` and its cross-product with the response is ``H sums``,
each estimator reduces to a per-cell vector followed by one Walsh-Hadamard
transform.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from .bitalgebra import default_bit_labels, mask_label, wht
from .errors import DataError, SingularDesignError
from .expansion import MAX_TOTAL_BITS, BitPanel

__all__ = [
    "CellTable",
    "BeliefFit",
    "Prediction",
    "Covariance",
    "BoundsReport",
    "SeparationReport",
    "DegeneracyReport",
    "DegenerateVarianceWarning",
    "aggregate",
    "fit_lse",
    "fit_mp",
    "fit_ridge",
    "fit",
    "predict",
    "covariance",
    "check_bounds",
    "detect_separation",
    "classify_degeneracy",
    "MODEL_SCHEMA",
    "save_model",
    "load_model",
]

SEPARATION_TOL = 1e-8
BOUND_TOL = 1e-9


class DegenerateVarianceWarning(UserWarning):
    """Some cell is deterministic, so its variance contribution is zero."""


@dataclass(frozen=True)
class CellTable:
    """Counts ``n_t`` and response sums ``s_t`` for each of the ``2**P`` cells."""

    P: int
    counts: np.ndarray
    sums: np.ndarray

    def __post_init__(self):
        size = 1 << self.P
        if self.counts.shape != (size,) or self.sums.shape != (size,):
            raise DataError(f"cell arrays must have length {size}")
        if np.any(self.counts < 0) or np.any(np.abs(self.sums) > self.counts):
            raise DataError("cell sums must satisfy |s_t| <= n_t")

    @classmethod
    def from_arrays(cls, counts, sums) -> "CellTable":
        counts = np.asarray(counts, dtype=np.int64)
        sums = np.asarray(sums, dtype=np.int64)
        size = counts.size
        if size < 1 or size & (size - 1):
            raise DataError("number of cells must be a power of two")
        return cls(size.bit_length() - 1, counts, sums)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def empty_cells(self) -> list[int]:
        return [int(t) for t in np.flatnonzero(self.counts == 0)]

    def means(self, empty: float = np.nan) -> np.ndarray:
        """Cell means ``s_t / n_t``; ``empty`` fills cells without observations."""
        out = np.full(self.counts.shape, empty, dtype=float)
        occ = self.counts > 0
        out[occ] = self.sums[occ] / self.counts[occ]
        return out

    def merge(self, other: "CellTable") -> "CellTable":
        if other.P != self.P:
            raise DataError("cannot merge tables with different P")
        return CellTable(self.P, self.counts + other.counts, self.sums + other.sums)

    __add__ = merge


def aggregate(panel: BitPanel, response) -> CellTable:
    """Reduce a panel and a +-1 response to per-cell counts and sums."""
    b = np.asarray(response)
    if b.shape != (panel.n,):
        raise DataError(f"response has {b.size} entries, panel has {panel.n} rows")
    bad = np.flatnonzero((b != 1) & (b != -1))
    if bad.size:
        raise DataError(f"response must be +-1; got {b[bad[0]]!r} at index {int(bad[0])}")
    size = 1 << panel.P
    counts = np.bincount(panel.cell, minlength=size).astype(np.int64)
    sums = np.bincount(panel.cell, weights=b.astype(float), minlength=size)
    return CellTable(panel.P, counts, np.rint(sums).astype(np.int64))


@dataclass(frozen=True)
class BeliefFit:
    """Estimated slopes indexed by interaction mask.

    ``cell_expectations`` caches the fitted ``E[B | cell]`` produced by the
    closed form, which is exactly zero on cells the mp and ridge estimators
    never observed.
    """

    beta: np.ndarray
    estimator_kind: str
    cell_expectations: np.ndarray
    empty_cells: list[int]
    n: int
    counts: np.ndarray
    sums: np.ndarray
    lam: float = 0.0
    labels: list[str] | None = None
    covariance: np.ndarray | None = None
    per_slope_variance: float | None = None

    @property
    def P(self) -> int:
        return int(self.beta.size).bit_length() - 1

    @property
    def bit_labels(self) -> list[str]:
        return self.labels if self.labels is not None else default_bit_labels(self.P)

    @property
    def table(self) -> CellTable:
        return CellTable(self.P, self.counts, self.sums)

    def mask_labels(self) -> list[str]:
        labels = self.bit_labels
        return [mask_label(m, labels) for m in range(self.beta.size)]

    def slope_table(self) -> list[tuple[int, str, float]]:
        return [(m, lab, float(b)) for m, (lab, b) in enumerate(zip(self.mask_labels(), self.beta))]


def _fit_from_cells(table: CellTable, w: np.ndarray, kind: str, lam: float, labels) -> BeliefFit:
    beta = wht(w) / (1 << table.P)
    return BeliefFit(
        beta=beta,
        estimator_kind=kind,
        cell_expectations=w,
        empty_cells=table.empty_cells,
        n=table.n,
        counts=table.counts.copy(),
        sums=table.sums.copy(),
        lam=float(lam),
        labels=None if labels is None else list(labels),
    )


def fit_lse(table: CellTable, labels: Sequence[str] | None = None) -> BeliefFit:
    """Least squares slopes; requires every cell to be occupied."""
    empty = table.empty_cells
    if empty:
        raise SingularDesignError(empty)
    return _fit_from_cells(table, table.means(), "lse", 0.0, labels)


def fit_mp(table: CellTable, labels: Sequence[str] | None = None) -> BeliefFit:
    """Minimum-norm (Moore-Penrose) least squares slopes.

    Empty cells get fitted expectation 0, i.e. probability 1/2.
    """
    if table.n == 0:
        raise DataError("cannot fit an empty table")
    return _fit_from_cells(table, table.means(empty=0.0), "moore-penrose", 0.0, labels)


def fit_ridge(table: CellTable, lam: float, labels: Sequence[str] | None = None) -> BeliefFit:
    """Ridge slopes for penalty ``lam * ||beta||^2``: cells shrink as ``s_t / (n_t + lam 2**-P)``."""
    if not lam > 0:
        raise DataError(f"ridge penalty must be positive, got {lam}")
    w = table.sums / (table.counts + lam / (1 << table.P))
    return _fit_from_cells(table, w, "ridge", lam, labels)


def fit(table: CellTable, kind: str = "lse", lam: float | None = None, labels=None) -> BeliefFit:
    kind = {"mp": "moore-penrose"}.get(kind, kind)
    if kind == "lse":
        return fit_lse(table, labels)
    if kind == "moore-penrose":
        return fit_mp(table, labels)
    if kind == "ridge":
        if lam is None:
            raise DataError("ridge estimator needs a penalty")
        return fit_ridge(table, lam, labels)
    raise DataError(f"unknown estimator {kind!r}")


@dataclass(frozen=True)
class Prediction:
    expectation: float
    prob_plus: float


def predict(fit: BeliefFit, t) -> Prediction | tuple[np.ndarray, np.ndarray]:
    """Fitted ``E[B | cell]`` and ``P(B = +1 | cell) = (1 + E) / 2``.

    A scalar cell gives a :class:`Prediction`; an array of cells gives the two
    arrays.
    """
    e = fit.cell_expectations
    if np.ndim(t) == 0:
        t = int(t)
        if not 0 <= t < e.size:
            raise DataError(f"cell {t} outside [0, {e.size})")
        val = float(e[t])
        return Prediction(val, (1.0 + val) / 2.0)
    t = np.asarray(t, dtype=np.int64)
    vals = e[t]
    return vals, (1.0 + vals) / 2.0


@dataclass(frozen=True)
class Covariance:
    """Plug-in covariance of the slope estimates.

    ``matrix`` is ``None`` when it was not requested; its diagonal is constant
    and equal to ``per_slope_variance``.
    """

    per_slope_variance: float
    cell_variance: np.ndarray
    matrix: np.ndarray | None = None

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.per_slope_variance)


def covariance(fit: BeliefFit, table: CellTable | None = None, full: bool = True) -> Covariance:
    """Estimated covariance ``2**-2P H D H / n`` with ``D_t = (1 - e_t**2) n / n_t``.

    ``e_t`` is the fitted cell expectation.  The full matrix only depends on
    ``wht(D)[a ^ b]``, so it is assembled by indexing rather than products.
    """
    table = fit.table if table is None else table
    if table.empty_cells:
        raise SingularDesignError(table.empty_cells)
    P = table.P
    n = table.n
    e = np.asarray(fit.cell_expectations, dtype=float)
    one_minus = 1.0 - e**2
    separated = np.flatnonzero(one_minus <= 0)
    if separated.size:
        warnings.warn(
            f"{separated.size} deterministic cell(s); their variance contribution is set to 0",
            DegenerateVarianceWarning,
            stacklevel=2,
        )
        one_minus[separated] = 0.0
    D = one_minus * n / table.counts
    scale = 1.0 / (float(1 << (2 * P)) * n)
    per_slope = float(D.sum() * scale)
    matrix = None
    if full:
        spectrum = wht(D) * scale
        idx = np.arange(1 << P)
        matrix = spectrum[idx[:, None] ^ idx[None, :]]
    return Covariance(per_slope, D, matrix)


@dataclass(frozen=True)
class BoundsReport:
    """Largest value of each bounded quantity and its slack below 1."""

    cell_max: float
    sample_max: float
    norm: float
    tol: float = BOUND_TOL

    @property
    def slacks(self) -> tuple[float, float, float]:
        return (1.0 - self.cell_max, 1.0 - self.sample_max, 1.0 - self.norm)

    @property
    def passed(self) -> tuple[bool, bool, bool]:
        return tuple(s >= -self.tol for s in self.slacks)

    @property
    def ok(self) -> bool:
        return all(self.passed)


def check_bounds(fit: BeliefFit, panel: BitPanel | None = None, tol: float = BOUND_TOL) -> BoundsReport:
    """Evaluate ``||H beta||_inf``, ``max_i |fitted_i|`` and ``||beta||_2`` from the slopes."""
    fitted = wht(fit.beta)
    cell_max = float(np.max(np.abs(fitted)))
    if panel is not None:
        observed = np.unique(panel.cell)
    else:
        observed = np.flatnonzero(fit.counts > 0)
    sample_max = float(np.max(np.abs(fitted[observed]))) if observed.size else 0.0
    norm = float(np.linalg.norm(fit.beta))
    return BoundsReport(cell_max, sample_max, norm, tol)


@dataclass(frozen=True)
class SeparationReport:
    separated: bool
    norm: float
    event_cells: list[int]
    vertex_distance: float


def detect_separation(fit: BeliefFit, tol: float = SEPARATION_TOL) -> SeparationReport:
    """Whether the slopes sit on a vertex of the hypercube ``||H x||_inf <= 1``.

    When separated the response is a deterministic function of the cell and
    ``event_cells`` lists the cells where it equals +1.
    """
    norm = float(np.linalg.norm(fit.beta))
    fitted = wht(fit.beta)
    vertex = np.where(fitted >= 0, 1.0, -1.0)
    vertex_distance = float(np.linalg.norm(fit.beta - wht(vertex) / vertex.size))
    separated = norm >= 1.0 - tol
    events = [int(t) for t in np.flatnonzero(fitted >= 1.0 - tol)] if separated else []
    return SeparationReport(separated, norm, events, vertex_distance)


@dataclass(frozen=True)
class DegeneracyReport:
    case: int
    separated_cells: list[int]
    empty_cells: list[int]
    note: str = ""


_CASE_NOTES = {
    1: "all cells occupied and non-deterministic; asymptotic covariance is nonsingular",
    2: "all cells occupied but some are deterministic; asymptotic covariance is degenerate",
    3: (
        "some cells are empty in the sample; mp/ridge fits predict probability 1/2 there. "
        "A cell with zero population probability looks the same in data, so this may "
        "also be the unidentifiable population-level case"
    ),
}


def classify_degeneracy(table: CellTable, fit: BeliefFit | None = None) -> DegeneracyReport:
    """Place the sample on the ladder of increasing degeneracy (cases 1-3)."""
    empty = table.empty_cells
    occ = table.counts > 0
    separated = [int(t) for t in np.flatnonzero(occ & (np.abs(table.sums) == table.counts))]
    if empty:
        case = 3
    elif separated:
        case = 2
    else:
        case = 1
    return DegeneracyReport(case, separated, empty, _CASE_NOTES[case])


MODEL_SCHEMA = {
    "type": "object",
    "required": ["P", "labels", "estimator_kind", "lambda", "beta", "empty_cells", "n", "counts"],
    "properties": {
        "P": {"type": "integer", "minimum": 0, "maximum": MAX_TOTAL_BITS},
        "labels": {"type": "array", "items": {"type": "string"}},
        "mask_labels": {"type": "array", "items": {"type": "string"}},
        "estimator_kind": {"enum": ["lse", "moore-penrose", "ridge"]},
        "lambda": {"type": "number", "minimum": 0},
        "beta": {"type": "array", "items": {"type": "number"}},
        "empty_cells": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "n": {"type": "integer", "minimum": 0},
        "counts": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "sums": {"type": "array", "items": {"type": "integer"}},
        "expansion": {"type": "object"},
    },
}


def model_to_dict(fit: BeliefFit, expansion: dict | None = None) -> dict:
    doc = {
        "P": fit.P,
        "labels": fit.bit_labels,
        "mask_labels": fit.mask_labels(),
        "estimator_kind": fit.estimator_kind,
        "lambda": fit.lam,
        "beta": [float(b) for b in fit.beta],
        "empty_cells": list(fit.empty_cells),
        "n": fit.n,
        "counts": [int(c) for c in fit.counts],
        "sums": [int(s) for s in fit.sums],
    }
    if expansion is not None:
        doc["expansion"] = expansion
    jsonschema.validate(doc, MODEL_SCHEMA)
    return doc


def model_from_dict(doc: dict) -> BeliefFit:
    try:
        jsonschema.validate(doc, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise DataError(f"invalid model document: {exc.message}") from None
    P = doc["P"]
    beta = np.asarray(doc["beta"], dtype=float)
    counts = np.asarray(doc["counts"], dtype=np.int64)
    if beta.size != 1 << P or counts.size != 1 << P:
        raise DataError("model arrays do not have 2**P entries")
    sums = np.asarray(doc.get("sums", np.zeros(1 << P)), dtype=np.int64)
    e = wht(beta)
    if doc["estimator_kind"] != "lse":
        e[doc["empty_cells"]] = 0.0
    return BeliefFit(
        beta=beta,
        estimator_kind=doc["estimator_kind"],
        cell_expectations=e,
        empty_cells=list(doc["empty_cells"]),
        n=int(doc["n"]),
        counts=counts,
        sums=sums,
        lam=float(doc["lambda"]),
        labels=list(doc["labels"]),
    )


def save_model(fit: BeliefFit, path: str | Path, expansion: dict | None = None) -> dict:
    doc = model_to_dict(fit, expansion)
    Path(path).write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return doc


def load_model(path: str | Path) -> tuple[BeliefFit, dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from None
    return model_from_dict(doc), doc
