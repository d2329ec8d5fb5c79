"""Binary expansion of predictors into sign bits and dyadic cells."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "MAX_TOTAL_BITS",
    "VariableSpec",
    "ExpansionConfig",
    "BitPanel",
    "ecdf_rescale",
    "ecdf_transform",
    "binary_expand",
    "binary_expand_array",
    "reconstruct",
    "build_panel",
    "read_csv_columns",
    "load_config",
    "encode_binary",
]

MAX_TOTAL_BITS = 24

KINDS = ("continuous-ecdf", "continuous-known-range", "binary")


@dataclass(frozen=True)
class VariableSpec:
    """How one raw column is turned into bits.

    ``positive`` is the level mapped to +1 for binary columns; ``value_range``
    is the declared ``(lo, hi)`` for known-range columns.
    """

    name: str
    kind: str = "continuous-ecdf"
    depth: int = 1
    positive: str | None = None
    value_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise ConfigError(f"variable {self.name!r}: depth must be a positive integer")
        if self.kind == "binary" and self.depth != 1:
            raise ConfigError(f"binary variable {self.name!r} must have depth 1")
        if self.kind == "continuous-known-range":
            if self.value_range is None:
                raise ConfigError(f"variable {self.name!r}: known-range kind needs a range")
            lo, hi = self.value_range
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ConfigError(f"variable {self.name!r}: invalid range {self.value_range}")


@dataclass(frozen=True)
class ExpansionConfig:
    variables: tuple[VariableSpec, ...]

    def __post_init__(self):
        if not self.variables:
            raise ConfigError("expansion config has no variables")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate variable names in {names}")
        if self.total_bits > MAX_TOTAL_BITS:
            raise ConfigError(
                f"total bits {self.total_bits} exceeds the cap of {MAX_TOTAL_BITS}"
            )

    @property
    def total_bits(self) -> int:
        return sum(v.depth for v in self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def bit_index(self) -> list[tuple[int, int]]:
        """Global bit index -> (variable index, depth), both 1-based."""
        return [(j + 1, d + 1) for j, v in enumerate(self.variables) for d in range(v.depth)]

    def bit_labels(self) -> list[str]:
        out = []
        for j, d in self.bit_index():
            if self.variables[j - 1].depth == 1 and self.variables[j - 1].kind == "binary":
                out.append(f"A_{{{j}}}")
            else:
                out.append(f"A_{{{j},{d}}}")
        return out

    def variable_bits(self, name_or_index) -> list[int]:
        """Global bit indices belonging to a variable (by name or 0-based index)."""
        j = self.names.index(name_or_index) if isinstance(name_or_index, str) else int(name_or_index)
        start = sum(v.depth for v in self.variables[:j])
        return list(range(start, start + self.variables[j].depth))

    @classmethod
    def from_depths(cls, depths: Mapping[str, int] | Sequence[int]) -> "ExpansionConfig":
        """ECDF-expanded continuous variables with the given depths."""
        if isinstance(depths, Mapping):
            items = list(depths.items())
        else:
            items = [(f"x{j + 1}", d) for j, d in enumerate(depths)]
        return cls(tuple(VariableSpec(name, "continuous-ecdf", int(d)) for name, d in items))

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExpansionConfig":
        try:
            entries = doc["variables"]
        except (KeyError, TypeError):
            raise ConfigError("config document needs a 'variables' list") from None
        specs = []
        for e in entries:
            if "name" not in e:
                raise ConfigError(f"variable entry without a name: {e}")
            rng = e.get("range")
            specs.append(
                VariableSpec(
                    name=str(e["name"]),
                    kind=e.get("kind", "continuous-ecdf"),
                    depth=int(e.get("depth", 1)),
                    positive=None if e.get("positive") is None else str(e["positive"]),
                    value_range=None if rng is None else (float(rng[0]), float(rng[1])),
                )
            )
        return cls(tuple(specs))

    def to_dict(self) -> dict:
        out = []
        for v in self.variables:
            e = {"name": v.name, "kind": v.kind, "depth": v.depth}
            if v.positive is not None:
                e["positive"] = v.positive
            if v.value_range is not None:
                e["range"] = list(v.value_range)
            out.append(e)
        return {"variables": out}


@dataclass(frozen=True)
class BitPanel:
    """Expanded predictors.

    ``bits`` is ``n x P`` with entries in {-1, +1}; ``cell[i]`` has bit ``k``
    set exactly when ``bits[i, k] == -1``.  ``clamped`` counts known-range
    values that fell outside their declared range, per variable.
    """

    bits: np.ndarray
    cell: np.ndarray
    labels: list[str]
    bit_index: list[tuple[int, int]]
    clamped: dict[str, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.bits.shape[0])

    @property
    def P(self) -> int:
        return int(self.bits.shape[1])

    @classmethod
    def from_bits(cls, bits, labels: Sequence[str] | None = None) -> "BitPanel":
        bits = np.asarray(bits, dtype=np.int8)
        if bits.ndim != 2:
            raise DataError("bits must be a 2-d array")
        if not np.all((bits == 1) | (bits == -1)):
            raise DataError("bits must be -1 or +1")
        P = bits.shape[1]
        if P > MAX_TOTAL_BITS:
            raise ConfigError(f"total bits {P} exceeds the cap of {MAX_TOTAL_BITS}")
        weights = (1 << np.arange(P, dtype=np.int64))
        cell = ((bits == -1).astype(np.int64) * weights).sum(axis=1) if P else np.zeros(len(bits), np.int64)
        if labels is None:
            labels = [f"A_{{{k + 1}}}" for k in range(P)]
        return cls(bits, cell, list(labels), [(k + 1, 1) for k in range(P)])


def _finite_or_raise(x: np.ndarray, what: str = "input") -> None:
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise DataError(f"non-finite {what} at index {int(bad[0])}")


def ecdf_transform(reference, x) -> np.ndarray:
    """Map ``x`` through the midrank empirical CDF of ``reference`` onto [-1, 1].

    A value ``v`` gets rank ``#(ref < v) + (#(ref == v) + 1) / 2`` and is sent to
    ``(2 * rank - n - 1) / n``; for members of ``reference`` this is exactly
    their midrank rescaling.
    """
    ref = np.sort(np.asarray(reference, dtype=float))
    x = np.asarray(x, dtype=float)
    _finite_or_raise(ref, "reference value")
    _finite_or_raise(x)
    n = ref.size
    if n == 0:
        raise DataError("empty reference sample")
    less = np.searchsorted(ref, x, side="left")
    leq = np.searchsorted(ref, x, side="right")
    rank = less + (leq - less + 1) / 2.0
    return (2.0 * rank - n - 1.0) / n


def ecdf_rescale(x) -> np.ndarray:
    """Midrank ECDF rescaling ``u_i = (2 r_i - n - 1) / n``; ties share the average rank."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise DataError("ecdf_rescale needs at least one value")
    return ecdf_transform(x, x)


def binary_expand_array(u, depth: int) -> np.ndarray:
    """Vectorized greedy expansion; returns ``len(u) x depth`` signs (int8).

    A remainder of exactly zero takes the -1 branch, so dyadic rationals get
    the expansion that ends in repeating ones.
    """
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1) or not np.all(np.isfinite(u)):
        bad = int(np.flatnonzero(~(np.abs(u) <= 1))[0])
        raise DataError(f"value {u.flat[bad]} at index {bad} is outside [-1, 1]")
    r = u.copy()
    out = np.empty(u.shape + (depth,), dtype=np.int8)
    step = 0.5
    for d in range(depth):
        a = np.where(r > 0, 1, -1)
        out[..., d] = a
        r = r - a * step
        step *= 0.5
    return out


def binary_expand(u: float, D: int) -> tuple[int, ...]:
    """First ``D`` signs of the dyadic expansion ``u = sum_d A_d 2**-d``."""
    if not abs(u) <= 1:
        raise DataError(f"cannot expand {u}: outside [-1, 1]")
    return tuple(int(a) for a in binary_expand_array(np.array([u]), D)[0])


def reconstruct(signs) -> np.ndarray:
    """``sum_d A_d 2**-d`` along the last axis."""
    signs = np.asarray(signs, dtype=float)
    w = 0.5 ** np.arange(1, signs.shape[-1] + 1)
    return signs @ w


def _binary_column(values: Sequence, spec: VariableSpec) -> np.ndarray:
    levels = sorted({str(v) for v in values})
    if len(levels) > 2:
        raise DataError(f"binary column {spec.name!r} has {len(levels)} levels: {levels[:5]}")
    positive = spec.positive
    if positive is None:
        if set(levels) <= {"0", "1"} or set(levels) <= {"-1", "1"}:
            positive = "1"
        else:
            raise ConfigError(f"binary column {spec.name!r} needs a declared positive level")
    return np.where(np.array([str(v) for v in values]) == positive, 1, -1).astype(np.int8)


def encode_binary(values: Sequence, positive: str | None = None, name: str = "response") -> np.ndarray:
    """Map a two-level column to +-1, with ``positive`` (default ``"1"`` for 0/1 or +-1 data) as +1."""
    return _binary_column(values, VariableSpec(name, "binary", 1, positive))


def _numeric_column(values, name: str) -> np.ndarray:
    try:
        x = np.asarray(values, dtype=float)
    except ValueError:
        raise DataError(f"column {name!r} is not numeric") from None
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise DataError(f"column {name!r}: non-finite value at row {int(bad[0])}")
    return x


def build_panel(
    columns: Mapping[str, Sequence],
    config: ExpansionConfig,
    reference: Mapping[str, Sequence] | None = None,
) -> BitPanel:
    """Expand raw columns into a :class:`BitPanel`.

    ``reference`` optionally supplies the sample whose empirical CDF defines
    the ECDF variables (for example training data when expanding a test set);
    by default each column is ranked against itself.
    """
    n = None
    for spec in config.variables:
        if spec.name not in columns:
            raise ConfigError(f"unknown column {spec.name!r}")
        m = len(columns[spec.name])
        if n is None:
            n = m
        elif m != n:
            raise DataError(f"column {spec.name!r} has {m} rows, expected {n}")
    if not n:
        raise DataError("no data rows")

    blocks = []
    clamped = {}
    for spec in config.variables:
        values = columns[spec.name]
        if spec.kind == "binary":
            blocks.append(_binary_column(values, spec)[:, None])
            continue
        x = _numeric_column(values, spec.name)
        if spec.kind == "continuous-ecdf":
            ref = x if reference is None else _numeric_column(reference[spec.name], spec.name)
            u = ecdf_transform(ref, x)
        else:
            lo, hi = spec.value_range
            u = 2.0 * (x - lo) / (hi - lo) - 1.0
            outside = (u < -1) | (u > 1)
            clamped[spec.name] = int(outside.sum())
            u = np.clip(u, -1.0, 1.0)
        blocks.append(binary_expand_array(u, spec.depth))
    bits = np.concatenate(blocks, axis=1)
    weights = 1 << np.arange(bits.shape[1], dtype=np.int64)
    cell = ((bits == -1).astype(np.int64) * weights).sum(axis=1)
    return BitPanel(bits, cell, config.bit_labels(), config.bit_index(), clamped)


def read_csv_columns(path: str | Path) -> dict[str, list[str]]:
    """Read a UTF-8 CSV with a header row into raw string columns.

    Rows with missing entries are rejected rather than dropped.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        cols: dict[str, list[str]] = {h: [] for h in header}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header) or any(v.strip() == "" for v in row):
                raise DataError(f"{path}:{lineno}: missing or extra entries")
            for h, v in zip(header, row):
                cols[h].append(v.strip())
    return cols


def load_config(path: str | Path) -> tuple[ExpansionConfig, dict]:
    """Parse a JSON config; returns the expansion config and the raw document."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from None
    return ExpansionConfig.from_dict(doc), doc
