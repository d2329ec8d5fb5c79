"""Slope significance, conditional independence statements, and the precision-matrix check."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .bitalgebra import Subgroup, default_bit_labels, mask_label, minimal_generators, span, wht
from .errors import DataError, DegeneracyError
from .estimator import (
    BeliefFit,
    CellTable,
    DegenerateVarianceWarning,
    aggregate,
    covariance,
    fit_lse,
)
from .expansion import BitPanel

__all__ = [
    "SlopeTest",
    "CondIndepStatement",
    "PrecisionCheck",
    "significant_slopes",
    "independence_report",
    "precision_zero_check",
    "precision_zero_check_population",
    "population_moments",
]

POPULATION_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class SlopeTest:
    mask: int
    label: str
    estimate: float
    se: float
    z: float
    adjusted_alpha: float
    significant: bool
    ci_low: float
    ci_high: float
    flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "mask": self.mask,
            "label": self.label,
            "estimate": self.estimate,
            "se": self.se,
            "z": self.z,
            "adjusted_alpha": self.adjusted_alpha,
            "significant": self.significant,
            "ci": [self.ci_low, self.ci_high],
            "flagged": self.flagged,
        }


def significant_slopes(
    fit: BeliefFit,
    table: CellTable | None = None,
    alpha: float = 0.01,
    correction: str = "bonferroni",
) -> list[SlopeTest]:
    """Per-slope z-tests with intervals at the multiplicity-adjusted level.

    With Bonferroni correction each of the ``2**P`` slopes is tested at
    ``alpha / 2**P``.  If the plug-in variance is zero (every cell
    deterministic) the tests are undefined and every entry is flagged.
    """
    if not 0 < alpha < 1:
        raise DataError(f"alpha must lie in (0, 1), got {alpha}")
    table = fit.table if table is None else table
    N = fit.beta.size
    if correction == "bonferroni":
        level = alpha / N
    elif correction == "none":
        level = alpha
    else:
        raise DataError(f"unknown correction {correction!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateVarianceWarning)
        cov = covariance(fit, table, full=False)
    se = cov.standard_error
    crit = float(stats.norm.isf(level / 2))
    labels = fit.mask_labels()
    out = []
    for m in range(N):
        est = float(fit.beta[m])
        if se > 0:
            z = est / se
            out.append(SlopeTest(m, labels[m], est, se, z, level, abs(z) > crit,
                                 est - crit * se, est + crit * se))
        else:
            out.append(SlopeTest(m, labels[m], est, 0.0, math.nan, level, False,
                                 math.nan, math.nan, flagged=True))
    return out


@dataclass(frozen=True)
class CondIndepStatement:
    subgroup: Subgroup
    generators: list[int]
    generator_labels: list[str]
    statement: str

    @property
    def k(self) -> int:
        return len(self.generators)

    def to_dict(self) -> dict:
        return {
            "statement": self.statement,
            "generators": [{"mask": m, "label": lab} for m, lab in zip(self.generators, self.generator_labels)],
            "k": self.k,
            "order": self.subgroup.order,
            "members": self.subgroup.members(),
        }


def independence_report(
    masks_nonzero: Iterable[int],
    bit_labels: Sequence[str] | None = None,
    P: int | None = None,
) -> CondIndepStatement:
    """Conditioning subgroup spanned by the nonzero-slope masks.

    ``B`` is independent of every interaction given any generating set of
    this subgroup; the constant mask is dropped since conditioning on a
    constant says nothing.
    """
    masks = sorted({int(m) for m in masks_nonzero if int(m) != 0})
    if P is None:
        P = len(bit_labels) if bit_labels is not None else max([m.bit_length() for m in masks] + [1])
    if any(m >> P for m in masks):
        raise DataError(f"mask outside the {P}-bit space")
    labels = list(bit_labels) if bit_labels is not None else default_bit_labels(P)
    g = span(masks)
    gens = minimal_generators(g)
    gen_labels = [mask_label(m, labels) for m in gens]
    everything = "(" + ",".join(labels) + ")"
    if not gens:
        given = "1"
    elif len(gens) == 1:
        given = gen_labels[0]
    else:
        given = "(" + ", ".join(gen_labels) + ")"
    statement = f"B ⫫ {everything} | {given}"
    return CondIndepStatement(g, gens, gen_labels, statement)


@dataclass(frozen=True)
class PrecisionCheck:
    masks: list[int]
    slopes: np.ndarray
    precision_column: np.ndarray
    slope_zero: list[bool]
    precision_zero: list[bool]

    @property
    def equivalent(self) -> bool:
        return self.slope_zero == self.precision_zero


def population_moments(cell_probs, cell_expectations) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and covariance of ``C = (B, A_otimes without the constant)``.

    ``cell_probs`` is the distribution of the cell and ``cell_expectations``
    is ``E[B | cell]``; any empirical table gives its sample analogue.
    """
    p = np.asarray(cell_probs, dtype=float)
    e = np.asarray(cell_expectations, dtype=float)
    N = p.size
    # E[A_m] = wht(p)[m]; E[A_a A_b] = E[A_{a^b}]; E[B A_m] = wht(p e)[m]
    ea = wht(p)
    eba = wht(p * e)
    idx = np.arange(1, N)
    mean = np.concatenate(([eba[0]], ea[1:]))
    second = np.empty((N, N))
    second[0, 0] = 1.0
    second[0, 1:] = second[1:, 0] = eba[1:]
    second[1:, 1:] = ea[idx[:, None] ^ idx[None, :]]
    return mean, second - np.outer(mean, mean)


def _masks_with_bits(P: int, bits: Sequence[int]) -> list[int]:
    sel = 0
    for k in bits:
        sel |= 1 << int(k)
    return [m for m in range(1 << P) if m & sel]


def _precision_column(cov: np.ndarray) -> np.ndarray:
    try:
        cond = np.linalg.cond(cov)
    except np.linalg.LinAlgError:
        cond = math.inf
    if not np.isfinite(cond) or cond > 1e12:
        raise DegeneracyError("covariance of (B, interactions) is singular")
    return np.linalg.inv(cov)[:, 0]


def precision_zero_check_population(cell_probs, beta, bits: int | Sequence[int]) -> PrecisionCheck:
    """Compare zero patterns of slopes and of the precision matrix on masks touching ``bits``.

    Population version: exact moments from the cell distribution, zeros judged
    at ``|value| < 1e-8``.
    """
    beta = np.asarray(beta, dtype=float)
    N = beta.size
    P = N.bit_length() - 1
    bits = [bits] if np.ndim(bits) == 0 else list(bits)
    e = wht(beta)
    if np.max(np.abs(e)) >= 1:
        raise DegeneracyError("some cell is deterministic; the precision matrix check needs |H beta| < 1")
    _, cov = population_moments(cell_probs, e)
    col = _precision_column(cov)
    masks = _masks_with_bits(P, bits)
    return PrecisionCheck(
        masks=masks,
        slopes=beta[masks],
        precision_column=col[masks],
        slope_zero=[abs(beta[m]) < POPULATION_ZERO_TOL for m in masks],
        precision_zero=[abs(col[m]) < POPULATION_ZERO_TOL for m in masks],
    )


def precision_zero_check(
    panel: BitPanel, response, bits: int | Sequence[int], alpha: float = 0.01
) -> PrecisionCheck:
    """Sample version of the slope / precision zero-pattern comparison.

    The first column of the inverse sample covariance of ``(B, A_otimes)`` is
    ``-beta / s2`` on the interaction rows, where ``s2`` is the residual
    variance of the least squares fit, so both patterns are judged with the
    same per-entry z-test at level ``alpha``: slopes with their plug-in
    standard error, precision entries with that error scaled by ``1 / s2``.
    """
    table = aggregate(panel, response)
    fit = fit_lse(table)
    e = fit.cell_expectations
    if np.max(np.abs(e)) >= 1:
        raise DegeneracyError("some cell is deterministic; the precision matrix check needs |H beta| < 1")
    bits = [bits] if np.ndim(bits) == 0 else list(bits)
    _, cov = population_moments(table.counts / table.n, e)
    col = _precision_column(cov)
    se = covariance(fit, table, full=False).standard_error
    resid_var = 1.0 / col[0]
    crit = float(stats.norm.isf(alpha / 2))
    masks = _masks_with_bits(panel.P, bits)
    return PrecisionCheck(
        masks=masks,
        slopes=fit.beta[masks],
        precision_column=col[masks],
        slope_zero=[abs(fit.beta[m]) / se <= crit for m in masks],
        precision_zero=[abs(col[m]) * resid_var / se <= crit for m in masks],
    )
