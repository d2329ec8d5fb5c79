"""Simulation scenarios, the logistic baseline, ROC/AUC and approximation-rate experiments.

All randomness comes from ``numpy.random.Generator(Philox(seed))`` so every
run is reproducible from its seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import ConfigError, DataError
from .estimator import CellTable, fit_mp
from .expansion import MAX_TOTAL_BITS, binary_expand_array, ecdf_transform, reconstruct

__all__ = [
    "SCENARIOS",
    "SimData",
    "make_rng",
    "generate",
    "IrlsResult",
    "interaction_design",
    "fit_logistic_irls",
    "RocCurve",
    "roc_auc",
    "ComparisonResult",
    "run_comparison",
    "RateRow",
    "rate_check",
    "DoubleLimitRow",
    "double_limit",
    "clipped_normal_mean",
]

SCENARIOS = {
    1: "X1, X2 iid Unif(-1, 1); logit P(B=1) = 2 X1 + X2",
    2: "X1, X2 iid N(0, 1); logit P(B=1) = X1^2 + X2^2",
    3: "theta ~ Unif[-pi, pi], X = (cos, sin)(theta) + 0.2 eps; logit P(B=1) = 3 cos(pi (X1 + X2))",
}


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class SimData:
    x: np.ndarray  # (n, 2)
    b: np.ndarray  # +-1
    prob: np.ndarray  # true P(B = 1 | X)


def generate(scenario: int, n: int, seed: int) -> SimData:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    if n < 1:
        raise ConfigError("n must be positive")
    rng = make_rng(seed)
    if scenario == 1:
        x = rng.uniform(-1.0, 1.0, size=(n, 2))
        eta = 2 * x[:, 0] + x[:, 1]
    elif scenario == 2:
        x = rng.standard_normal(size=(n, 2))
        eta = x[:, 0] ** 2 + x[:, 1] ** 2
    else:
        theta = rng.uniform(-np.pi, np.pi, size=n)
        eps = rng.standard_normal(size=(n, 2))
        x = np.column_stack((np.cos(theta), np.sin(theta))) + 0.2 * eps
        eta = 3 * np.cos(np.pi * (x[:, 0] + x[:, 1]))
    prob = special.expit(eta)
    b = np.where(rng.uniform(size=n) < prob, 1, -1).astype(np.int8)
    return SimData(x, b, prob)


def interaction_design(x) -> np.ndarray:
    """Columns ``1, x1, x2, x1 * x2``."""
    x = np.asarray(x, dtype=float)
    return np.column_stack((np.ones(len(x)), x[:, 0], x[:, 1], x[:, 0] * x[:, 1]))


@dataclass(frozen=True)
class IrlsResult:
    coef: np.ndarray
    se: np.ndarray
    converged: bool
    separation_suspected: bool
    iterations: int
    deviance: float

    def predict_proba(self, design) -> np.ndarray:
        return special.expit(np.asarray(design, dtype=float) @ self.coef)


def _deviance(y01, eta) -> float:
    # -2 log-likelihood, computed stably from the linear predictor
    return float(2 * np.sum(np.logaddexp(0, eta) - y01 * eta))


def fit_logistic_irls(design, y, tol: float = 1e-8, max_iter: int = 100, eta_cap: float = 30.0) -> IrlsResult:
    """Logistic regression by iteratively reweighted least squares.

    ``y`` may be coded +-1 or 0/1.  Stops when no coefficient moves by more
    than ``tol``.  If fitted linear predictors pass ``eta_cap`` the likelihood
    is heading to its supremum at infinity (separation), so the fit stops and
    reports ``converged=False, separation_suspected=True``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    y01 = (y > 0).astype(float)
    n, k = X.shape
    if y.shape != (n,):
        raise DataError("response length does not match the design")
    if np.linalg.matrix_rank(X) < k:
        raise DataError("design matrix is rank deficient")
    coef = np.zeros(k)
    converged = False
    separated = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = X @ coef
        mu = special.expit(eta)
        w = mu * (1 - mu)
        z = eta + (y01 - mu) / np.maximum(w, 1e-300)
        sw = np.sqrt(w)
        new, *_ = np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)
        step = np.max(np.abs(new - coef))
        coef = new
        if np.max(np.abs(X @ coef)) > eta_cap:
            separated = True
            break
        if step < tol:
            converged = True
            break
    eta = X @ coef
    mu = special.expit(eta)
    info = X.T @ (X * (mu * (1 - mu))[:, None])
    try:
        se = np.sqrt(np.diag(np.linalg.inv(info)))
    except np.linalg.LinAlgError:
        se = np.full(k, np.inf)
    if not converged and not separated and np.max(np.abs(eta)) > 0.5 * eta_cap:
        separated = True
    return IrlsResult(coef, se, converged, separated, it, _deviance(y01, eta))


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))


def roc_auc(scores, labels) -> RocCurve:
    """ROC points from a sweep over distinct scores, highest first.

    Tied scores move the curve diagonally, so the trapezoidal area equals the
    Mann-Whitney statistic with ties counted as one half.
    """
    s = np.asarray(scores, dtype=float)
    lab = np.asarray(labels)
    pos = (lab > 0) if lab.dtype != bool else lab
    if s.shape != pos.shape:
        raise DataError("scores and labels differ in length")
    n_pos = int(pos.sum())
    n_neg = int(pos.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs at least one label of each class")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    p_sorted = pos[order]
    tp = np.cumsum(p_sorted)
    fp = np.cumsum(~p_sorted)
    last_of_group = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), s_sorted.size - 1]
    tpr = np.r_[0.0, tp[last_of_group] / n_pos]
    fpr = np.r_[0.0, fp[last_of_group] / n_neg]
    thresholds = np.r_[np.inf, s_sorted[last_of_group]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return RocCurve(fpr, tpr, thresholds, auc)


@dataclass
class ComparisonResult:
    scenario: int
    seed: int
    n_train: int
    n_test: int
    auc: dict[str, float]
    roc: dict[str, RocCurve]
    logistic_converged: bool
    empty_cells: dict[str, int] = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "auc": dict(self.auc),
            "logistic_converged": self.logistic_converged,
            "empty_cells": dict(self.empty_cells),
        }

    def write_roc_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "fpr", "tpr", "threshold"])
            for method, curve in self.roc.items():
                for f, t, th in curve.to_rows():
                    w.writerow([method, f"{f:.6g}", f"{t:.6g}", f"{th:.6g}"])


def _cells(bits: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(bits.shape[1], dtype=np.int64)
    return ((bits == -1).astype(np.int64) * weights).sum(axis=1)


def _expand_pair(x_train, x_eval, depth: int) -> np.ndarray:
    blocks = [binary_expand_array(ecdf_transform(x_train[:, j], x_eval[:, j]), depth) for j in range(x_train.shape[1])]
    return _cells(np.concatenate(blocks, axis=1))


def belief_scores(x_train, b_train, x_test, depth: int) -> tuple[np.ndarray, int]:
    """Test-set ``P(B = 1)`` from an mp fit on ECDF bits learned from the training covariates."""
    P = depth * x_train.shape[1]
    if P > MAX_TOTAL_BITS:
        raise ConfigError(f"depth {depth} exceeds the bit cap")
    size = 1 << P
    train_cells = _expand_pair(x_train, x_train, depth)
    counts = np.bincount(train_cells, minlength=size)
    sums = np.rint(np.bincount(train_cells, weights=b_train.astype(float), minlength=size))
    fit = fit_mp(CellTable(P, counts.astype(np.int64), sums.astype(np.int64)))
    test_cells = _expand_pair(x_train, x_test, depth)
    prob = (1.0 + fit.cell_expectations[test_cells]) / 2.0
    if np.any(prob < 0) or np.any(prob > 1):
        raise AssertionError("fitted probabilities left [0, 1]")
    return prob, len(fit.empty_cells)


def run_comparison(
    scenario: int,
    depths: Sequence[int] = (1, 2, 3),
    n_train: int = 8192,
    n_test: int = 4096,
    seed: int = 0,
) -> ComparisonResult:
    """Train BELIEF at each depth and the logistic-with-interaction baseline; score a held-out set."""
    data = generate(scenario, n_train + n_test, seed)
    perm = make_rng(seed + 1_000_003).permutation(n_train + n_test)
    tr, te = perm[:n_train], perm[n_train:]
    x_tr, b_tr, x_te, b_te = data.x[tr], data.b[tr], data.x[te], data.b[te]
    auc, roc, empty = {}, {}, {}
    for d in depths:
        prob, n_empty = belief_scores(x_tr, b_tr, x_te, int(d))
        key = f"belief_d{int(d)}"
        roc[key] = roc_auc(prob, b_te)
        auc[key] = roc[key].auc
        empty[key] = n_empty
    irls = fit_logistic_irls(interaction_design(x_tr), b_tr)
    roc["logistic"] = roc_auc(irls.predict_proba(interaction_design(x_te)), b_te)
    auc["logistic"] = roc["logistic"].auc
    return ComparisonResult(scenario, seed, n_train, n_test, auc, roc, irls.converged, empty)


@dataclass(frozen=True)
class RateRow:
    depth: int
    quantile_error: float
    max_error: float
    ratio: float | None  # this depth's quantile over the previous depth's


def rate_check(
    g: Callable[[np.ndarray], np.ndarray],
    p: int,
    depths: Sequence[int],
    n: int = 1_000_000,
    seed: int = 0,
    q: float = 0.95,
) -> list[RateRow]:
    """Quantiles of ``|g(U) - g(U_D)|`` for ``U`` uniform on (-1, 1)**p and its depth-D truncation.

    ``g`` receives an ``(n, p)`` array and returns ``n`` values.
    """
    u = make_rng(seed).uniform(-1.0, 1.0, size=(n, p))
    gu = np.asarray(g(u), dtype=float)
    rows: list[RateRow] = []
    prev = None
    for D in depths:
        ud = reconstruct(binary_expand_array(u, int(D)))
        err = np.abs(gu - np.asarray(g(ud), dtype=float))
        qe = float(np.quantile(err, q))
        rows.append(RateRow(int(D), qe, float(err.max()), None if prev is None else qe / prev))
        prev = qe
    return rows


@dataclass(frozen=True)
class DoubleLimitRow:
    depth_u: int
    depth_v: int
    l2_error: float


def clipped_normal_mean(mean, sd: float) -> np.ndarray:
    """``E[clip(mean + sd * eps, -1, 1)]`` for standard normal ``eps``, in closed form."""
    m = np.asarray(mean, dtype=float)
    if sd == 0:
        return np.clip(m, -1, 1)
    a = (-1 - m) / sd
    b = (1 - m) / sd
    Pa, Pb = special.ndtr(a), special.ndtr(b)
    pdf = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)  # noqa: E731
    return -Pa + (1 - Pb) + m * (Pb - Pa) + sd * (pdf(a) - pdf(b))


def double_limit(
    g: Callable[[np.ndarray], np.ndarray],
    depth_pairs: Sequence[tuple[int, int]],
    n: int = 1 << 16,
    noise_sd: float = 0.2,
    seed: int = 0,
    n_eval: int = 1 << 14,
) -> list[DoubleLimitRow]:
    """Bitwise approximation of ``E[V | U]`` for ``V = clip(g(U) + noise, -1, 1)``.

    For each ``(D1, D2)``: expand ``V`` into ``D2`` bits ``B_d``, fit an mp
    BELIEF model of each ``B_d`` on the depth-``D1`` bits of ``U``, combine
    ``sum_d 2**-d E_hat[B_d | cell]`` and report its L2 distance to
    ``E[V | U]`` over fresh uniform ``U`` (the clipped normal mean, in
    closed form).
    """
    rng = make_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=n)
    v = np.clip(g(u) + noise_sd * rng.standard_normal(n), -1.0, 1.0)
    u_eval = make_rng(seed + 7919).uniform(-1.0, 1.0, size=n_eval)
    target = clipped_normal_mean(g(u_eval), noise_sd)
    rows = []
    for d1, d2 in depth_pairs:
        cells = _cells(binary_expand_array(u, d1))
        cells_eval = _cells(binary_expand_array(u_eval, d1))
        size = 1 << d1
        counts = np.bincount(cells, minlength=size).astype(np.int64)
        vbits = binary_expand_array(v, d2)
        approx = np.zeros(size)
        for d in range(d2):
            sums = np.rint(np.bincount(cells, weights=vbits[:, d].astype(float), minlength=size)).astype(np.int64)
            fit = fit_mp(CellTable(d1, counts, sums))
            approx += fit.cell_expectations * 0.5 ** (d + 1)
        err = math.sqrt(float(np.mean((approx[cells_eval] - target) ** 2)))
        rows.append(DoubleLimitRow(int(d1), int(d2), err))
    return rows
