"""Translation between GLM coefficients and BELIEF slopes on saturated binary designs.

Both coefficient vectors are indexed by interaction mask.  Cell linear
predictors are ``wht(gamma)`` and cell expectations are ``wht(beta)``, so the
bijection is ``beta = 2**-P wht(g_inv(wht(gamma)))`` and its inverse.

Links act on the expectation scale ``E[B | A]`` in (-1, 1) with ``B = +-1``:
``logit`` has ``g_inv(x) = tanh(x / 2)`` (i.e. ``P(B = 1) = sigmoid(x)``) and
``probit`` has ``g_inv(x) = 2 Phi(x) - 1``.

Passing ``precision`` (decimal digits, or ``"auto"``) to the transforms runs
them in mpmath instead and returns arrays of ``mpf``; use it when linear
predictors are so large that ``1 - |E[B | A]|`` underflows in long double.

Cell expectations close to +-1 lose most of their information to rounding
in double precision, so the transforms run in ``np.longdouble`` and return
arrays of that dtype.  On platforms where ``longdouble`` is plain double the
code still works, with the usual double precision accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import special

from .bitalgebra import mask_bits, mask_label, wht
from .errors import ConfigError, DataError, SeparationError
from .expansion import MAX_TOTAL_BITS

__all__ = [
    "Link",
    "LOGIT",
    "PROBIT",
    "IDENTITY",
    "get_link",
    "glm_to_belief",
    "belief_to_glm",
    "taylor_sensitivity",
    "HiddenInteractionReport",
    "hidden_interaction_report",
    "to_probability_scale",
]

LD = np.longdouble


def _logit_inv(x):
    x = np.asarray(x, dtype=LD)
    return np.tanh(x / 2)


def _logit(y):
    y = np.asarray(y, dtype=LD)
    return 2 * np.arctanh(y)


def _logit_inv_deriv(x):
    x = np.asarray(x, dtype=LD)
    return (1 - np.tanh(x / 2) ** 2) / 2


_SQRT2 = np.sqrt(LD(2))


def _probit_inv(x):
    # 1 - erfc keeps the tail digits that 2*Phi(x) - 1 would round away
    x = np.asarray(x, dtype=LD)
    tail = special.erfc(np.abs(x).astype(float) / math.sqrt(2.0)).astype(LD)
    return np.sign(x) * (1 - tail)


def _probit(y):
    y = np.asarray(y, dtype=LD)
    tail = (1 - np.abs(y)).astype(float)
    return np.sign(y) * _SQRT2 * special.erfcinv(tail).astype(LD)


def _probit_inv_deriv(x):
    x = np.asarray(x, dtype=float)
    return (2.0 * np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)).astype(LD)


@dataclass(frozen=True)
class Link:
    """Strictly increasing link ``g: (-1, 1) -> R`` with its inverse and the inverse's derivative.

    ``bounded`` is False for links whose inverse can leave (-1, 1), such as the
    identity; those are only usable where the caller keeps predictors in range.
    """

    name: str
    g: Callable
    g_inv: Callable
    g_inv_deriv: Callable
    bounded: bool = True


LOGIT = Link("logit", _logit, _logit_inv, _logit_inv_deriv)
PROBIT = Link("probit", _probit, _probit_inv, _probit_inv_deriv)
IDENTITY = Link(
    "identity",
    lambda y: np.asarray(y, dtype=LD),
    lambda x: np.asarray(x, dtype=LD),
    lambda x: np.ones_like(np.asarray(x, dtype=LD)),
    bounded=False,
)

_LINKS = {"logit": LOGIT, "probit": PROBIT, "identity": IDENTITY}


def get_link(name: str | Link) -> Link:
    if isinstance(name, Link):
        return name
    try:
        return _LINKS[name]
    except KeyError:
        raise ConfigError(f"unknown link {name!r}; choose from {sorted(_LINKS)}") from None


def _as_coefs(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=LD)
    if v.ndim != 1 or v.size < 1 or v.size & (v.size - 1):
        raise DataError(f"{what} must be a vector of length 2**P")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{what} has non-finite entries")
    return v


def _mp_wht(v: list) -> list:
    v = list(v)
    h = 1
    while h < len(v):
        for i in range(0, len(v), 2 * h):
            for j in range(i, i + h):
                a, b = v[j], v[j + h]
                v[j], v[j + h] = a + b, a - b
        h *= 2
    return v


def _mp_g_inv(name: str, x):
    if name == "logit":
        return mpmath.tanh(x / 2)
    if name == "probit":
        return mpmath.sign(x) * (1 - mpmath.erfc(abs(x) / mpmath.sqrt(2)))
    return x


def _mp_g(name: str, y):
    if name == "logit":
        return 2 * mpmath.atanh(y)
    if name == "probit":
        return mpmath.sqrt(2) * mpmath.erfinv(y)
    return y


def _auto_digits(values) -> int:
    # tails shrink like exp(-x) (logit) or exp(-x**2 / 2) (probit); keep 30 digits beyond them
    top = float(max((abs(float(v)) for v in values), default=0.0))
    return 30 + int(math.ceil(max(top, top * top / 2) / math.log(10)))


def _as_mp_coefs(v, what: str) -> list:
    vals = list(np.asarray(v, dtype=object).ravel())
    n = len(vals)
    if n < 1 or n & (n - 1):
        raise DataError(f"{what} must be a vector of length 2**P")
    out = [mpmath.mpf(x) if not isinstance(x, (np.floating, float)) else mpmath.mpf(float(x)) for x in vals]
    if not all(mpmath.isfinite(x) for x in out):
        raise DataError(f"{what} has non-finite entries")
    return out


def _glm_to_belief_mp(gamma, link: Link, precision) -> np.ndarray:
    with mpmath.workdps(15):
        g = _as_mp_coefs(gamma, "gamma")
        eta = _mp_wht(g)
    digits = _auto_digits(eta) if precision == "auto" else int(precision)
    with mpmath.workdps(digits):
        g = _as_mp_coefs(gamma, "gamma")
        cells = [_mp_g_inv(link.name, x) for x in _mp_wht(g)]
        if any(abs(c) > 1 for c in cells):
            raise DataError(f"link {link.name!r} maps some cell outside [-1, 1]")
        if link.bounded and any(abs(c) == 1 for c in cells):
            raise SeparationError("cell expectations reached +-1 even at the requested precision")
        beta = [c / len(cells) for c in _mp_wht(cells)]
    return np.array(beta, dtype=object)


def _belief_to_glm_mp(beta, link: Link, precision) -> np.ndarray:
    # slopes near a vertex only carry the tail digits they were given, so "auto"
    # works from the precision of the incoming mpf values
    b0 = list(np.asarray(beta, dtype=object).ravel())
    if precision == "auto":
        bits = [int(x.man).bit_length() for x in b0 if isinstance(x, mpmath.mpf)]
        digits = max([mpmath.mp.dps, 30] + [int(k * 0.30103) + 10 for k in bits])
    else:
        digits = int(precision)
    with mpmath.workdps(digits):
        b = _as_mp_coefs(beta, "beta")
        cells = _mp_wht(b)
        sep = [t for t, c in enumerate(cells) if abs(c) >= 1]
        if sep:
            raise SeparationError(f"separation: GLM coefficients do not exist (cells {sep} are deterministic)")
        gamma = [x / len(cells) for x in _mp_wht([_mp_g(link.name, c) for c in cells])]
    return np.array(gamma, dtype=object)


def glm_to_belief(gamma, link: str | Link = "logit", precision: int | str | None = None) -> np.ndarray:
    """BELIEF slopes of the GLM ``E[B | A] = g_inv(gamma . A_otimes)``."""
    link = get_link(link)
    if precision is not None:
        return _glm_to_belief_mp(gamma, link, precision)
    gamma = _as_coefs(gamma, "gamma")
    cells = link.g_inv(wht(gamma))
    if not np.all(np.abs(cells) <= 1):
        raise DataError(f"link {link.name!r} maps some cell outside [-1, 1]")
    if link.bounded and np.any(np.abs(cells) == 1):
        raise SeparationError(
            "cell expectations reached +-1 in floating point; linear predictors are too large"
        )
    return wht(cells) / gamma.size


def belief_to_glm(beta, link: str | Link = "logit", precision: int | str | None = None) -> np.ndarray:
    """GLM coefficients equivalent to slopes ``beta``.

    Raises :class:`SeparationError` when a cell expectation is +-1: a GLM
    cannot reach it with finite coefficients (the MLE does not exist).
    """
    link = get_link(link)
    if precision is not None:
        return _belief_to_glm_mp(beta, link, precision)
    beta = _as_coefs(beta, "beta")
    cells = wht(beta)
    sep = np.flatnonzero(np.abs(cells) >= 1)
    if sep.size:
        raise SeparationError(
            f"separation: GLM coefficients do not exist (cells {sep.tolist()} are deterministic)"
        )
    return wht(link.g(cells)) / beta.size


def taylor_sensitivity(gamma, link: str | Link = "logit") -> np.ndarray:
    """Jacobian ``d beta / d gamma = 2**-P H diag(g_inv'(H gamma)) H``."""
    link = get_link(link)
    gamma = _as_coefs(gamma, "gamma")
    N = gamma.size
    d = np.asarray(link.g_inv_deriv(wht(gamma)), dtype=LD)
    # H diag(d) H depends only on wht(d)[a ^ b]
    spec = wht(d) / N
    idx = np.arange(N)
    return spec[idx[:, None] ^ idx[None, :]]


def to_probability_scale(beta) -> np.ndarray:
    """Slopes of ``P(B = 1 | A) = (1 + E[B | A]) / 2``."""
    out = np.array(beta, dtype=LD) / 2
    out[0] += LD(0.5)
    return out


@dataclass
class HiddenInteractionReport:
    """BELIEF view of a main-effects GLM in bits of continuous uniforms."""

    link: str
    depth: int
    weights: str
    mode: str
    bit_labels: list[str]
    gamma: np.ndarray
    beta: np.ndarray
    prob_beta: np.ndarray
    cross_masks: list[int] = field(default_factory=list)

    def cross_labels(self) -> list[str]:
        return [mask_label(m, self.bit_labels) for m in self.cross_masks]

    def to_dict(self, scale: str = "expectation") -> dict:
        """JSON report restricted to the cross-variable interaction masks."""
        values = self.beta if scale == "expectation" else self.prob_beta
        return {
            "scale": scale,
            "link": self.link,
            "depth": self.depth,
            "weights": self.weights,
            "mode": self.mode,
            "masks": [{"mask": m, "label": mask_label(m, self.bit_labels)} for m in self.cross_masks],
            "beta": [float(values[m]) for m in self.cross_masks],
            "gamma": [float(self.gamma[m]) for m in self.cross_masks],
        }


def _bit_layout(p: int, depth: int) -> tuple[list[int], list[int], list[str]]:
    var_of, depth_of, labels = [], [], []
    for j in range(p):
        for d in range(1, depth + 1):
            var_of.append(j)
            depth_of.append(d)
            labels.append(f"A_{{{j + 1},{d}}}")
    return var_of, depth_of, labels


def _cell_average(intercept, coefs, link: Link, depth: int, nodes: int) -> np.ndarray:
    """Exact ``E[B | bits]`` for ``B`` with ``E[B | U] = g_inv(intercept + coefs . U)``, ``U`` uniform.

    Each dyadic cell is integrated with a tensor Gauss-Legendre rule.
    """
    p = len(coefs)
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 2.0 ** -depth  # half-width of a depth-D dyadic interval
    # centre of the interval selected by signs a_1..a_D is sum a_d 2**-d
    sign_rows = np.array(list(product((1, -1), repeat=depth)), dtype=float)  # index bit d set -> -1
    order = [int("".join("1" if s < 0 else "0" for s in row[::-1]), 2) for row in sign_rows]
    centres = np.empty(1 << depth)
    centres[order] = sign_rows @ (0.5 ** np.arange(1, depth + 1))
    per_var = (centres[:, None] + half * x[None, :])  # (2**D, nodes)
    cells = np.empty(1 << (p * depth), dtype=LD)
    for t in range(cells.size):
        eta = np.full([nodes] * p, float(intercept))
        weight = np.ones([nodes] * p)
        for j in range(p):
            sub = (t >> (j * depth)) & ((1 << depth) - 1)
            shape = [1] * p
            shape[j] = nodes
            eta = eta + coefs[j] * per_var[sub].reshape(shape)
            weight = weight * w.reshape(shape)
        cells[t] = np.sum(weight * link.g_inv(eta)) / (2.0**p)
    return cells


def hidden_interaction_report(
    intercept: float,
    coefs: Sequence[float],
    link: str | Link = "logit",
    depth: int = 1,
    weights: str = "dyadic",
    mode: str = "truncated",
    threshold: float = 1e-12,
    nodes: int = 24,
) -> HiddenInteractionReport:
    """BELIEF slopes implied by ``g_inv(intercept + sum_j coefs[j] U_j)`` on bits of each ``U_j``.

    ``mode="truncated"`` replaces each ``U_j`` by ``sum_i w_i A_{j,i}`` with
    ``w_i = 2**-i`` (``weights="dyadic"``) or ``w_i = 1`` (``weights="unit"``)
    and maps that saturated GLM to slopes.  ``mode="cell-average"`` instead
    averages ``g_inv`` over each dyadic cell of independent uniforms, which
    gives the slopes of ``E[B | bits]`` itself; those do not change when the
    depth grows.

    ``cross_masks`` lists masks mixing bits of two or more variables whose
    slope exceeds ``threshold`` in absolute value.
    """
    link = get_link(link)
    coefs = [float(c) for c in coefs]
    p = len(coefs)
    if p < 1 or depth < 1:
        raise ConfigError("need at least one variable and depth >= 1")
    if p * depth > MAX_TOTAL_BITS:
        raise ConfigError(f"{p} variables at depth {depth} exceed the {MAX_TOTAL_BITS}-bit cap")
    if weights not in ("dyadic", "unit"):
        raise ConfigError(f"unknown bit weighting {weights!r}")
    var_of, depth_of, labels = _bit_layout(p, depth)
    P = p * depth
    gamma = np.zeros(1 << P, dtype=LD)
    gamma[0] = intercept
    for k in range(P):
        w = 2.0 ** -depth_of[k] if weights == "dyadic" else 1.0
        gamma[1 << k] = coefs[var_of[k]] * w

    if mode == "truncated":
        beta = glm_to_belief(gamma, link)
    elif mode == "cell-average":
        cells = _cell_average(intercept, coefs, link, depth, nodes)
        beta = wht(cells) / cells.size
        gamma = belief_to_glm(beta, link) if link.bounded else gamma
    else:
        raise ConfigError(f"unknown mode {mode!r}")

    cross = []
    for m in range(1, 1 << P):
        involved = {var_of[k] for k in mask_bits(m)}
        if len(involved) >= 2 and abs(beta[m]) > threshold:
            cross.append(m)
    return HiddenInteractionReport(
        link=link.name,
        depth=depth,
        weights=weights,
        mode=mode,
        bit_labels=labels,
        gamma=gamma,
        beta=beta,
        prob_beta=to_probability_scale(beta),
        cross_masks=cross,
    )
