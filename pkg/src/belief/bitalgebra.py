"""Interaction masks, the Sylvester-Hadamard matrix and GF(2) subgroups.

Bit ``k`` of a mask names the ``k``-th binary predictor; a mask stands for
the product of the predictors it names and ``0`` is the constant term.
Cells use the same bit layout, with a set bit meaning that predictor is -1.
Under this encoding the value of interaction ``m`` in cell ``t`` is
``(-1) ** popcount(t & m)``, which is the ``(t, m)`` entry of the Sylvester
Hadamard matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "hadamard_entry",
    "hadamard_column",
    "wht",
    "popcount",
    "mask_bits",
    "mask_label",
    "default_bit_labels",
    "Subgroup",
    "span",
    "minimal_generators",
    "member",
]


def popcount(x):
    """Number of set bits; works on Python ints and integer arrays."""
    if isinstance(x, (int, np.integer)):
        return int(x).bit_count()
    x = np.asarray(x, dtype=np.uint64)
    count = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        count += (x & np.uint64(1)).astype(np.int64)
        x = x >> np.uint64(1)
    return count


def hadamard_entry(t: int, m: int) -> int:
    """Value of interaction ``m`` at cell ``t``: ``(-1) ** popcount(t & m)``."""
    return -1 if (int(t) & int(m)).bit_count() & 1 else 1


def hadamard_column(m: int, P: int) -> np.ndarray:
    """Column ``m`` of the ``2**P`` Sylvester matrix, i.e. the interaction over all cells."""
    t = np.arange(1 << P, dtype=np.uint64)
    return np.where(popcount(t & np.uint64(m)) & 1, -1, 1).astype(np.int8)


def wht(x, axis: int = -1) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along ``axis``.

    Returns ``y[m] = sum_t (-1)**popcount(t & m) * x[t]`` using ``P`` butterfly
    passes.  Applying it twice multiplies by ``2**P``; callers scale.
    The dtype of ``x`` is preserved for floating inputs (including
    ``np.longdouble``), integers stay integers.
    """
    x = np.asarray(x)
    if x.dtype.kind in "biu":
        x = x.astype(np.int64)
    elif x.dtype.kind != "f":
        x = x.astype(float)
    x = np.moveaxis(x, axis, -1)
    N = x.shape[-1]
    if N < 1 or N & (N - 1):
        raise ValueError(f"length must be a power of two, got {N}")
    lead = x.shape[:-1]
    y = np.array(x, copy=True).reshape(-1, N)
    h = 1
    while h < N:
        y = y.reshape(-1, N // (2 * h), 2, h)
        a = y[:, :, 0, :]
        b = y[:, :, 1, :]
        y = np.stack((a + b, a - b), axis=2)
        h *= 2
    y = y.reshape(lead + (N,))
    return np.moveaxis(y, -1, axis)


def mask_bits(m: int) -> list[int]:
    """Indices of the set bits of ``m``, ascending."""
    m = int(m)
    out = []
    k = 0
    while m:
        if m & 1:
            out.append(k)
        m >>= 1
        k += 1
    return out


def default_bit_labels(P: int) -> list[str]:
    return [f"A_{{{k + 1}}}" for k in range(P)]


def mask_label(m: int, bit_labels: Sequence[str] | None = None) -> str:
    """Symbolic product label, e.g. ``"A_{1,1}A_{2,1}"``; the constant is ``"1"``."""
    m = int(m)
    if m == 0:
        return "1"
    bits = mask_bits(m)
    if bit_labels is None:
        bit_labels = default_bit_labels(bits[-1] + 1)
    return "".join(bit_labels[k] for k in bits)


@dataclass(frozen=True)
class Subgroup:
    """A GF(2) subspace of masks, stored as a reduced echelon basis.

    The basis is fully reduced with pivots on the highest set bit and kept in
    ascending order, so two subgroups are equal exactly when their bases are.
    """

    basis: tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def order(self) -> int:
        return 1 << len(self.basis)

    def members(self) -> list[int]:
        """All ``2**rank`` members, sorted."""
        out = [0]
        for b in self.basis:
            out += [x ^ b for x in out]
        return sorted(out)

    def __contains__(self, m) -> bool:
        return member(self, m)


def _reduce(m: int, pivots: dict[int, int]) -> int:
    while m:
        top = m.bit_length() - 1
        b = pivots.get(top)
        if b is None:
            return m
        m ^= b
    return 0


def span(masks: Iterable[int]) -> Subgroup:
    """Subgroup generated by ``masks`` under XOR (Gaussian elimination over GF(2))."""
    pivots: dict[int, int] = {}
    for m in masks:
        m = int(m)
        if m < 0:
            raise ValueError("masks must be non-negative")
        r = _reduce(m, pivots)
        if r:
            pivots[r.bit_length() - 1] = r
    # back-substitute so each pivot bit appears in exactly one basis vector
    for p in sorted(pivots):
        b = pivots[p]
        for q in sorted(pivots):
            if q != p and (pivots[q] >> p) & 1:
                pivots[q] ^= b
    return Subgroup(tuple(sorted(pivots.values())))


def minimal_generators(g: Subgroup) -> list[int]:
    """A generating set of the smallest possible size (the echelon basis)."""
    return list(g.basis)


def member(g: Subgroup, m: int) -> bool:
    """True iff ``m`` reduces to zero against the basis of ``g``."""
    pivots = {b.bit_length() - 1: b for b in g.basis}
    return _reduce(int(m), pivots) == 0
