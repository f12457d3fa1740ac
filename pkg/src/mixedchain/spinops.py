"""Spin operator matrices, pair couplings, and Clebsch-Gordan machinery.

Conventions used throughout the package:

* Local basis states are ordered by decreasing magnetic quantum number,
  ``m = s, s-1, ..., -s``.
* All matrices are real.  The Heisenberg exchange needs only ``sz``,
  ``s_plus`` and ``s_minus``; ``sy`` never appears explicitly.
* Clebsch-Gordan coefficients follow the Condon-Shortley phase convention
  (highest-weight coefficient positive), so coupled-basis projectors are
  reproducible bit-for-bit.
* Sparse matrices are canonical CSR: row-major, ascending column indices,
  duplicates summed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sparse

from .errors import ValidationError

__all__ = [
    "SpinValue",
    "SPIN_HALF",
    "SPIN_ONE",
    "LocalOperators",
    "make_local_operators",
    "canonical_csr",
    "exchange_coupling",
    "exchange_eigenvalue",
    "clebsch_gordan",
    "coupling_matrix",
    "total_spin_projector",
]


@dataclass(frozen=True)
class SpinValue:
    """Spin magnitude stored as 2s so half-integer spins stay exact."""

    twice_s: int

    def __post_init__(self) -> None:
        if not isinstance(self.twice_s, int) or self.twice_s < 0:
            raise ValidationError(f"twice_s must be a non-negative integer, got {self.twice_s!r}")

    @property
    def dim(self) -> int:
        return self.twice_s + 1

    @property
    def s(self) -> float:
        return 0.5 * self.twice_s

    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order: s, s-1, ..., -s."""
        return 0.5 * (self.twice_s - 2 * np.arange(self.dim))


SPIN_HALF = SpinValue(1)
SPIN_ONE = SpinValue(2)


@dataclass(frozen=True)
class LocalOperators:
    """Single-site spin matrices in the descending-m basis."""

    s: SpinValue
    sz: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray


@lru_cache(maxsize=None)
def make_local_operators(s: SpinValue) -> LocalOperators:
    """Build sz, s+ and s- for one site of spin ``s``."""
    d = s.dim
    m = s.m_values()
    sz = np.diag(m)
    s_plus = np.zeros((d, d))
    ss1 = s.s * (s.s + 1.0)
    for k in range(1, d):
        # raising |m_k> lands on the previous basis vector (m ordered descending)
        s_plus[k - 1, k] = math.sqrt(ss1 - m[k] * (m[k] + 1.0))
    ops = LocalOperators(s=s, sz=sz, s_plus=s_plus, s_minus=s_plus.T.copy())
    for a in (ops.sz, ops.s_plus, ops.s_minus):
        a.setflags(write=False)
    return ops


def canonical_csr(mat) -> sparse.csr_matrix:
    """Return ``mat`` as canonical CSR: duplicates summed, sorted indices,
    explicit zeros dropped."""
    out = sparse.csr_matrix(mat)
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def exchange_coupling(sa: SpinValue, sb: SpinValue) -> sparse.csr_matrix:
    """Heisenberg bond operator S_a . S_b on the product space of two sites.

    Equals ``sz (x) sz + (s+ (x) s- + s- (x) s+) / 2``; real symmetric with
    eigenvalue (J(J+1) - sa(sa+1) - sb(sb+1)) / 2 on each total-spin-J block.
    """
    a = make_local_operators(sa)
    b = make_local_operators(sb)
    out = sparse.kron(a.sz, b.sz, format="csr")
    out = out + 0.5 * sparse.kron(a.s_plus, b.s_minus, format="csr")
    out = out + 0.5 * sparse.kron(a.s_minus, b.s_plus, format="csr")
    return canonical_csr(out)


def exchange_eigenvalue(sa: SpinValue, sb: SpinValue, total_j: float) -> float:
    """Eigenvalue of S_a . S_b on the total-spin-J subspace."""
    return 0.5 * (total_j * (total_j + 1.0) - sa.s * (sa.s + 1.0) - sb.s * (sb.s + 1.0))


def _twice_int(x) -> int | None:
    t = 2.0 * float(x)
    r = round(t)
    if abs(t - r) > 1e-9:
        return None
    return int(r)


def _fact_half(t: int) -> int:
    """(t/2)! for an even non-negative twice-integer t."""
    return math.factorial(t // 2)


def clebsch_gordan(j1, j2, m1, m2, j, m) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | j m>, Condon-Shortley phase.

    Invalid quantum numbers (non-half-integer values, |m| > j, broken
    triangle rule, or m != m1 + m2) give 0.0 rather than raising.
    Evaluated with exact rational arithmetic before the final square root.
    """
    vals = [_twice_int(v) for v in (j1, j2, m1, m2, j, m)]
    if any(v is None for v in vals):
        return 0.0
    tj1, tj2, tm1, tm2, tj, tm = vals
    if tj1 < 0 or tj2 < 0 or tj < 0:
        return 0.0
    if (tj1 + tm1) % 2 or (tj2 + tm2) % 2 or (tj + tm) % 2:
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm) > tj:
        return 0.0
    if tm != tm1 + tm2:
        return 0.0
    if tj < abs(tj1 - tj2) or tj > tj1 + tj2 or (tj1 + tj2 + tj) % 2:
        return 0.0

    pref = Fraction(
        (tj + 1)
        * _fact_half(tj1 + tj2 - tj)
        * _fact_half(tj1 - tj2 + tj)
        * _fact_half(-tj1 + tj2 + tj),
        _fact_half(tj1 + tj2 + tj + 2),
    )
    pref *= Fraction(
        _fact_half(tj + tm)
        * _fact_half(tj - tm)
        * _fact_half(tj1 - tm1)
        * _fact_half(tj1 + tm1)
        * _fact_half(tj2 - tm2)
        * _fact_half(tj2 + tm2)
    )

    k_min = max(0, (tj2 - tj - tm1) // 2, (tj1 - tj + tm2) // 2)
    k_max = min((tj1 + tj2 - tj) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    total = Fraction(0)
    for k in range(k_min, k_max + 1):
        denom = (
            math.factorial(k)
            * _fact_half(tj1 + tj2 - tj - 2 * k)
            * _fact_half(tj1 - tm1 - 2 * k)
            * _fact_half(tj2 + tm2 - 2 * k)
            * _fact_half(tj - tj2 + tm1 + 2 * k)
            * _fact_half(tj - tj1 - tm2 + 2 * k)
        )
        total += Fraction(-1 if k % 2 else 1, denom)
    if total == 0:
        return 0.0
    sign = 1.0 if total > 0 else -1.0
    return sign * math.sqrt(float(pref * total * total))


@lru_cache(maxsize=None)
def coupling_matrix(sa: SpinValue, sb: SpinValue) -> np.ndarray:
    """Orthogonal change of basis from the product basis to |J, M>.

    Rows are product states (m_a, m_b) with the site index ordering
    ``row = idx(m_a) * dim_b + idx(m_b)``; columns are coupled states with
    J ascending from |sa-sb| to sa+sb and M descending within each J.
    """
    da, db = sa.dim, sb.dim
    ma = sa.m_values()
    mb = sb.m_values()
    cols = []
    tj_min = abs(sa.twice_s - sb.twice_s)
    tj_max = sa.twice_s + sb.twice_s
    for tj in range(tj_min, tj_max + 1, 2):
        jtot = 0.5 * tj
        for tme in range(tj, -tj - 1, -2):
            mtot = 0.5 * tme
            col = np.zeros(da * db)
            for ia in range(da):
                for ib in range(db):
                    col[ia * db + ib] = clebsch_gordan(sa.s, sb.s, ma[ia], mb[ib], jtot, mtot)
            cols.append(col)
    out = np.column_stack(cols)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def total_spin_projector(sa: SpinValue, sb: SpinValue, total_j: float) -> np.ndarray:
    """Projector onto the total-spin-J subspace of two coupled sites."""
    tj = _twice_int(total_j)
    if tj is None or tj < abs(sa.twice_s - sb.twice_s) or tj > sa.twice_s + sb.twice_s:
        raise ValidationError(f"total spin {total_j} outside the coupling range of {sa} and {sb}")
    u = coupling_matrix(sa, sb)
    offset = 0
    for t in range(abs(sa.twice_s - sb.twice_s), tj, 2):
        offset += t + 1
    block = u[:, offset : offset + tj + 1]
    out = block @ block.T
    out.setflags(write=False)
    return out
