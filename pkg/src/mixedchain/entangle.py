"""SU(2)-invariant pair states, partial transpose, and log-negativity.

A rotation-invariant two-spin state is a mixture of total-spin projectors.
For a (1/2,1/2) pair and a (1/2,1) pair a single weight parameter g fixes
the state, and g is a linear function of the correlator <S_i . S_j>:

    (1/2,1/2):  g = 1/4 - c        (singlet weight)
    (1/2,1):    g = (1 - 2c) / 3   (doublet weight)

A (1,1) pair needs two independent weights, so its state is not recoverable
from the correlator alone; (1,1) log-negativity is only available through a
direct partial trace in the exact engine.

Log-negativity is the base-2 log of the trace norm of the partial
transpose, computed by symmetric eigendecomposition.  Trace norms within
1e-12 of 1 are clamped to exactly zero so separable states report 0.0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .exact import CorrelatorEstimate, PairDensityMatrix
from .spinops import SPIN_HALF, SPIN_ONE, total_spin_projector

__all__ = [
    "PairKind",
    "G_STAR_HALF_HALF",
    "G_STAR_HALF_ONE",
    "SU2PairState",
    "NegativityResult",
    "g_from_correlator",
    "expand",
    "partial_transpose",
    "log_negativity",
    "log_negativity_closed_form_11",
    "negativity_from_g",
    "negativity_with_error",
]


class PairKind(enum.Enum):
    HALF_HALF = "half_half"
    HALF_ONE = "half_one"

    @property
    def dims(self) -> tuple[int, int]:
        return (2, 2) if self is PairKind.HALF_HALF else (2, 3)


# Separability boundaries: the smallest negative partial-transpose
# eigenvalue is (1-2g)/2 for a (1/2,1/2) pair and (2-3g)/6 for a (1/2,1)
# pair, so entanglement switches on at g=1/2 and g=2/3 respectively.
G_STAR_HALF_HALF = 0.5
G_STAR_HALF_ONE = 2.0 / 3.0

_WINDOW_SLACK = 1e-12
_TRACE_NORM_CLAMP = 1e-12


@dataclass(frozen=True)
class SU2PairState:
    """Rotation-invariant pair state parameterized by one weight g.

    g is stored raw: statistical noise may push it outside [0, 1], and the
    physical projection happens only when a density matrix is needed.
    """

    kind: PairKind
    g: float
    g_stderr: float = 0.0

    def __post_init__(self) -> None:
        if self.g_stderr < 0:
            raise ValidationError("g_stderr must be non-negative")

    @property
    def in_window(self) -> bool:
        return -_WINDOW_SLACK <= self.g <= 1.0 + _WINDOW_SLACK


@dataclass(frozen=True)
class NegativityResult:
    """Log-negativity with its partial-transpose spectrum and provenance."""

    value: float
    stderr: float
    pt_spectrum: tuple[float, ...]
    method: str
    flags: tuple[str, ...] = ()


def g_from_correlator(kind: PairKind, corr: CorrelatorEstimate) -> SU2PairState:
    """Map a correlator estimate to the pair-state weight, with linear
    error propagation."""
    if kind is PairKind.HALF_HALF:
        g = 0.25 - corr.value
        slope = 1.0
    else:
        g = (1.0 - 2.0 * corr.value) / 3.0
        slope = 2.0 / 3.0
    return SU2PairState(kind=kind, g=g, g_stderr=slope * corr.stderr)


def _projectors(kind: PairKind) -> tuple[np.ndarray, np.ndarray]:
    if kind is PairKind.HALF_HALF:
        return (
            total_spin_projector(SPIN_HALF, SPIN_HALF, 0.0),
            total_spin_projector(SPIN_HALF, SPIN_HALF, 1.0),
        )
    return (
        total_spin_projector(SPIN_HALF, SPIN_ONE, 0.5),
        total_spin_projector(SPIN_HALF, SPIN_ONE, 1.5),
    )


def expand(state: SU2PairState, project: bool = False) -> PairDensityMatrix:
    """Explicit density matrix of the pair state.

    With ``project=False`` a mildly out-of-window g produces small negative
    eigenvalues rather than being silently clamped.
    """
    g = min(max(state.g, 0.0), 1.0) if project else state.g
    low, high = _projectors(state.kind)
    if state.kind is PairKind.HALF_HALF:
        matrix = g * low + ((1.0 - g) / 3.0) * high
    else:
        matrix = (g / 2.0) * low + ((1.0 - g) / 4.0) * high
    return PairDensityMatrix(dims=state.kind.dims, matrix=matrix)


def _pt_matrix(matrix: np.ndarray, dims: tuple[int, int], subsystem: str) -> np.ndarray:
    da, db = dims
    tensor = matrix.reshape(da, db, da, db)
    if subsystem == "second":
        tensor = tensor.transpose(0, 3, 2, 1)
    elif subsystem == "first":
        tensor = tensor.transpose(2, 1, 0, 3)
    else:
        raise ValidationError(f"subsystem must be 'first' or 'second', got {subsystem!r}")
    return np.ascontiguousarray(tensor).reshape(da * db, da * db)


def partial_transpose(rho: PairDensityMatrix, subsystem: str = "second") -> np.ndarray:
    """Transpose one tensor factor's indices; Hermitian, trace preserving."""
    return _pt_matrix(rho.matrix, rho.dims, subsystem)


def log_negativity(rho: PairDensityMatrix, subsystem: str = "second") -> NegativityResult:
    """Base-2 log of the trace norm of the partial transpose."""
    asym = float(np.max(np.abs(rho.matrix - rho.matrix.T)))
    if asym > 1e-10:
        raise NumericalError(f"density matrix asymmetry {asym:.3e} beyond 1e-10")
    gamma = _pt_matrix(rho.matrix, rho.dims, subsystem)
    lam = np.linalg.eigvalsh(gamma)
    trace_norm = float(np.abs(lam).sum())
    value = math.log2(trace_norm) if trace_norm > 1.0 + _TRACE_NORM_CLAMP else 0.0
    return NegativityResult(
        value=value,
        stderr=0.0,
        pt_spectrum=tuple(float(x) for x in lam),
        method="numeric_pt",
    )


def log_negativity_closed_form_11(g: float) -> NegativityResult:
    """Closed form for a (1/2,1/2) pair: N = log2(max(1, 2g)).

    The partial transpose has eigenvalues (1+2g)/6 (three-fold) and
    (1-2g)/2, so the negative branch opens at g = 1/2.
    """
    value = math.log2(max(1.0, 2.0 * g))
    spectrum = ((1.0 - 2.0 * g) / 2.0,) + (((1.0 + 2.0 * g) / 6.0),) * 3
    return NegativityResult(
        value=value,
        stderr=0.0,
        pt_spectrum=tuple(sorted(spectrum)),
        method="closed_form",
    )


def negativity_from_g(kind: PairKind, g: float) -> float:
    """Log-negativity of the physical (projected) state at weight g."""
    g = min(max(g, 0.0), 1.0)
    if kind is PairKind.HALF_HALF:
        return math.log2(max(1.0, 2.0 * g))
    return log_negativity(expand(SU2PairState(kind=kind, g=g))).value


def boundary_g(kind: PairKind) -> float:
    return G_STAR_HALF_HALF if kind is PairKind.HALF_HALF else G_STAR_HALF_ONE


def _jackknife(values: np.ndarray, fn) -> float:
    """Delete-1 jackknife standard error of fn(mean of values)."""
    values = np.asarray(values, dtype=float)
    nb = values.size
    if nb < 2:
        return 0.0
    total = values.sum()
    reduced = (total - values) / (nb - 1)
    theta = np.array([fn(x) for x in reduced])
    mean = theta.mean()
    return math.sqrt((nb - 1) / nb * float(np.sum((theta - mean) ** 2)))


def _one_sided_slope(kind: PairKind, g: float) -> float:
    gstar = boundary_g(kind)
    if g <= gstar:
        return 0.0
    if kind is PairKind.HALF_HALF:
        return 1.0 / (g * math.log(2.0))
    h = 1e-7
    lo = max(g - h, gstar)
    hi = min(g + h, 1.0)
    if hi <= lo:
        hi = min(gstar + 2 * h, 1.0)
        lo = gstar
    return (negativity_from_g(kind, hi) - negativity_from_g(kind, lo)) / (hi - lo)


def negativity_with_error(state: SU2PairState, g_bins=None) -> NegativityResult:
    """Log-negativity at the state's weight with a propagated error bar.

    The error is a delete-1 jackknife over per-bin weights when bin-level
    data is available, and otherwise a delta-method estimate with one-sided
    derivatives at the separability kink.  Out-of-window weights are
    evaluated after projection to [0, 1] and flagged.
    """
    flags: list[str] = []
    if not state.in_window:
        flags.append("out-of-window")
    gstar = boundary_g(state.kind)

    if state.g_stderr > 0 and state.g + 2.0 * state.g_stderr < gstar:
        flags.append("deep-separable")
        return NegativityResult(
            value=0.0, stderr=0.0, pt_spectrum=(), method="closed_form"
            if state.kind is PairKind.HALF_HALF
            else "numeric_pt",
            flags=tuple(flags),
        )

    value = negativity_from_g(state.kind, state.g)
    if g_bins is not None:
        stderr = _jackknife(np.asarray(g_bins), lambda g: negativity_from_g(state.kind, g))
        method = "numeric_pt"
    else:
        stderr = abs(_one_sided_slope(state.kind, min(max(state.g, 0.0), 1.0))) * state.g_stderr
        method = "closed_form" if state.kind is PairKind.HALF_HALF else "numeric_pt"
    return NegativityResult(
        value=value,
        stderr=stderr,
        pt_spectrum=(),
        method=method,
        flags=tuple(flags),
    )
