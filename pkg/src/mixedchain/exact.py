"""Exact spectra, thermal expectation values, and reduced pair density matrices.

Dense full-spectrum diagonalization is sector-blocked (the Hamiltonian
conserves total Sz) and limited to DENSE_CAP states; larger chains go
through ARPACK Lanczos on individual sectors, with thermal sums allowed
only when the spectral truncation error is provably below tolerance.
Boltzmann weights are always evaluated with energies shifted by the ground
energy so that very large beta cannot overflow; beta = inf is handled as an
exact average over the ground multiplet, never as a large float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from .chain import ChainSpec, SectorBasis, build_hamiltonian, enumerate_sector, pair_coupling_operator, sector_values
from .errors import DimensionCapError, NumericalError, ValidationError

__all__ = [
    "DENSE_CAP",
    "LANCZOS_MAX_STATES",
    "DEGENERACY_TOL",
    "ThermalSpec",
    "CorrelatorEstimate",
    "PairDensityMatrix",
    "SectorBlock",
    "SpectralDecomposition",
    "diagonalize",
    "lanczos_lowest",
    "truncated_decomposition",
    "thermal_correlator",
    "reduce_to_pair",
    "direct_excited_pair_dm",
    "excited_pair_dm_by_subtraction",
    "spin_gap",
]

DENSE_CAP = 10_000
LANCZOS_MAX_STATES = 64
DEGENERACY_TOL = 1e-9
RESIDUAL_TOL = 1e-8
TRUNCATION_TOL = 1e-8


@dataclass(frozen=True)
class ThermalSpec:
    """Inverse temperature in units of 1/j1; beta = inf means ground state."""

    beta: float

    def __post_init__(self) -> None:
        if not (self.beta > 0):
            raise ValidationError(f"beta must be positive (or inf), got {self.beta!r}")

    @property
    def is_ground(self) -> bool:
        return math.isinf(self.beta)


@dataclass(frozen=True)
class CorrelatorEstimate:
    """<S_i . S_j> between two 1-based sites, with statistical error."""

    site_i: int
    site_j: int
    value: float
    stderr: float = 0.0
    source: str = "ed"
    truncation_bound: float = 0.0

    def __post_init__(self) -> None:
        if self.stderr < 0:
            raise ValidationError("stderr must be non-negative")
        if self.source not in ("ed", "qmc"):
            raise ValidationError(f"unknown correlator source {self.source!r}")


@dataclass(frozen=True)
class PairDensityMatrix:
    """Two-site reduced density matrix (real symmetric)."""

    dims: tuple[int, int]
    matrix: np.ndarray

    TRACE_TOL = 1e-12
    PSD_TOL = 1e-10
    SYM_TOL = 1e-10

    def __post_init__(self) -> None:
        d = self.dims[0] * self.dims[1]
        if self.matrix.shape != (d, d):
            raise ValidationError(f"matrix shape {self.matrix.shape} does not match dims {self.dims}")

    def validate(self, psd_tol: float | None = None) -> None:
        """Check trace, symmetry, and positivity; raises NumericalError."""
        tol = self.PSD_TOL if psd_tol is None else psd_tol
        tr = float(np.trace(self.matrix))
        if abs(tr - 1.0) > self.TRACE_TOL:
            raise NumericalError(f"pair density matrix trace {tr} deviates from 1")
        asym = float(np.max(np.abs(self.matrix - self.matrix.T)))
        if asym > self.SYM_TOL:
            raise NumericalError(f"pair density matrix asymmetry {asym} beyond tolerance")
        lo = float(np.linalg.eigvalsh(self.matrix)[0])
        if lo < -tol:
            raise NumericalError(f"pair density matrix minimum eigenvalue {lo} below -{tol}")

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class SectorBlock:
    """Eigen-pairs of one total-Sz sector, vectors stored in the sector basis."""

    twice_sz: int
    basis: SectorBasis
    energies: np.ndarray
    vectors: np.ndarray


@dataclass
class SpectralDecomposition:
    """Merged, ascending view over per-sector eigen-pairs."""

    spec: ChainSpec
    mode: str
    blocks: list[SectorBlock]
    energies: np.ndarray = field(init=False)
    sectors: np.ndarray = field(init=False)
    _where: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.mode not in ("full", "truncated"):
            raise ValidationError(f"unknown decomposition mode {self.mode!r}")
        all_e = []
        where = []
        for bi, blk in enumerate(self.blocks):
            for ci in range(blk.energies.size):
                all_e.append(blk.energies[ci])
                where.append((bi, ci))
        order = np.argsort(np.asarray(all_e), kind="stable")
        self.energies = np.asarray(all_e)[order]
        self._where = np.asarray(where, dtype=np.int64)[order]
        self.sectors = np.array(
            [self.blocks[b].twice_sz for b, _ in self._where], dtype=np.int64
        )

    @property
    def n_states(self) -> int:
        return int(self.energies.size)

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    def block_of(self, k: int) -> tuple[SectorBlock, int]:
        b, c = self._where[k]
        return self.blocks[b], int(c)

    def vector_full(self, k: int) -> np.ndarray:
        """Eigenvector k scattered into the full product space."""
        blk, c = self.block_of(k)
        out = np.zeros(self.spec.full_dimension)
        out[blk.basis.ranks] = blk.vectors[:, c]
        return out

    def ground_multiplet(self, tol: float = DEGENERACY_TOL) -> np.ndarray:
        e0 = self.ground_energy
        scale = max(1.0, abs(e0))
        return np.nonzero(self.energies <= e0 + tol * scale)[0]

    def levels(self, tol: float = DEGENERACY_TOL) -> list[tuple[float, np.ndarray]]:
        """Group eigen-indices into (almost) degenerate energy levels."""
        out: list[tuple[float, list[int]]] = []
        scale = max(1.0, float(np.max(np.abs(self.energies))) if self.n_states else 1.0)
        for k, e in enumerate(self.energies):
            if out and abs(e - out[-1][0]) <= tol * scale:
                out[-1][1].append(k)
            else:
                out.append((float(e), [k]))
        return [(e, np.asarray(idx, dtype=np.int64)) for e, idx in out]


def _check_residuals(h, energies, vectors, tol: float = RESIDUAL_TOL) -> None:
    for c in range(energies.size):
        v = vectors[:, c]
        r = float(np.linalg.norm(h @ v - energies[c] * v))
        if r > tol:
            raise NumericalError(f"eigenpair residual {r:.3e} exceeds {tol:.1e}")


@lru_cache(maxsize=8)
def diagonalize(spec: ChainSpec, dense_cap: int = DENSE_CAP) -> SpectralDecomposition:
    """Full spectrum by dense diagonalization of every total-Sz sector."""
    dim = spec.full_dimension
    if dim > dense_cap:
        raise DimensionCapError(
            f"dimension {dim} is too large for dense path (cap {dense_cap}); "
            "use lanczos_lowest / truncated_decomposition or the Monte Carlo engine"
        )
    blocks = []
    for tsz in sector_values(spec):
        basis = enumerate_sector(spec, tsz)
        if basis.dim == 0:
            continue
        h = build_hamiltonian(spec, sector=basis).toarray()
        energies, vectors = np.linalg.eigh(h)
        blocks.append(SectorBlock(twice_sz=tsz, basis=basis, energies=energies, vectors=vectors))
    return SpectralDecomposition(spec=spec, mode="full", blocks=blocks)


def lanczos_lowest(
    spec: ChainSpec,
    k: int,
    twice_sz: int,
    max_states: int = LANCZOS_MAX_STATES,
) -> SpectralDecomposition:
    """Lowest k eigen-pairs of one sector via ARPACK Lanczos.

    Small sectors fall back to a dense solve so degenerate multiplets are
    always resolved to their full dimension.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > max_states:
        raise ValidationError(f"k={k} exceeds the configured maximum {max_states}")
    basis = enumerate_sector(spec, twice_sz)
    if basis.dim == 0:
        raise ValidationError(f"sector twice_sz={twice_sz} is empty")
    k = min(k, basis.dim)
    h = build_hamiltonian(spec, sector=basis)
    if basis.dim <= max(200, 3 * k + 2):
        energies, vectors = np.linalg.eigh(h.toarray())
        energies = energies[:k]
        vectors = vectors[:, :k]
    else:
        rng = np.random.default_rng(1234567)
        v0 = rng.standard_normal(basis.dim)
        try:
            energies, vectors = spla.eigsh(h, k=k, which="SA", v0=v0)
        except spla.ArpackNoConvergence as exc:
            got = 0 if exc.eigenvalues is None else len(exc.eigenvalues)
            raise NumericalError(
                f"Lanczos did not converge for twice_sz={twice_sz}, k={k}; "
                f"best run produced {got} converged pairs"
            ) from exc
        order = np.argsort(energies)
        energies = energies[order]
        vectors = vectors[:, order]
        _check_residuals(h, energies, vectors)
    block = SectorBlock(twice_sz=twice_sz, basis=basis, energies=energies, vectors=vectors)
    return SpectralDecomposition(spec=spec, mode="truncated", blocks=[block])


def truncated_decomposition(
    spec: ChainSpec,
    k_per_sector: int,
    sectors: tuple[int, ...] | None = None,
) -> SpectralDecomposition:
    """Lowest states gathered from several sectors (default: every sector)."""
    chosen = sector_values(spec) if sectors is None else tuple(sectors)
    blocks = []
    for tsz in chosen:
        basis = enumerate_sector(spec, tsz)
        if basis.dim == 0:
            continue
        part = lanczos_lowest(spec, min(k_per_sector, basis.dim), tsz)
        blocks.extend(part.blocks)
    return SpectralDecomposition(spec=spec, mode="truncated", blocks=blocks)


def _thermal_weights(
    decomp: SpectralDecomposition,
    thermal: ThermalSpec,
    trunc_tol: float = TRUNCATION_TOL,
) -> tuple[np.ndarray, float]:
    """Shifted Boltzmann weights per retained state and the relative
    truncation bound; refuses truncated sums whose bound is not small."""
    if thermal.is_ground:
        weights = np.zeros(decomp.n_states)
        idx = decomp.ground_multiplet()
        weights[idx] = 1.0
        return weights, 0.0
    e0 = decomp.ground_energy
    weights = np.exp(-thermal.beta * (decomp.energies - e0))
    bound = 0.0
    if decomp.mode == "truncated":
        full_dim = decomp.spec.full_dimension
        missing = full_dim - decomp.n_states
        if missing > 0:
            e_cut = min(float(blk.energies[-1]) for blk in decomp.blocks)
            z_low = float(weights.sum())
            bound = missing * math.exp(-thermal.beta * (e_cut - e0)) / z_low
            if bound > trunc_tol:
                raise NumericalError(
                    f"truncated thermal sum has unbounded error: bound {bound:.3e} "
                    f"exceeds {trunc_tol:.1e} at beta={thermal.beta} "
                    f"(cutoff energy {e_cut:.6f}, {missing} states beyond cutoff); "
                    "retain more states or lower the temperature"
                )
    return weights, bound


def _sector_expectations(
    decomp: SpectralDecomposition, pair: tuple[int, int]
) -> np.ndarray:
    """<k| S_i . S_j |k> for every retained eigenstate, in merged order."""
    per_block = []
    for blk in decomp.blocks:
        op = pair_coupling_operator(decomp.spec, pair, sector=blk.basis)
        per_block.append(np.einsum("ij,ij->j", blk.vectors, op @ blk.vectors))
    out = np.empty(decomp.n_states)
    for k in range(decomp.n_states):
        b, c = decomp._where[k]
        out[k] = per_block[b][c]
    return out


def thermal_correlator(
    spec: ChainSpec,
    thermal: ThermalSpec,
    pair: tuple[int, int],
    decomposition: SpectralDecomposition | None = None,
    trunc_tol: float = TRUNCATION_TOL,
) -> CorrelatorEstimate:
    """Exact <S_i . S_j> in the Gibbs state (or ground multiplet at beta=inf)."""
    decomp = diagonalize(spec) if decomposition is None else decomposition
    weights, bound = _thermal_weights(decomp, thermal, trunc_tol)
    vals = _sector_expectations(decomp, pair)
    value = float(np.dot(weights, vals) / weights.sum())
    return CorrelatorEstimate(
        site_i=pair[0],
        site_j=pair[1],
        value=value,
        stderr=0.0,
        source="ed",
        truncation_bound=bound,
    )


def thermal_energy(
    spec: ChainSpec,
    thermal: ThermalSpec,
    decomposition: SpectralDecomposition | None = None,
) -> float:
    """Tr(rho H) from the spectrum."""
    decomp = diagonalize(spec) if decomposition is None else decomposition
    weights, _ = _thermal_weights(decomp, thermal)
    return float(np.dot(weights, decomp.energies) / weights.sum())


def _reduce_vector(spec: ChainSpec, psi: np.ndarray, pair: tuple[int, int]) -> np.ndarray:
    dims = [int(d) for d in spec.local_dims()]
    i0, j0 = pair[0] - 1, pair[1] - 1
    tensor = psi.reshape(dims)
    tensor = np.moveaxis(tensor, (i0, j0), (0, 1))
    d_pair = dims[i0] * dims[j0]
    flat = np.ascontiguousarray(tensor).reshape(d_pair, -1)
    return flat @ flat.T


def _validated_pair_dm(spec: ChainSpec, pair: tuple[int, int], matrix: np.ndarray) -> PairDensityMatrix:
    di = spec.site_spin(pair[0]).dim
    dj = spec.site_spin(pair[1]).dim
    out = PairDensityMatrix(dims=(di, dj), matrix=matrix)
    out.validate()
    return out


def reduce_to_pair(
    spec: ChainSpec,
    source,
    pair: tuple[int, int],
    decomposition: SpectralDecomposition | None = None,
) -> PairDensityMatrix:
    """Partial trace onto two sites of a pure state or a thermal ensemble.

    ``source`` is either a full-space state vector or a ThermalSpec.
    """
    if pair[0] == pair[1]:
        raise ValidationError("pair sites must be distinct")
    for site in pair:
        if not 1 <= site <= spec.n_sites:
            raise ValidationError(f"site {site} outside 1..{spec.n_sites}")
    if isinstance(source, ThermalSpec):
        decomp = diagonalize(spec) if decomposition is None else decomposition
        weights, _ = _thermal_weights(decomp, source)
        total = weights.sum()
        acc = None
        for k in np.nonzero(weights > 0)[0]:
            contrib = (weights[k] / total) * _reduce_vector(spec, decomp.vector_full(int(k)), pair)
            acc = contrib if acc is None else acc + contrib
        return _validated_pair_dm(spec, pair, acc)
    psi = np.asarray(source, dtype=float)
    if psi.shape != (spec.full_dimension,):
        raise ValidationError(
            f"state vector has shape {psi.shape}, expected ({spec.full_dimension},)"
        )
    rho = _reduce_vector(spec, psi, pair)
    rho = rho / np.trace(rho)
    return _validated_pair_dm(spec, pair, rho)


def direct_excited_pair_dm(
    spec: ChainSpec,
    pair: tuple[int, int],
    decomposition: SpectralDecomposition | None = None,
) -> PairDensityMatrix:
    """Equal-weight mixture of pair reductions over the first excited multiplet."""
    decomp = diagonalize(spec) if decomposition is None else decomposition
    levels = decomp.levels()
    if len(levels) < 2:
        raise NumericalError("spectrum has no resolved excited level")
    _, idx = levels[1]
    acc = None
    for k in idx:
        contrib = _reduce_vector(spec, decomp.vector_full(int(k)), pair) / idx.size
        acc = contrib if acc is None else acc + contrib
    return _validated_pair_dm(spec, pair, acc)


def excited_pair_dm_by_subtraction(
    spec: ChainSpec,
    pair: tuple[int, int],
    beta_probe: float,
    decomposition: SpectralDecomposition | None = None,
    third_level_tol: float = 1e-6,
    min_weight: float = 1e-12,
    psd_tol: float = 1e-8,
) -> PairDensityMatrix:
    """First-excited-multiplet pair state via low-temperature subtraction.

    At low enough temperature the Gibbs state is dominated by the ground
    and first excited multiplets; removing the ground contribution with its
    Boltzmann weight and renormalizing leaves the excited-multiplet mixture.
    """
    if not (beta_probe > 0) or math.isinf(beta_probe):
        raise ValidationError(f"beta_probe must be positive and finite, got {beta_probe!r}")
    decomp = diagonalize(spec) if decomposition is None else decomposition
    levels = decomp.levels()
    if len(levels) < 3:
        raise NumericalError("need at least three resolved levels to bound the subtraction")
    e0, ground_idx = levels[0]
    e1, excited_idx = levels[1]
    e2, _ = levels[2]

    third_weight = math.exp(-beta_probe * (e2 - e0))
    if third_weight > third_level_tol:
        raise ValidationError(
            f"beta_probe={beta_probe} too small: third-level relative weight "
            f"{third_weight:.3e} exceeds {third_level_tol:.1e}; "
            f"need beta_probe >= {math.log(1.0 / third_level_tol) / (e2 - e0):.3f}"
        )
    w1 = math.exp(-beta_probe * (e1 - e0))
    if w1 < min_weight:
        raise NumericalError(
            f"beta_probe={beta_probe} too large: first-excited weight {w1:.3e} "
            f"is numerically degenerate (below {min_weight:.1e})"
        )

    thermal = ThermalSpec(beta=beta_probe)
    weights, _ = _thermal_weights(decomp, thermal)
    z = float(weights.sum())
    rho_thermal = reduce_to_pair(spec, thermal, pair, decomposition=decomp).matrix

    ground_sum = None
    for k in ground_idx:
        contrib = _reduce_vector(spec, decomp.vector_full(int(k)), pair)
        ground_sum = contrib if ground_sum is None else ground_sum + contrib

    residual = rho_thermal * z - ground_sum
    tr = float(np.trace(residual))
    if tr <= 0:
        raise NumericalError("subtraction left no positive weight; beta_probe unusable")
    rho = residual / tr

    di = spec.site_spin(pair[0]).dim
    dj = spec.site_spin(pair[1]).dim
    out = PairDensityMatrix(dims=(di, dj), matrix=rho)
    lo = float(out.eigenvalues()[0])
    if lo < -psd_tol:
        raise NumericalError(
            f"subtracted pair state has negative eigenvalue {lo:.3e} beyond tolerance"
        )
    return out


def spin_gap(spec: ChainSpec, k: int = 8) -> float:
    """Energy gap between the ground state and the lowest excitation.

    The ground state is a total-spin singlet and every multiplet contains a
    Sz = 0 member, so the sector twice_sz = 0 alone determines the gap.
    """
    want = min(k, LANCZOS_MAX_STATES)
    while True:
        decomp = lanczos_lowest(spec, want, twice_sz=0)
        levels = decomp.levels()
        if len(levels) >= 2:
            gap = levels[1][0] - levels[0][0]
            return float(max(gap, 0.0))
        if want >= LANCZOS_MAX_STATES or want >= decomp.blocks[0].basis.dim:
            raise NumericalError(
                f"no excited level resolved among the lowest {want} states of the Sz=0 sector"
            )
        want = min(2 * want, LANCZOS_MAX_STATES)
