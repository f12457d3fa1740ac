"""Lattice geometry, symmetry sectors, and Hamiltonian assembly for the
half-half-one-one Heisenberg ring.

Sites are numbered 1..N in user-facing interfaces; positions 4n-3 and 4n-2
carry spin 1/2, positions 4n-1 and 4n carry spin 1.  Ring bonds alternate
between the same-species coupling j1 and the mixed-species coupling
j2 = alpha * j1.  Internally everything is 0-based.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sparse

from .errors import DimensionCapError, ValidationError
from .spinops import SpinValue, canonical_csr, make_local_operators

__all__ = [
    "PATTERN_TWICE_S",
    "FULL_BUILD_CAP",
    "SECTOR_ENUM_CAP",
    "Bond",
    "ChainSpec",
    "SectorBasis",
    "enumerate_sector",
    "build_hamiltonian",
    "pair_coupling_operator",
]

PATTERN_TWICE_S = (1, 1, 2, 2)

FULL_BUILD_CAP = 100_000
SECTOR_ENUM_CAP = 5_000_000


@dataclass(frozen=True)
class Bond:
    """Nearest-neighbor ring bond between 1-based sites."""

    site_i: int
    site_j: int
    coupling: float


@dataclass(frozen=True)
class ChainSpec:
    """Definition of one chain: length, coupling ratio, boundary."""

    n_sites: int
    alpha: float
    j1: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self) -> None:
        if not isinstance(self.n_sites, int) or self.n_sites < 4 or self.n_sites % 4:
            raise ValidationError(f"n_sites must be a positive multiple of 4, got {self.n_sites!r}")
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValidationError(f"alpha must be a finite non-negative real, got {self.alpha!r}")
        if not (isinstance(self.j1, (int, float)) and math.isfinite(self.j1) and self.j1 > 0):
            raise ValidationError(f"j1 must be a finite positive real, got {self.j1!r}")
        if self.boundary != "periodic":
            raise ValidationError(f"only periodic boundaries are supported, got {self.boundary!r}")

    @property
    def j2(self) -> float:
        return self.alpha * self.j1

    def twice_spins(self) -> np.ndarray:
        """2s per site, 0-based order."""
        return np.array([PATTERN_TWICE_S[i % 4] for i in range(self.n_sites)], dtype=np.int64)

    def local_dims(self) -> np.ndarray:
        return self.twice_spins() + 1

    @property
    def full_dimension(self) -> int:
        half = self.n_sites // 2
        return 2**half * 3**half

    @property
    def max_twice_sz(self) -> int:
        return int(self.twice_spins().sum())

    def site_spin(self, site: int) -> SpinValue:
        """Spin magnitude of a 1-based site index."""
        if not 1 <= site <= self.n_sites:
            raise ValidationError(f"site {site} outside 1..{self.n_sites}")
        return SpinValue(PATTERN_TWICE_S[(site - 1) % 4])

    def bonds(self) -> list[Bond]:
        """The N ring bonds, 1-based, in site order."""
        out = []
        for i in range(self.n_sites):
            j = (i + 1) % self.n_sites
            coupling = self.j1 if i % 2 == 0 else self.j2
            out.append(Bond(site_i=i + 1, site_j=j + 1, coupling=coupling))
        return out

    def to_key_values(self) -> str:
        return (
            f"n_sites={self.n_sites}\n"
            f"alpha={self.alpha!r}\n"
            f"j1={self.j1!r}\n"
            f"boundary={self.boundary}\n"
        )

    @classmethod
    def from_key_values(cls, text: str) -> "ChainSpec":
        fields: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            fields[key] = value
        known = {"n_sites", "alpha", "j1", "boundary"}
        unknown = set(fields) - known
        if unknown:
            raise ValidationError(f"unknown chain keys: {sorted(unknown)}")
        if "n_sites" not in fields or "alpha" not in fields:
            raise ValidationError("chain definition needs at least n_sites and alpha")
        return cls(
            n_sites=int(fields["n_sites"]),
            alpha=float(fields["alpha"]),
            j1=float(fields.get("j1", "1.0")),
            boundary=fields.get("boundary", "periodic"),
        )

    @property
    def spec_hash(self) -> str:
        return hashlib.sha256(self.to_key_values().encode()).hexdigest()[:12]


@dataclass(frozen=True)
class SectorBasis:
    """All product-basis configurations with one value of total 2*Sz.

    ``states[r]`` holds local indices k (0..2s, m = s - k) per site;
    ``ranks[r]`` is the mixed-radix position of that configuration in the
    full product space, ascending (states are lexicographic).
    """

    twice_sz: int
    local_dims: tuple[int, ...]
    states: np.ndarray
    ranks: np.ndarray

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def n_sites(self) -> int:
        return len(self.local_dims)


def enumerate_sector(spec: ChainSpec, twice_sz: int, cap: int = SECTOR_ENUM_CAP) -> SectorBasis:
    """Enumerate the complete total-Sz sector, lexicographically ordered."""
    if abs(twice_sz) > spec.max_twice_sz:
        raise ValidationError(
            f"twice_sz {twice_sz} outside +-{spec.max_twice_sz} for n_sites={spec.n_sites}"
        )
    if (twice_sz - spec.max_twice_sz) % 2:
        raise ValidationError(f"twice_sz {twice_sz} has the wrong parity for this chain")
    total = spec.full_dimension
    if total > cap:
        raise DimensionCapError(
            f"full dimension {total} exceeds the sector enumeration cap {cap}"
        )
    dims = spec.local_dims()
    twos = spec.twice_spins()
    n = spec.n_sites

    weights = np.ones(n, dtype=np.int64)
    for i in range(n - 2, -1, -1):
        weights[i] = weights[i + 1] * dims[i + 1]

    tsz = np.full(total, int(twos.sum()), dtype=np.int64)
    for i in range(n):
        digits = (np.arange(total, dtype=np.int64) // weights[i]) % dims[i]
        tsz -= 2 * digits
    ranks = np.nonzero(tsz == twice_sz)[0].astype(np.int64)

    states = np.empty((ranks.size, n), dtype=np.int8)
    for i in range(n):
        states[:, i] = ((ranks // weights[i]) % dims[i]).astype(np.int8)
    states.setflags(write=False)
    ranks.setflags(write=False)
    return SectorBasis(
        twice_sz=twice_sz,
        local_dims=tuple(int(d) for d in dims),
        states=states,
        ranks=ranks,
    )


def _term_list(spec: ChainSpec) -> list[tuple[int, int, float]]:
    """Bond terms as 0-based (i, j, coupling)."""
    return [(b.site_i - 1, b.site_j - 1, b.coupling) for b in spec.bonds()]


def _chain_kron(spec: ChainSpec, site_ops: dict[int, np.ndarray]) -> sparse.csr_matrix:
    dims = spec.local_dims()
    acc = sparse.identity(1, format="csr")
    for i in range(spec.n_sites):
        factor = site_ops.get(i)
        if factor is None:
            factor = sparse.identity(int(dims[i]), format="csr")
        acc = sparse.kron(acc, factor, format="csr")
    return acc


def _assemble_full(spec: ChainSpec, terms, cap: int) -> sparse.csr_matrix:
    dim = spec.full_dimension
    if dim > cap:
        raise DimensionCapError(
            f"dimension {dim} is too large for dense path assembly (cap {cap}); "
            "use a sector basis or the Monte Carlo engine"
        )
    twos = spec.twice_spins()
    acc = sparse.csr_matrix((dim, dim))
    for i, j, coupling in terms:
        a = make_local_operators(SpinValue(int(twos[i])))
        b = make_local_operators(SpinValue(int(twos[j])))
        szsz = _chain_kron(spec, {i: a.sz, j: b.sz})
        spsm = _chain_kron(spec, {i: a.s_plus, j: b.s_minus})
        smsp = _chain_kron(spec, {i: a.s_minus, j: b.s_plus})
        acc = acc + coupling * szsz + (coupling * 0.5) * spsm + (coupling * 0.5) * smsp
    return canonical_csr(acc)


def _assemble_sector(spec: ChainSpec, terms, basis: SectorBasis) -> sparse.csr_matrix:
    dims = spec.local_dims()
    twos = spec.twice_spins()
    n = spec.n_sites
    weights = np.ones(n, dtype=np.int64)
    for i in range(n - 2, -1, -1):
        weights[i] = weights[i + 1] * dims[i + 1]

    states = basis.states.astype(np.int64)
    ranks = basis.ranks
    dim = basis.dim
    m = 0.5 * (twos[None, :] - 2.0 * states)

    diag = np.zeros(dim)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for i, j, coupling in terms:
        diag += coupling * (m[:, i] * m[:, j])
        si = 0.5 * twos[i]
        sj = 0.5 * twos[j]
        # raise m_i, lower m_j (k_i - 1, k_j + 1), plus the mirror image
        for direction in (+1, -1):
            if direction > 0:
                mask = (states[:, i] >= 1) & (states[:, j] <= dims[j] - 2)
                mi = m[mask, i]
                mj = m[mask, j]
                amp_i = np.sqrt(si * (si + 1.0) - mi * (mi + 1.0))
                amp_j = np.sqrt(sj * (sj + 1.0) - mj * (mj - 1.0))
                shift = -weights[i] + weights[j]
            else:
                mask = (states[:, i] <= dims[i] - 2) & (states[:, j] >= 1)
                mi = m[mask, i]
                mj = m[mask, j]
                amp_i = np.sqrt(si * (si + 1.0) - mi * (mi - 1.0))
                amp_j = np.sqrt(sj * (sj + 1.0) - mj * (mj + 1.0))
                shift = weights[i] - weights[j]
            src = np.nonzero(mask)[0]
            if src.size == 0:
                continue
            dst_rank = ranks[src] + shift
            dst = np.searchsorted(ranks, dst_rank)
            rows.append(src)
            cols.append(dst)
            vals.append((coupling * 0.5) * (amp_i * amp_j))

    if rows:
        off = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
        )
    else:
        off = sparse.coo_matrix((dim, dim))
    out = canonical_csr(off) + sparse.diags(diag, format="csr")
    return canonical_csr(out)


def build_hamiltonian(
    spec: ChainSpec,
    sector: SectorBasis | None = None,
    cap: int = FULL_BUILD_CAP,
) -> sparse.csr_matrix:
    """Assemble the chain Hamiltonian, full-space or restricted to a sector."""
    terms = _term_list(spec)
    if sector is None:
        return _assemble_full(spec, terms, cap)
    if sector.n_sites != spec.n_sites or tuple(sector.local_dims) != tuple(
        int(d) for d in spec.local_dims()
    ):
        raise ValidationError("sector basis does not match the chain definition")
    return _assemble_sector(spec, terms, sector)


def pair_coupling_operator(
    spec: ChainSpec,
    pair: tuple[int, int],
    sector: SectorBasis | None = None,
    cap: int = FULL_BUILD_CAP,
) -> sparse.csr_matrix:
    """S_i . S_j between two 1-based sites, embedded like the Hamiltonian."""
    i, j = pair
    for site in (i, j):
        if not 1 <= site <= spec.n_sites:
            raise ValidationError(f"site {site} outside 1..{spec.n_sites}")
    if i == j:
        raise ValidationError("pair sites must be distinct")
    terms = [(i - 1, j - 1, 1.0)]
    if sector is None:
        return _assemble_full(spec, terms, cap)
    return _assemble_sector(spec, terms, sector)


@lru_cache(maxsize=32)
def sector_values(spec: ChainSpec) -> tuple[int, ...]:
    """All total-2Sz values this chain supports, descending."""
    top = spec.max_twice_sz
    return tuple(range(top, -top - 1, -2))
