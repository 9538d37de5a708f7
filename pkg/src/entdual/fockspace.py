"""Two-photon Fock-space algebra over a register of (path, polarization, time) modes.

Mode flattening: ``index = (path * 2 + pol) * T + temporal``, so a register with
``T`` temporal slots has ``M = 4 T`` modes.  The two-photon sector is spanned by
``|1_i 1_j>`` (i < j, lexicographic) followed by ``|2_i>`` (ascending i), giving
``D = M (M + 1) / 2`` basis states.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
UNITARY_TOL = 1e-12
KRAUS_TOL = 1e-10
LABEL_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when an input violates a documented invariant."""


class LabelingError(ValidationError):
    """The requested particle labeling is ambiguous for the given state."""

    def __init__(self, message: str, weight: float):
        super().__init__(f"{message} (offending weight {weight:.3e})")
        self.weight = weight


class Path(enum.IntEnum):
    # P1 is k before the beamsplitter and output arm A after it; P2 is -k / B.
    P1 = 0
    P2 = 1


class Pol(enum.IntEnum):
    H = 0
    V = 1


@dataclass(frozen=True)
class ModeIndex:
    path: Path
    pol: Pol
    temporal: int = 0

    def flat(self, temporal_dim: int) -> int:
        if not 0 <= self.temporal < temporal_dim:
            raise ValidationError(
                f"temporal slot {self.temporal} outside [0, {temporal_dim})"
            )
        return (int(self.path) * 2 + int(self.pol)) * temporal_dim + self.temporal

    @classmethod
    def from_flat(cls, index: int, temporal_dim: int) -> "ModeIndex":
        if not 0 <= index < 4 * temporal_dim:
            raise ValidationError(f"mode {index} outside register of size {4 * temporal_dim}")
        block, temporal = divmod(index, temporal_dim)
        path, pol = divmod(block, 2)
        return cls(Path(path), Pol(pol), temporal)


def num_modes(temporal_dim: int) -> int:
    if temporal_dim < 1:
        raise ValidationError(f"temporal dimension must be >= 1, got {temporal_dim}")
    return 4 * temporal_dim


@dataclass(frozen=True)
class TwoPhotonBasis:
    """Ordered occupation patterns; each pattern is a mode pair ``(i, j)`` with i <= j."""

    n_modes: int
    patterns: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.patterns)

    def index(self, i: int, j: int) -> int:
        i, j = min(i, j), max(i, j)
        return _pattern_lookup(self.n_modes)[(i, j)]


@lru_cache(maxsize=None)
def basis_for_modes(n_modes: int) -> TwoPhotonBasis:
    singles = list(itertools.combinations(range(n_modes), 2))
    doubles = [(i, i) for i in range(n_modes)]
    return TwoPhotonBasis(n_modes, tuple(singles + doubles))


def two_photon_basis(temporal_dim: int) -> TwoPhotonBasis:
    return basis_for_modes(num_modes(temporal_dim))


@lru_cache(maxsize=None)
def _pattern_lookup(n_modes: int) -> dict[tuple[int, int], int]:
    return {p: k for k, p in enumerate(basis_for_modes(n_modes).patterns)}


@lru_cache(maxsize=None)
def _symmetric_embedding(n_modes: int) -> np.ndarray:
    """Isometry S (M^2 x D) from the Fock basis into the symmetric part of C^M (x) C^M."""
    basis = basis_for_modes(n_modes)
    emb = np.zeros((n_modes * n_modes, basis.dim))
    for k, (i, j) in enumerate(basis.patterns):
        if i == j:
            emb[i * n_modes + i, k] = 1.0
        else:
            emb[i * n_modes + j, k] = emb[j * n_modes + i, k] = 1 / np.sqrt(2)
    emb.setflags(write=False)
    return emb


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err >= tol:
        raise ValidationError(f"matrix is not unitary: max |U^dag U - I| = {err:.3e}")
    return u


def lift_unitary(u: np.ndarray) -> np.ndarray:
    """Action of a passive mode unitary on the two-photon sector.

    Computed as ``S^dag (U (x) U) S`` on the symmetric subspace.  With the
    normalisation ``|2_i> = (a_i^dag)^2 |vac> / sqrt(2)`` this gives
    ``<out|Phi(U)|in> = perm(U[out, in]) / sqrt(mu_in mu_out)`` with mu = 2 for a
    doubly occupied pattern and 1 otherwise.
    """
    u = check_unitary(u)
    emb = _symmetric_embedding(u.shape[0])
    return emb.T @ np.kron(u, u) @ emb


def permanent_amplitude(
    u: np.ndarray, in_pattern: Sequence[int], out_pattern: Sequence[int]
) -> complex:
    """Transition amplitude between two occupation patterns via an explicit 2x2 permanent.

    Patterns are the two occupied mode indices (repeat an index for a doubly
    occupied mode).
    """
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    for pattern in (in_pattern, out_pattern):
        if len(pattern) != 2:
            raise ValidationError(f"pattern {tuple(pattern)} does not hold exactly two photons")
        if not all(0 <= m < n for m in pattern):
            raise ValidationError(f"pattern {tuple(pattern)} references modes outside [0, {n})")
    (i, j), (k, l) = in_pattern, out_pattern
    a, b = u[k, i], u[k, j]
    c, d = u[l, i], u[l, j]
    mu = (2 if i == j else 1) * (2 if k == l else 1)
    return complex((a * d + b * c) / np.sqrt(mu))


@dataclass(frozen=True)
class TwoPhotonState:
    rho: np.ndarray = field(repr=False)
    temporal_dim: int = 1

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        dim = two_photon_basis(self.temporal_dim).dim
        if rho.shape != (dim, dim):
            raise ValidationError(f"density matrix shape {rho.shape} != ({dim}, {dim})")
        check_density_matrix(rho)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_ket(cls, psi: np.ndarray, temporal_dim: int) -> "TwoPhotonState":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()), temporal_dim)

    @property
    def basis(self) -> TwoPhotonBasis:
        return two_photon_basis(self.temporal_dim)

    def evolve(self, op: np.ndarray) -> "TwoPhotonState":
        return TwoPhotonState(op @ self.rho @ op.conj().T, self.temporal_dim)

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho))


def check_density_matrix(rho: np.ndarray) -> None:
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm >= HERMITIAN_TOL:
        raise ValidationError(f"density matrix not Hermitian (deviation {herm:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL:
        raise ValidationError(f"density matrix trace {tr!r} != 1")
    lam = np.linalg.eigvalsh(rho).min()
    if lam <= PSD_TOL:
        raise ValidationError(f"density matrix not positive semidefinite (min eigenvalue {lam:.3e})")


def ket_from_creations(
    terms: Sequence[tuple[complex, ModeIndex, ModeIndex]], temporal_dim: int
) -> np.ndarray:
    """Fock vector for ``sum_k c_k a^dag(m1_k) a^dag(m2_k) |vac>``; not renormalised."""
    basis = two_photon_basis(temporal_dim)
    psi = np.zeros(basis.dim, dtype=complex)
    for coef, m1, m2 in terms:
        i, j = m1.flat(temporal_dim), m2.flat(temporal_dim)
        psi[basis.index(i, j)] += coef * (np.sqrt(2) if i == j else 1.0)
    return psi


@dataclass(frozen=True)
class Channel:
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValidationError("channel needs at least one Kraus operator")
        total = sum(k.conj().T @ k for k in ops)
        err = np.max(np.abs(total - np.eye(total.shape[0])))
        if err >= KRAUS_TOL:
            raise ValidationError(f"Kraus operators not complete: max deviation {err:.3e}")
        object.__setattr__(self, "kraus", ops)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]


def apply_channel(state: TwoPhotonState, channel: Channel) -> TwoPhotonState:
    if channel.dim != state.rho.shape[0]:
        raise ValidationError(
            f"channel acts on dimension {channel.dim}, state has {state.rho.shape[0]}"
        )
    rho = sum(k @ state.rho @ k.conj().T for k in channel.kraus)
    # Kraus sums reintroduce rounding-level anti-Hermitian parts.
    rho = (rho + rho.conj().T) / 2
    return TwoPhotonState(rho, state.temporal_dim)


def _labeled_embedding(temporal_dim: int, qubit_of, label_of) -> tuple[np.ndarray, np.ndarray]:
    """Map Fock patterns onto a distinguishable (q1, t1, q2, t2) register.

    ``label_of(mode)`` returns 0/1 for which particle label the photon carries and
    ``qubit_of(mode)`` the remaining two-level variable.  Returns the embedding
    (4 T^2 x D) and a boolean mask of patterns compatible with the labeling.
    """
    basis = two_photon_basis(temporal_dim)
    t = temporal_dim
    emb = np.zeros((4 * t * t, basis.dim))
    ok = np.zeros(basis.dim, dtype=bool)
    for k, (i, j) in enumerate(basis.patterns):
        mi, mj = ModeIndex.from_flat(i, t), ModeIndex.from_flat(j, t)
        li, lj = label_of(mi), label_of(mj)
        if li == lj:
            continue
        first, second = (mi, mj) if li == 0 else (mj, mi)
        row = ((qubit_of(first) * t + first.temporal) * 2 + qubit_of(second)) * t + second.temporal
        emb[row, k] = 1.0
        ok[k] = True
    return emb, ok


def _reduce(state: TwoPhotonState, qubit_of, label_of, postselect: bool, what: str) -> np.ndarray:
    t = state.temporal_dim
    emb, ok = _labeled_embedding(t, qubit_of, label_of)
    bad = float(np.sum(state.populations()[~ok]))
    if not postselect and bad > LABEL_TOL:
        raise LabelingError(f"{what} labeling is ambiguous", bad)
    kept = 1.0 - bad
    if kept <= LABEL_TOL:
        raise LabelingError(f"no weight left after {what} postselection", bad)
    full = (emb @ state.rho @ emb.T).reshape(2, t, 2, t, 2, t, 2, t)
    red = _trace_temporal(full).reshape(4, 4)
    red = red / np.trace(red).real
    return (red + red.conj().T) / 2


def _trace_temporal(full: np.ndarray) -> np.ndarray:
    # axes: (q1, t1, q2, t2 | q1', t1', q2', t2')
    return np.einsum("aibjcidj->abcd", full)


def reduce_polarization(state: TwoPhotonState, postselect: bool = False) -> np.ndarray:
    """Polarization state of (photon on P1) (x) (photon on P2), temporal slots traced.

    With ``postselect`` the state is conditioned on one photon per path instead of
    raising when other patterns carry weight.
    """
    return _reduce(state, lambda m: int(m.pol), lambda m: int(m.path), postselect, "path")


def reduce_momentum(state: TwoPhotonState, postselect: bool = False) -> np.ndarray:
    """Path state of (H photon) (x) (V photon), temporal slots traced; P1 -> |0>, P2 -> |1>."""
    return _reduce(state, lambda m: int(m.path), lambda m: int(m.pol), postselect, "polarization")
