"""Entanglement witnesses in both particle labelings, concurrence, and the dualism check."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .fockspace import (
    ModeIndex,
    Path,
    Pol,
    TwoPhotonState,
    ValidationError,
    check_density_matrix,
    ket_from_creations,
    reduce_momentum,
    reduce_polarization,
)

SEPARABLE_BOUND = 0.5

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class WitnessKind(str, enum.Enum):
    POLARIZATION = "polarization"
    MOMENTUM = "momentum"


def _ket(*amps) -> np.ndarray:
    v = np.array(amps, dtype=complex)
    return v / np.linalg.norm(v)


# polarization qubit: |H> = |0>, |V> = |1>; momentum qubit: |k> = |0>, |-k> = |1>
PLUS45, MINUS45 = _ket(1, 1), _ket(1, -1)
RIGHT, LEFT = _ket(1, 1j), _ket(1, -1j)
K_PLUS, K_MINUS = _ket(1, 1j), _ket(1, -1j)


def _pair_projector(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    v = np.kron(a, b)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class WitnessBasis:
    kind: WitnessKind
    labels: tuple[str, ...]
    projectors: tuple[np.ndarray, ...] = field(repr=False)
    signs: tuple[int, ...] = (1, 1, -1, -1)

    @property
    def operator(self) -> np.ndarray:
        return sum(s * p for s, p in zip(self.signs, self.projectors))

    @property
    def pauli_form(self) -> np.ndarray:
        return 0.5 * (np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Y, SIGMA_Y))


POLARIZATION_BASIS = WitnessBasis(
    WitnessKind.POLARIZATION,
    ("+45,+45", "-45,-45", "R,L", "L,R"),
    (
        _pair_projector(PLUS45, PLUS45),
        _pair_projector(MINUS45, MINUS45),
        _pair_projector(RIGHT, LEFT),
        _pair_projector(LEFT, RIGHT),
    ),
)

# Only K+/K- projectors enter, so this operator is sigma_y (x) sigma_y in the path
# basis; it coincides with the Pauli form on the one-photon-per-path subspace.
MOMENTUM_BASIS = WitnessBasis(
    WitnessKind.MOMENTUM,
    ("K+,K+", "K-,K-", "K+,K-", "K-,K+"),
    (
        _pair_projector(K_PLUS, K_PLUS),
        _pair_projector(K_MINUS, K_MINUS),
        _pair_projector(K_PLUS, K_MINUS),
        _pair_projector(K_MINUS, K_PLUS),
    ),
)


@dataclass(frozen=True)
class WitnessResult:
    signed_value: float
    components: tuple[float, ...]
    stderr: Optional[float] = None

    @property
    def value(self) -> float:
        return abs(self.signed_value)

    @property
    def entangled(self) -> bool:
        return self.value > SEPARABLE_BOUND


def _check_two_qubit(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValidationError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    check_density_matrix(rho)
    return rho


def witness_state(rho: np.ndarray, basis: WitnessBasis) -> WitnessResult:
    rho = _check_two_qubit(rho)
    comps = tuple(float(np.real(np.trace(p @ rho))) for p in basis.projectors)
    signed = float(sum(s * c for s, c in zip(basis.signs, comps)))
    if basis.kind is WitnessKind.POLARIZATION:
        pauli = float(np.real(np.trace(basis.pauli_form @ rho)))
        assert abs(pauli - signed) < 1e-12, (pauli, signed)
    return WitnessResult(signed, comps)


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence from the spin-flipped spectrum."""
    rho = _check_two_qubit(rho)
    yy = np.kron(SIGMA_Y, SIGMA_Y)
    flipped = yy @ rho.conj() @ yy
    lam = np.sqrt(np.abs(np.linalg.eigvals(rho @ flipped)))
    lam = np.sort(lam)[::-1]
    return float(min(1.0, max(0.0, lam[0] - lam[1] - lam[2] - lam[3])))


# --- counts-level witnesses --------------------------------------------------

DETECTORS = ("D1", "D2", "D3", "D4")
# output arm A is path P1, arm B is path P2; after each PBS
DETECTOR_MODES = {
    "D1": (Path.P1, Pol.H),
    "D2": (Path.P1, Pol.V),
    "D3": (Path.P2, Pol.V),
    "D4": (Path.P2, Pol.H),
}
MODE_DETECTORS = {v: k for k, v in DETECTOR_MODES.items()}


def pair_key(a: str, b: str) -> tuple[str, str]:
    if a == b or a not in DETECTORS or b not in DETECTORS:
        raise ValidationError(f"invalid detector pair ({a}, {b})")
    return (a, b) if a < b else (b, a)


ALL_PAIRS = tuple(pair_key(a, b) for i, a in enumerate(DETECTORS) for b in DETECTORS[i + 1 :])
CROSS_PAIRS = tuple(
    p for p in ALL_PAIRS if DETECTOR_MODES[p[0]][0] != DETECTOR_MODES[p[1]][0]
)


@dataclass(frozen=True)
class CoincidenceTable:
    """Outcome weights for one setting: detector pairs plus double clicks at one detector.

    ``events`` is None for exact probabilities, else the number of sampled events.
    """

    pairs: Mapping[tuple[str, str], float]
    double_clicks: Mapping[str, float]
    events: Optional[int] = None
    label: str = ""

    @property
    def sampled(self) -> bool:
        return self.events is not None

    def __getitem__(self, pair: tuple[str, str]) -> float:
        return self.pairs[pair_key(*pair)]

    def total(self, ensemble: str = "all") -> float:
        if ensemble == "cross":
            return float(sum(self.pairs[p] for p in CROSS_PAIRS))
        if ensemble == "all":
            return float(sum(self.pairs.values()) + sum(self.double_clicks.values()))
        raise ValidationError(f"unknown ensemble {ensemble!r}")

    def outcomes(self) -> list[str]:
        return [f"{a}{b}" for a, b in ALL_PAIRS] + [f"{d}{d}" for d in DETECTORS]

    def weights(self) -> np.ndarray:
        return np.array([self.pairs[p] for p in ALL_PAIRS] + [self.double_clicks[d] for d in DETECTORS])


@dataclass(frozen=True)
class Wiring:
    """Which detector pairs of which setting enter a witness, with signs.

    ``ensemble`` fixes each setting's normalisation: ``"all"`` divides by every
    event of the setting, ``"cross"`` by the Alice-Bob (cross-arm) coincidences.
    """

    kind: WitnessKind
    terms: tuple[tuple[str, tuple[str, str], int], ...]
    ensemble: str

    @property
    def settings(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(t[0] for t in self.terms))


MOMENTUM_WIRING = Wiring(
    WitnessKind.MOMENTUM,
    (
        ("momentum", ("D1", "D2"), 1),
        ("momentum", ("D3", "D4"), 1),
        ("momentum", ("D1", "D3"), -1),
        ("momentum", ("D2", "D4"), -1),
    ),
    "all",
)

POLARIZATION_WIRING = Wiring(
    WitnessKind.POLARIZATION,
    (
        ("diagonal", ("D1", "D4"), 1),
        ("diagonal", ("D2", "D3"), 1),
        ("circular", ("D1", "D3"), -1),
        ("circular", ("D2", "D4"), -1),
    ),
    "cross",
)


def witness_from_counts(tables: Mapping[str, CoincidenceTable], wiring: Wiring) -> WitnessResult:
    """Witness from per-setting pair frequencies.

    For sampled tables the stderr keeps the multinomial covariance between pairs
    of the same setting; treating them as independent binomials understates the
    spread whenever opposite-sign terms share a denominator.
    """
    comps = []
    signed = 0.0
    sampled = False
    per_setting: dict[str, list[float]] = {}  # [sum s^2 f, sum s f, total]
    for setting, pair, sign in wiring.terms:
        if setting not in tables:
            raise ValidationError(f"wiring needs setting {setting!r}, not in tables")
        table = tables[setting]
        key = pair_key(*pair)
        if key not in table.pairs:
            raise ValidationError(f"setting {setting!r} lacks detector pair {key}")
        total = table.total(wiring.ensemble)
        if total <= 0:
            raise ValidationError(f"setting {setting!r} has no events in the {wiring.ensemble} ensemble")
        f = table.pairs[key] / total
        comps.append(float(f))
        signed += sign * f
        if table.sampled:
            sampled = True
            acc = per_setting.setdefault(setting, [0.0, 0.0, total])
            acc[0] += sign * sign * f
            acc[1] += sign * f
    # multinomial within a setting (pairs share one total), independent across settings
    var = sum((a2 - a1 * a1) / n for a2, a1, n in per_setting.values())
    return WitnessResult(float(signed), tuple(comps), float(np.sqrt(max(var, 0.0))) if sampled else None)


# --- dualism -----------------------------------------------------------------


def labeled_ket(coeffs: Sequence[complex], kind: WitnessKind, temporal_dim: int = 1) -> np.ndarray:
    """Fock vector of a two-photon state written in a particle-labeled form.

    ``coeffs[2 q1 + q2]`` multiplies |q1>_label1 |q2>_label2.  Polarization form:
    labels are the paths k, -k and qubits the polarization.  Momentum form: labels
    are H, V and qubits the path (k -> 0, -k -> 1).
    """
    terms = []
    for q1 in (0, 1):
        for q2 in (0, 1):
            c = coeffs[2 * q1 + q2]
            if c == 0:
                continue
            if kind is WitnessKind.POLARIZATION:
                m1, m2 = ModeIndex(Path.P1, Pol(q1)), ModeIndex(Path.P2, Pol(q2))
            else:
                m1, m2 = ModeIndex(Path(q1), Pol.H), ModeIndex(Path(q2), Pol.V)
            terms.append((c, m1, m2))
    return ket_from_creations(terms, temporal_dim)


@dataclass(frozen=True)
class DualismReport:
    form_fidelity: float
    state_fidelity: float
    concurrence_pol: float
    concurrence_mom: float
    witness_pol: float
    witness_mom: float

    def as_dict(self) -> dict:
        return {
            "fidelity": self.form_fidelity,
            "state_fidelity": self.state_fidelity,
            "concurrence_pol": self.concurrence_pol,
            "concurrence_mom": self.concurrence_mom,
            "witness_pol": self.witness_pol,
            "witness_mom": self.witness_mom,
        }


def dualism_forms(temporal_dim: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Singlet written with path labels and, independently, with polarization labels."""
    s = 1 / np.sqrt(2)
    pol_form = labeled_ket([0, s, -s, 0], WitnessKind.POLARIZATION, temporal_dim)
    # |-k>_H |k>_V - |k>_H |-k>_V
    mom_form = labeled_ket([0, -s, s, 0], WitnessKind.MOMENTUM, temporal_dim)
    return pol_form, mom_form


def dualism_check(state: TwoPhotonState) -> DualismReport:
    pol_form, mom_form = dualism_forms(state.temporal_dim)
    rho_pol = reduce_polarization(state)
    rho_mom = reduce_momentum(state)
    form_fid = float(abs(np.vdot(pol_form, mom_form)) ** 2)
    state_fid = float(np.real(np.vdot(pol_form, state.rho @ pol_form)))
    return DualismReport(
        form_fidelity=form_fid,
        state_fidelity=state_fid,
        concurrence_pol=concurrence(rho_pol),
        concurrence_mom=concurrence(rho_mom),
        witness_pol=witness_state(rho_pol, POLARIZATION_BASIS).value,
        witness_mom=witness_state(rho_mom, MOMENTUM_BASIS).value,
    )
