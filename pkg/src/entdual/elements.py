"""Optical elements as mode unitaries or two-photon channels.

Conventions (global phases are unobservable in coincidences, but tests pin them):

* beamsplitter: ``a1 -> sqrt(1-R) a1 + i sqrt(R) a2``, ``a2 -> i sqrt(R) a1 + sqrt(1-R) a2``
* half-wave plate at theta: ``[[cos 2t, sin 2t], [sin 2t, -cos 2t]]`` on (H, V)
* quarter-wave plate at theta: ``Rot(theta) diag(1, i) Rot(-theta)``

Delays never discretise time. A delay event with overlap g sends each temporal
slot s already in use to ``g |s> + sqrt(1 - g^2) |s'>`` with s' a fresh slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .fockspace import (
    Channel,
    ModeIndex,
    Path,
    Pol,
    TwoPhotonState,
    ValidationError,
    apply_channel,
    ket_from_creations,
    lift_unitary,
    num_modes,
)

DEFAULT_COHERENCE_LENGTH_UM = 70.0


@dataclass(frozen=True)
class WavepacketSpec:
    """Gaussian temporal overlap; ``sigma_um`` defaults to coherence_length / sqrt(2)."""

    coherence_length: float = DEFAULT_COHERENCE_LENGTH_UM
    sigma_um: Optional[float] = None

    def __post_init__(self):
        if not self.coherence_length > 0:
            raise ValidationError(f"coherence_length must be > 0, got {self.coherence_length}")
        if self.sigma_um is not None and not self.sigma_um > 0:
            raise ValidationError(f"sigma_um must be > 0, got {self.sigma_um}")

    @property
    def sigma(self) -> float:
        if self.sigma_um is not None:
            return self.sigma_um
        return self.coherence_length / np.sqrt(2)


def overlap(dx: float, wavepacket: WavepacketSpec = WavepacketSpec()) -> float:
    """Amplitude overlap g(dx) = exp(-dx^2 / (2 sigma^2)) of a wavepacket with its delayed copy."""
    return float(np.exp(-(dx**2) / (2 * wavepacket.sigma**2)))


def fit_sigma(dx: float, g_squared: float) -> float:
    """Width that puts the squared overlap at ``g_squared`` for delay ``dx``."""
    if not 0 < g_squared < 1:
        raise ValidationError(f"squared overlap must lie in (0, 1), got {g_squared}")
    if dx == 0:
        raise ValidationError("cannot fit a width from a zero delay")
    return float(abs(dx) / np.sqrt(-np.log(g_squared)))


def _check_unit_interval(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value}")


def _path_pol_block(temporal_dim: int, path: Path, pol: Pol) -> np.ndarray:
    return np.array([ModeIndex(path, pol, t).flat(temporal_dim) for t in range(temporal_dim)])


def beamsplitter_unitary(reflectivity: float, temporal_dim: int = 1) -> np.ndarray:
    _check_unit_interval("reflectivity", reflectivity)
    t, r = np.sqrt(1 - reflectivity), 1j * np.sqrt(reflectivity)
    u = np.zeros((num_modes(temporal_dim),) * 2, dtype=complex)
    for pol in Pol:
        a = _path_pol_block(temporal_dim, Path.P1, pol)
        b = _path_pol_block(temporal_dim, Path.P2, pol)
        u[a, a] = t
        u[b, a] = r
        u[a, b] = r
        u[b, b] = t
    return u


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def hwp_jones(theta_deg: float) -> np.ndarray:
    two = np.deg2rad(2 * theta_deg)
    return np.array([[np.cos(two), np.sin(two)], [np.sin(two), -np.cos(two)]], dtype=complex)


def qwp_jones(theta_deg: float) -> np.ndarray:
    rot = _rotation(np.deg2rad(theta_deg))
    return rot @ np.diag([1, 1j]) @ rot.T


def polarization_unitary(path: Path, jones: np.ndarray, temporal_dim: int = 1) -> np.ndarray:
    """Embed a 2x2 Jones matrix on one path, identically for every temporal slot."""
    u = np.eye(num_modes(temporal_dim), dtype=complex)
    h = _path_pol_block(temporal_dim, Path(path), Pol.H)
    v = _path_pol_block(temporal_dim, Path(path), Pol.V)
    u[h, h], u[v, h] = jones[0, 0], jones[1, 0]
    u[h, v], u[v, v] = jones[0, 1], jones[1, 1]
    return u


def hwp_unitary(path: Path, theta_deg: float, temporal_dim: int = 1) -> np.ndarray:
    return polarization_unitary(path, hwp_jones(theta_deg), temporal_dim)


def qwp_unitary(path: Path, theta_deg: float, temporal_dim: int = 1) -> np.ndarray:
    return polarization_unitary(path, qwp_jones(theta_deg), temporal_dim)


def temporal_rotation(
    blocks: Iterable[tuple[Path, Pol]], amplitude: float, temporal_dim: int, occupied: int = 1
) -> np.ndarray:
    """Delay the given (path, pol) blocks.

    Every occupied slot ``s < occupied`` goes to ``amplitude |s> + sqrt(1-a^2) |s + occupied>``,
    so any wavepacket built from occupied slots overlaps its delayed copy by ``amplitude``.
    """
    _check_unit_interval("overlap amplitude", amplitude)
    if occupied < 1 or temporal_dim < 2 * occupied:
        raise ValidationError(
            f"delay acting on {occupied} occupied slot(s) needs T >= {2 * occupied}, "
            f"register has T={temporal_dim}; increase the temporal dimension of the setup"
        )
    u = np.eye(num_modes(temporal_dim), dtype=complex)
    s = np.sqrt(1 - amplitude**2)
    for path, pol in blocks:
        for slot in range(occupied):
            old = ModeIndex(path, pol, slot).flat(temporal_dim)
            new = ModeIndex(path, pol, slot + occupied).flat(temporal_dim)
            u[old, old], u[new, old] = amplitude, s
            u[old, new], u[new, new] = -s, amplitude
    return u


def path_delay_unitary(
    path: Path,
    dx: float,
    wavepacket: WavepacketSpec = WavepacketSpec(),
    temporal_dim: int = 2,
    occupied: int = 1,
    residual_overlap: float = 1.0,
) -> np.ndarray:
    """Delay both polarizations of ``path`` by ``dx``.

    ``residual_overlap`` multiplies the delay overlap and models distinguishability
    the delay alone does not produce (e.g. imperfect spatial mode matching).
    """
    amp = residual_overlap * overlap(dx, wavepacket)
    return temporal_rotation([(Path(path), pol) for pol in Pol], amp, temporal_dim, occupied)


def quartz_delay_unitary(
    path: Optional[Path], eta: float, temporal_dim: int = 2, occupied: int = 1
) -> np.ndarray:
    """Polarization-dependent delay of the V modes; ``path=None`` delays V on both paths."""
    paths = list(Path) if path is None else [Path(path)]
    return temporal_rotation([(p, Pol.V) for p in paths], eta, temporal_dim, occupied)


def dephasing_channel(path: Path, p: float, temporal_dim: int = 1) -> Channel:
    """Phase damping of the polarization of any photon on ``path``; H/V coherence scaled by 1 - p."""
    _check_unit_interval("p", p)
    z = polarization_unitary(path, np.diag([1.0, -1.0]).astype(complex), temporal_dim)
    z2 = lift_unitary(z)
    ident = np.eye(z2.shape[0], dtype=complex)
    return Channel((np.sqrt(1 - p / 2) * ident, np.sqrt(p / 2) * z2))


def singlet_ket(temporal_dim: int = 1) -> np.ndarray:
    s = 1 / np.sqrt(2)
    return ket_from_creations(
        [
            (s, ModeIndex(Path.P1, Pol.H), ModeIndex(Path.P2, Pol.V)),
            (-s, ModeIndex(Path.P1, Pol.V), ModeIndex(Path.P2, Pol.H)),
        ],
        temporal_dim,
    )


def source_state(visibility: float = 1.0, temporal_dim: int = 1) -> TwoPhotonState:
    """Singlet mixed with the incoherent HV/VH background; one photon per path, slot 0."""
    _check_unit_interval("visibility", visibility)
    psi = singlet_ket(temporal_dim)
    hv = ket_from_creations([(1, ModeIndex(Path.P1, Pol.H), ModeIndex(Path.P2, Pol.V))], temporal_dim)
    vh = ket_from_creations([(1, ModeIndex(Path.P1, Pol.V), ModeIndex(Path.P2, Pol.H))], temporal_dim)
    rho = visibility * np.outer(psi, psi.conj()) + (1 - visibility) / 2 * (
        np.outer(hv, hv) + np.outer(vh, vh)
    )
    return TwoPhotonState(rho, temporal_dim)


# --- element specs -----------------------------------------------------------


@dataclass(frozen=True)
class Beamsplitter:
    reflectivity: float = 0.5


@dataclass(frozen=True)
class HalfWavePlate:
    path: Path
    angle_deg: float


@dataclass(frozen=True)
class QuarterWavePlate:
    path: Path
    angle_deg: float


@dataclass(frozen=True)
class PathDelay:
    path: Path
    dx_um: float
    wavepacket: WavepacketSpec = WavepacketSpec()
    residual_overlap: float = 1.0


@dataclass(frozen=True)
class QuartzDelay:
    path: Optional[Path]
    eta: float


@dataclass(frozen=True)
class DephasingChannel:
    path: Path
    p: float


@dataclass(frozen=True)
class SourceNoise:
    """Source imperfection channel; takes the singlet to ``source_state(visibility)``."""

    visibility: float


ElementSpec = Union[
    Beamsplitter, HalfWavePlate, QuarterWavePlate, PathDelay, QuartzDelay, DephasingChannel, SourceNoise
]
Stage = Union[np.ndarray, Channel]

_DELAYS = (PathDelay, QuartzDelay)


def validate_element(el: ElementSpec) -> None:
    if isinstance(el, Beamsplitter):
        _check_unit_interval("reflectivity", el.reflectivity)
    elif isinstance(el, (HalfWavePlate, QuarterWavePlate)):
        if not np.isfinite(el.angle_deg):
            raise ValidationError(f"waveplate angle must be finite, got {el.angle_deg}")
    elif isinstance(el, QuartzDelay):
        _check_unit_interval("eta", el.eta)
    elif isinstance(el, DephasingChannel):
        _check_unit_interval("p", el.p)
    elif isinstance(el, SourceNoise):
        _check_unit_interval("visibility", el.visibility)
    elif isinstance(el, PathDelay):
        _check_unit_interval("residual_overlap", el.residual_overlap)
    else:
        raise ValidationError(f"unknown element {el!r}")
    path = getattr(el, "path", None)
    if path is not None and path not in (0, 1):
        raise ValidationError(f"invalid path {path!r}")


def required_temporal_dim(elements: Sequence[ElementSpec]) -> int:
    """Each delay event doubles the number of temporal slots in use."""
    return 2 ** sum(isinstance(el, _DELAYS) for el in elements)


def element_stage(el: ElementSpec, temporal_dim: int, occupied: int = 1) -> Stage:
    validate_element(el)
    if isinstance(el, Beamsplitter):
        return beamsplitter_unitary(el.reflectivity, temporal_dim)
    if isinstance(el, HalfWavePlate):
        return hwp_unitary(el.path, el.angle_deg, temporal_dim)
    if isinstance(el, QuarterWavePlate):
        return qwp_unitary(el.path, el.angle_deg, temporal_dim)
    if isinstance(el, PathDelay):
        return path_delay_unitary(
            el.path, el.dx_um, el.wavepacket, temporal_dim, occupied, el.residual_overlap
        )
    if isinstance(el, QuartzDelay):
        return quartz_delay_unitary(el.path, el.eta, temporal_dim, occupied)
    if isinstance(el, DephasingChannel):
        return dephasing_channel(el.path, el.p, temporal_dim)
    return dephasing_channel(Path.P1, 1 - el.visibility, temporal_dim)


def compose(elements: Sequence[ElementSpec], temporal_dim: Optional[int] = None) -> list[Stage]:
    """Group an ordered element list into stages applied left to right.

    Runs of unitary elements collapse into one mode unitary (later elements
    multiply on the left); channels stay as separators.  Delay events claim fresh
    temporal slots in order of appearance.
    """
    if temporal_dim is None:
        temporal_dim = required_temporal_dim(elements)
    needed = required_temporal_dim(elements)
    if needed > temporal_dim:
        raise ValidationError(f"delay events need T >= {needed}, register has T={temporal_dim}")
    stages: list[Stage] = []
    current = np.eye(num_modes(temporal_dim), dtype=complex)
    occupied = 1
    for el in elements:
        stage = element_stage(el, temporal_dim, occupied)
        if isinstance(el, _DELAYS):
            occupied *= 2
        if isinstance(stage, Channel):
            stages.append(current)
            stages.append(stage)
            current = np.eye(num_modes(temporal_dim), dtype=complex)
        else:
            current = stage @ current
    stages.append(current)
    ident = np.eye(num_modes(temporal_dim))
    kept = [s for s in stages if isinstance(s, Channel) or not np.array_equal(s, ident)]
    return kept or [current]


def apply_pipeline(state: TwoPhotonState, stages: Sequence[Stage]) -> TwoPhotonState:
    for stage in stages:
        if isinstance(stage, Channel):
            state = apply_channel(state, stage)
        else:
            state = state.evolve(lift_unitary(stage))
    return state
