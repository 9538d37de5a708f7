"""The Bell-measurement interferometer: pipeline assembly, coincidences, and scans.

Arm layout: the source emits into paths k (P1) and -k (P2), which meet at the
beamsplitter; the outputs A (P1) and B (P2) go through optional waveplates into
a PBS each.  Detectors: D1 = (A, H), D2 = (A, V), D3 = (B, V), D4 = (B, H).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, curve_fit

from . import elements as el
from .analysis import (
    ALL_PAIRS,
    DETECTORS,
    MODE_DETECTORS,
    MOMENTUM_BASIS,
    MOMENTUM_WIRING,
    POLARIZATION_BASIS,
    POLARIZATION_WIRING,
    CoincidenceTable,
    WitnessResult,
    pair_key,
    witness_from_counts,
    witness_state,
)
from .fockspace import (
    ModeIndex,
    Path,
    TwoPhotonState,
    ValidationError,
    lift_unitary,
    reduce_momentum,
    reduce_polarization,
)

# slot 1: pre-BS path delay (plus mode mismatch); slots 2, 3: quartz plate
TEMPORAL_DIM = 4

QP_PLACEMENTS = {"A": (Path.P1, True), "B": (Path.P2, True), "k": (Path.P1, False), "-k": (Path.P2, False)}
DEPHASING_MODELS = ("quartz", "channel")
# "output": the source emits the singlet and its polarization noise acts as a
# dephasing on output arm B, which leaves the two-photon interference intact.
# "source": the noisy mixture itself is emitted; its symmetric part bunches at
# the beamsplitter, so the arm-conditioned polarization witness depends on delay.
SOURCE_NOISE_PLACEMENTS = ("output", "source")


@dataclass(frozen=True)
class SetupConfig:
    source_visibility: float = 1.0
    bs_reflectivity: float = 0.5
    wavepacket: el.WavepacketSpec = el.WavepacketSpec()
    overlap_imperfection: float = 1.0
    qp_placement: str = "A"
    dephasing_model: str = "quartz"
    source_noise: str = "output"
    seed: int = 42
    events: int = 0

    def __post_init__(self):
        for name in ("source_visibility", "bs_reflectivity", "overlap_imperfection"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.qp_placement not in QP_PLACEMENTS:
            raise ValidationError(f"qp_placement must be one of {sorted(QP_PLACEMENTS)}, got {self.qp_placement!r}")
        if self.dephasing_model not in DEPHASING_MODELS:
            raise ValidationError(f"dephasing_model must be one of {DEPHASING_MODELS}, got {self.dephasing_model!r}")
        if self.source_noise not in SOURCE_NOISE_PLACEMENTS:
            raise ValidationError(
                f"source_noise must be one of {SOURCE_NOISE_PLACEMENTS}, got {self.source_noise!r}"
            )
        if self.events < 0:
            raise ValidationError(f"events must be >= 0, got {self.events}")


@dataclass(frozen=True)
class MeasurementSetting:
    """Waveplates per output arm (applied in order) plus scenario overrides."""

    label: str = ""
    arm_a: tuple[tuple[str, float], ...] = ()
    arm_b: tuple[tuple[str, float], ...] = ()
    input_hwp: Optional[tuple[Path, float]] = None
    dx_um: float = 0.0
    dephasing_p: float = 0.0

    def __post_init__(self):
        for kind, angle in self.arm_a + self.arm_b:
            if kind not in ("hwp", "qwp") or not np.isfinite(angle):
                raise ValidationError(f"bad waveplate ({kind!r}, {angle!r})")
        if not np.isfinite(self.dx_um):
            raise ValidationError(f"dx_um must be finite, got {self.dx_um}")
        if not 0.0 <= self.dephasing_p <= 1.0:
            raise ValidationError(f"dephasing_p must lie in [0, 1], got {self.dephasing_p}")


def momentum_setting(**overrides) -> MeasurementSetting:
    return MeasurementSetting(label="momentum", **overrides)


def diagonal_setting(**overrides) -> MeasurementSetting:
    return MeasurementSetting("diagonal", (("hwp", 22.5),), (("hwp", 22.5),), **overrides)


def circular_setting(**overrides) -> MeasurementSetting:
    return MeasurementSetting("circular", (("qwp", 45.0),), (("qwp", 45.0),), **overrides)


def hom_setting(dx_um: float = 0.0) -> MeasurementSetting:
    return MeasurementSetting("hom", input_hwp=(Path.P2, 45.0), dx_um=dx_um)


def fringe_setting(theta_a: float, theta_b: float, **overrides) -> MeasurementSetting:
    return MeasurementSetting("fringe", (("hwp", theta_a),), (("hwp", theta_b),), **overrides)


def _dephasing_element(config: SetupConfig, path: Path, p: float):
    if config.dephasing_model == "quartz":
        return el.QuartzDelay(path, 1.0 - p)
    return el.DephasingChannel(path, p)


def _preparation(config: SetupConfig, setting: MeasurementSetting) -> list:
    """Elements from the source up to (not including) the analysis waveplates."""
    qp_path, post_bs = QP_PLACEMENTS[config.qp_placement]
    chain: list = [
        el.PathDelay(Path.P1, setting.dx_um, config.wavepacket, config.overlap_imperfection)
    ]
    if setting.input_hwp is not None:
        chain.append(el.HalfWavePlate(*setting.input_hwp))
    dephase = _dephasing_element(config, qp_path, setting.dephasing_p)
    if not post_bs:
        chain.append(dephase)
    chain.append(el.Beamsplitter(config.bs_reflectivity))
    if config.source_noise == "output" and config.source_visibility < 1.0:
        chain.append(el.DephasingChannel(Path.P2, 1.0 - config.source_visibility))
    if post_bs:
        chain.append(dephase)
    return chain


def _analysis(setting: MeasurementSetting) -> list:
    plates = {"hwp": el.HalfWavePlate, "qwp": el.QuarterWavePlate}
    chain = [plates[k](Path.P1, a) for k, a in setting.arm_a]
    chain += [plates[k](Path.P2, a) for k, a in setting.arm_b]
    return chain


def prepared_state(config: SetupConfig, setting: MeasurementSetting) -> TwoPhotonState:
    """State after the beamsplitter (and any quartz plate / dephasing), before analysis optics."""
    v = config.source_visibility if config.source_noise == "source" else 1.0
    src = el.source_state(v, TEMPORAL_DIM)
    return el.apply_pipeline(src, el.compose(_preparation(config, setting), TEMPORAL_DIM))


def detected_state(config: SetupConfig, setting: MeasurementSetting) -> TwoPhotonState:
    state = prepared_state(config, setting)
    analysis = _analysis(setting)
    if analysis:
        state = el.apply_pipeline(state, el.compose(analysis, TEMPORAL_DIM))
    return state


def detection_table(state: TwoPhotonState, label: str = "") -> CoincidenceTable:
    """Time-integrating detection: sums every temporal slot feeding each detector."""
    pairs = {p: 0.0 for p in ALL_PAIRS}
    doubles = {d: 0.0 for d in DETECTORS}
    pops = state.populations()
    t = state.temporal_dim
    for w, (i, j) in zip(pops, state.basis.patterns):
        mi, mj = ModeIndex.from_flat(i, t), ModeIndex.from_flat(j, t)
        di, dj = MODE_DETECTORS[(mi.path, mi.pol)], MODE_DETECTORS[(mj.path, mj.pol)]
        if di == dj:
            doubles[di] += w
        else:
            pairs[pair_key(di, dj)] += w
    return CoincidenceTable(pairs, doubles, None, label)


def coincidence_probabilities(config: SetupConfig, setting: MeasurementSetting) -> CoincidenceTable:
    return detection_table(detected_state(config, setting), setting.label)


def sample_counts(table: CoincidenceTable, events: int, seed) -> CoincidenceTable:
    """Multinomial draw of ``events`` outcomes; ``seed`` is anything numpy's default_rng accepts."""
    if events <= 0:
        raise ValidationError(f"number of events must be positive, got {events}")
    if table.sampled:
        raise ValidationError("sample_counts needs an exact probability table")
    w = np.clip(table.weights(), 0.0, None)
    counts = np.random.default_rng(seed).multinomial(events, w / w.sum())
    n_pairs = len(ALL_PAIRS)
    pairs = {p: int(c) for p, c in zip(ALL_PAIRS, counts[:n_pairs])}
    doubles = {d: int(c) for d, c in zip(DETECTORS, counts[n_pairs:])}
    return CoincidenceTable(pairs, doubles, events, table.label)


def point_seed(seed: int, *index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, *index])


# --- witnesses for one scenario point ----------------------------------------


@dataclass(frozen=True)
class WitnessPoint:
    momentum: WitnessResult
    polarization: WitnessResult
    momentum_state: WitnessResult
    polarization_state: WitnessResult


def witness_tables(
    config: SetupConfig, dx_um: float = 0.0, p: float = 0.0, point_index: int = 0
) -> dict[str, CoincidenceTable]:
    tables = {}
    for k, make in enumerate((momentum_setting, diagonal_setting, circular_setting)):
        setting = make(dx_um=dx_um, dephasing_p=p)
        table = coincidence_probabilities(config, setting)
        if config.events > 0:
            table = sample_counts(table, config.events, point_seed(config.seed, point_index, k))
        tables[setting.label] = table
    return tables


def state_witnesses(config: SetupConfig, dx_um: float = 0.0, p: float = 0.0) -> tuple[WitnessResult, WitnessResult]:
    """(momentum, polarization) witnesses evaluated on reduced density matrices.

    Polarization: photons labeled by output arm, conditioned on one photon per arm.
    Momentum: the beamsplitter is undone so the path qubit is the k/-k input path,
    then photons are labeled by polarization.
    """
    state = prepared_state(config, momentum_setting(dx_um=dx_um, dephasing_p=p))
    rho_pol = reduce_polarization(state, postselect=True)
    bs = lift_unitary(el.beamsplitter_unitary(config.bs_reflectivity, TEMPORAL_DIM))
    rho_mom = reduce_momentum(state.evolve(bs.conj().T))
    return witness_state(rho_mom, MOMENTUM_BASIS), witness_state(rho_pol, POLARIZATION_BASIS)


def witness_point(config: SetupConfig, dx_um: float = 0.0, p: float = 0.0, point_index: int = 0) -> WitnessPoint:
    tables = witness_tables(config, dx_um, p, point_index)
    w_m_state, w_p_state = state_witnesses(config, dx_um, p)
    return WitnessPoint(
        witness_from_counts(tables, MOMENTUM_WIRING),
        witness_from_counts(tables, POLARIZATION_WIRING),
        w_m_state,
        w_p_state,
    )


# --- scans ---------------------------------------------------------------------


def _dip(x, base, vis, width):
    return base * (1 - vis * np.exp(-((x / width) ** 2)))


@dataclass(frozen=True)
class HomScan:
    dx_um: tuple[float, ...]
    coincidence: tuple[float, ...]
    visibility: float
    raw_visibility: float
    fit: dict = field(default_factory=dict)

    def records(self) -> list[dict]:
        return [{"dx_um": x, "coincidence": c} for x, c in zip(self.dx_um, self.coincidence)]


def hom_scan(config: SetupConfig, dx_list: Sequence[float], pair=("D1", "D4")) -> HomScan:
    """Coincidences of ``pair`` versus input-arm delay, with a Gaussian-dip fit."""
    dx = np.asarray(dx_list, dtype=float)
    if dx.size == 0:
        raise ValidationError("hom_scan needs at least one delay")
    c = np.array([coincidence_probabilities(config, hom_setting(x))[pair] for x in dx])
    raw = float((c.max() - c.min()) / c.max()) if c.max() > 0 else 0.0
    fit = {}
    vis = raw
    if dx.size >= 4 and np.ptp(dx) > 0:
        p0 = (c.max(), raw, config.wavepacket.sigma)
        try:
            (base, fvis, width), _ = curve_fit(_dip, dx, c, p0=p0, maxfev=20000)
            vis = float(fvis)
            fit = {"baseline": float(base), "visibility": vis, "width_um": float(abs(width))}
        except RuntimeError:
            fit = {}
    return HomScan(tuple(dx.tolist()), tuple(c.tolist()), vis, raw, fit)


@dataclass(frozen=True)
class FringeScan:
    theta_fixed: float
    theta_deg: tuple[float, ...]
    probability: tuple[float, ...]
    visibility: float

    def records(self) -> list[dict]:
        return [{"theta_deg": t, "probability": p} for t, p in zip(self.theta_deg, self.probability)]


def fringe_visibility(theta_deg: Sequence[float], prob: Sequence[float]) -> float:
    """Visibility of a fringe ``a + b cos 4t + c sin 4t``, from a linear least-squares fit."""
    t = np.deg2rad(np.asarray(theta_deg, dtype=float))
    design = np.column_stack([np.ones_like(t), np.cos(4 * t), np.sin(4 * t)])
    (a, b, c), *_ = np.linalg.lstsq(design, np.asarray(prob, dtype=float), rcond=None)
    return float(np.hypot(b, c) / a) if a > 0 else 0.0


def fringe_scan(
    config: SetupConfig, theta_fixed: float, theta_list: Sequence[float], pair=("D1", "D4")
) -> FringeScan:
    """Pair probability within the cross-arm coincidences while rotating the arm-B HWP."""
    if len(theta_list) == 0:
        raise ValidationError("fringe_scan needs at least one angle")
    probs = []
    for th in theta_list:
        table = coincidence_probabilities(config, fringe_setting(theta_fixed, th))
        probs.append(table[pair] / table.total("cross"))
    vis = fringe_visibility(theta_list, probs) if len(theta_list) >= 3 else float("nan")
    return FringeScan(float(theta_fixed), tuple(float(t) for t in theta_list), tuple(probs), vis)


def _point_record(point: WitnessPoint) -> dict:
    rec = {
        "W_m": point.momentum.value,
        "W_p": point.polarization.value,
        "W_m_signed": point.momentum.signed_value,
        "W_p_signed": point.polarization.signed_value,
        "W_m_state": point.momentum_state.value,
        "W_p_state": point.polarization_state.value,
    }
    if point.momentum.stderr is not None:
        rec["W_m_stderr"] = point.momentum.stderr
        rec["W_p_stderr"] = point.polarization.stderr
    return rec


def delay_witness_scan(config: SetupConfig, dx_list: Sequence[float]) -> list[dict]:
    if len(dx_list) == 0:
        raise ValidationError("delay scan needs at least one delay")
    return [
        {"dx_um": float(x), **_point_record(witness_point(config, dx_um=x, point_index=i))}
        for i, x in enumerate(dx_list)
    ]


def dephasing_witness_scan(config: SetupConfig, p_list: Sequence[float]) -> list[dict]:
    if len(p_list) == 0:
        raise ValidationError("dephasing scan needs at least one p")
    return [
        {"p": float(p), **_point_record(witness_point(config, p=p, point_index=i))}
        for i, p in enumerate(p_list)
    ]


# --- calibration against the published numbers ----------------------------------

PUBLISHED_HOM_VISIBILITY = 0.904
PUBLISHED_SOURCE_VISIBILITY = 0.97
PUBLISHED_TABLE1 = ((0.0, 0.91, 0.97), (46.0, 0.39, 0.95), (86.0, 0.02, 0.96))  # dx, W_m, W_p
PUBLISHED_TABLE2 = ((0.0, 0.97, 0.91), (0.3, 0.33, 0.87), (1.0, 0.01, 0.87))  # p, W_p, W_m


def hom_visibility_closed_form(reflectivity: float, overlap_amplitude: float = 1.0) -> float:
    r = reflectivity
    return 2 * r * (1 - r) * overlap_amplitude**2 / (r**2 + (1 - r) ** 2)


def overlap_for_hom_visibility(reflectivity: float, visibility: float = PUBLISHED_HOM_VISIBILITY) -> float:
    m2 = visibility / hom_visibility_closed_form(reflectivity)
    if not 0 <= m2 <= 1:
        raise ValidationError(f"HOM visibility {visibility} unreachable with R={reflectivity}")
    return float(np.sqrt(m2))


def momentum_witness(config: SetupConfig, dx_um: float = 0.0) -> float:
    tables = {"momentum": coincidence_probabilities(config, momentum_setting(dx_um=dx_um))}
    return witness_from_counts(tables, MOMENTUM_WIRING).value


def calibrate_overlap(config: SetupConfig, target: float) -> SetupConfig:
    """Choose the mode-overlap factor so the zero-delay momentum witness equals ``target``."""
    cfg = replace(config, events=0)

    def f(m):
        return momentum_witness(replace(cfg, overlap_imperfection=m)) - target

    if f(1.0) < 0:
        raise ValidationError(f"momentum witness {target} exceeds the m = 1 value {f(1.0) + target:.4f}")
    return replace(config, overlap_imperfection=float(brentq(f, 0.0, 1.0, xtol=1e-14)))


def fit_delay_width(config: SetupConfig, dx_um: float, target: float) -> SetupConfig:
    """Choose the Gaussian width so that W_m(dx_um) equals ``target``."""
    cfg = replace(config, events=0)
    l = cfg.wavepacket.coherence_length

    def f(sigma):
        wp = el.WavepacketSpec(l, sigma)
        return momentum_witness(replace(cfg, wavepacket=wp), dx_um) - target

    sigma = brentq(f, 1e-3 * abs(dx_um), 1e3 * abs(dx_um), xtol=1e-12)
    return replace(config, wavepacket=el.WavepacketSpec(l, float(sigma)))


def published_config(base: SetupConfig = SetupConfig(), fit_width: bool = True) -> SetupConfig:
    """Calibration used to reproduce the published tables.

    Source visibility from the zero-delay polarization witness, mode overlap from
    the zero-delay momentum witness, and (optionally) the width from the 46 um point.
    """
    cfg = replace(base, source_visibility=PUBLISHED_SOURCE_VISIBILITY)
    cfg = calibrate_overlap(cfg, PUBLISHED_TABLE1[0][1])
    if fit_width:
        cfg = fit_delay_width(cfg, PUBLISHED_TABLE1[1][0], PUBLISHED_TABLE1[1][1])
    return cfg


def reproduce_table1(base: SetupConfig = SetupConfig()) -> tuple[SetupConfig, list[dict]]:
    cfg = published_config(base)
    rows = delay_witness_scan(cfg, [r[0] for r in PUBLISHED_TABLE1])
    for row, (_, w_m, w_p) in zip(rows, PUBLISHED_TABLE1):
        row["published_W_m"], row["published_W_p"] = w_m, w_p
    return cfg, rows


def reproduce_table2(base: SetupConfig = SetupConfig()) -> tuple[SetupConfig, list[dict]]:
    cfg = published_config(base, fit_width=False)
    rows = dephasing_witness_scan(cfg, [r[0] for r in PUBLISHED_TABLE2])
    for row, (_, w_p, w_m) in zip(rows, PUBLISHED_TABLE2):
        row["published_W_p"], row["published_W_m"] = w_p, w_m
    return cfg, rows


def config_dict(config: SetupConfig) -> dict:
    return asdict(config)
