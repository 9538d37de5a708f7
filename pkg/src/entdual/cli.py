"""Command-line front end: ``entdual <scenario> [--config run.json] [overrides]``.

Values resolve flag > config file > default.  Each run writes ``<scenario>.csv``
(one row per scan point) and ``<scenario>.json`` (resolved config and summary)
into the output directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path as FsPath
from typing import Any, Sequence

import jsonschema

from . import elements as el
from . import experiment as ex
from .analysis import DETECTORS, dualism_check
from .fockspace import ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

SCENARIOS = (
    "hom",
    "fringes",
    "delay-scan",
    "dephasing-scan",
    "dualism-check",
    "reproduce-table1",
    "reproduce-table2",
)

DEFAULTS: dict[str, Any] = {
    "scenario": None,
    "source_visibility": 1.0,
    "bs_reflectivity": 0.5,
    "coherence_length_um": 70.0,
    "sigma_um": None,
    "overlap_imperfection": 1.0,
    "qp_placement": "A",
    "dephasing_model": "quartz",
    "source_noise": "output",
    "seed": 42,
    "events": 0,
    "dx_um": None,
    "p_values": [0.0, 0.3, 1.0],
    "theta_fixed_deg": 22.5,
    "theta_deg": [10.0 * k for k in range(19)],
    "pair": ["D1", "D4"],
    "output_dir": ".",
}

_unit = {"type": "number", "minimum": 0, "maximum": 1}
_number_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scenario": {"enum": list(SCENARIOS) + [None]},
        "source_visibility": _unit,
        "bs_reflectivity": _unit,
        "coherence_length_um": {"type": "number", "exclusiveMinimum": 0},
        "sigma_um": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "overlap_imperfection": _unit,
        "qp_placement": {"enum": sorted(ex.QP_PLACEMENTS)},
        "dephasing_model": {"enum": list(ex.DEPHASING_MODELS)},
        "source_noise": {"enum": list(ex.SOURCE_NOISE_PLACEMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "events": {"type": "integer", "minimum": 0},
        "dx_um": {"anyOf": [_number_list, {"type": "null"}]},
        "p_values": {"type": "array", "items": _unit, "minItems": 1},
        "theta_fixed_deg": {"type": "number"},
        "theta_deg": _number_list,
        "pair": {"type": "array", "items": {"enum": list(DETECTORS)}, "minItems": 2, "maxItems": 2},
        "output_dir": {"type": "string"},
    },
}

CSV_COLUMNS = {
    "hom": ["dx_um", "coincidence"],
    "fringes": ["theta_deg", "probability"],
    "delay-scan": ["dx_um", "W_m", "W_p", "W_m_stderr", "W_p_stderr", "W_m_state", "W_p_state"],
    "dephasing-scan": ["p", "W_p", "W_m", "W_p_stderr", "W_m_stderr", "W_p_state", "W_m_state"],
    "dualism-check": [
        "fidelity", "state_fidelity", "concurrence_pol", "concurrence_mom", "witness_pol", "witness_mom",
    ],
    "reproduce-table1": ["dx_um", "W_m", "W_p", "W_m_stderr", "W_p_stderr", "published_W_m", "published_W_p"],
    "reproduce-table2": ["p", "W_p", "W_m", "W_p_stderr", "W_m_stderr", "published_W_p", "published_W_m"],
}


class ConfigError(ValueError):
    pass


def validate_config(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        field = ".".join(str(p) for p in err.path) or "config"
        raise ConfigError(f"{field}: {err.message}")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    validate_config(data)
    return data


def resolve_config(file_cfg: dict, flags: dict) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(file_cfg)
    cfg.update({k: v for k, v in flags.items() if v is not None})
    validate_config(cfg)
    return cfg


def setup_from(cfg: dict) -> ex.SetupConfig:
    return ex.SetupConfig(
        source_visibility=float(cfg["source_visibility"]),
        bs_reflectivity=float(cfg["bs_reflectivity"]),
        wavepacket=el.WavepacketSpec(float(cfg["coherence_length_um"]), cfg["sigma_um"]),
        overlap_imperfection=float(cfg["overlap_imperfection"]),
        qp_placement=cfg["qp_placement"],
        dephasing_model=cfg["dephasing_model"],
        source_noise=cfg["source_noise"],
        seed=int(cfg["seed"]),
        events=int(cfg["events"]),
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def render_csv(records: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_fmt(rec.get(c)) for c in columns])
    return buf.getvalue()


def emit_csv(records: Sequence[dict], columns: Sequence[str], path: FsPath) -> None:
    if not records:
        raise ValueError("no records to write")
    text = render_csv(records, columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def emit_json(summary: dict, path: FsPath) -> None:
    if not summary:
        raise ValueError("empty summary")
    text = json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _witness_summary(rows: list[dict]) -> list[dict]:
    keys = ("dx_um", "p", "W_m", "W_p", "W_m_stderr", "W_p_stderr", "published_W_m", "published_W_p")
    return [{k: r[k] for k in keys if k in r} for r in rows]


def run_scenario(scenario: str, cfg: dict) -> tuple[list[dict], dict]:
    """Return (csv records, summary) for one scenario."""
    setup = setup_from(cfg)
    if scenario == "hom":
        dx = cfg["dx_um"] or [5.0 * k for k in range(-40, 41)]
        scan = ex.hom_scan(setup, dx, tuple(cfg["pair"]))
        summary = {
            "visibility": scan.visibility,
            "raw_visibility": scan.raw_visibility,
            "closed_form_visibility": ex.hom_visibility_closed_form(
                setup.bs_reflectivity, setup.overlap_imperfection
            ),
            "fit": scan.fit,
            "pair": list(cfg["pair"]),
        }
        return scan.records(), summary
    if scenario == "fringes":
        scan = ex.fringe_scan(setup, cfg["theta_fixed_deg"], cfg["theta_deg"], tuple(cfg["pair"]))
        return scan.records(), {"visibility": scan.visibility, "theta_fixed_deg": scan.theta_fixed}
    if scenario == "delay-scan":
        rows = ex.delay_witness_scan(setup, cfg["dx_um"] or [0.0, 46.0, 86.0])
        return rows, {"points": _witness_summary(rows)}
    if scenario == "dephasing-scan":
        rows = ex.dephasing_witness_scan(setup, cfg["p_values"])
        return rows, {"points": _witness_summary(rows)}
    if scenario == "dualism-check":
        report = dualism_check(el.source_state(setup.source_visibility)).as_dict()
        return [report], dict(report)
    if scenario in ("reproduce-table1", "reproduce-table2"):
        fn = ex.reproduce_table1 if scenario == "reproduce-table1" else ex.reproduce_table2
        fitted, rows = fn(setup)
        summary = {
            "points": _witness_summary(rows),
            "fit": {
                "source_visibility": fitted.source_visibility,
                "overlap_imperfection": fitted.overlap_imperfection,
                "sigma_um": fitted.wavepacket.sigma,
            },
        }
        if scenario == "reproduce-table2":
            row = next(r for r in rows if r["p"] == 0.3)
            summary["discrepancy"] = {
                "p": 0.3,
                "model_W_p": row["W_p"],
                "published_W_p": row["published_W_p"],
                "note": "dephasing scales the polarization coherence by 1 - p; "
                "the published 0.33 at p = 0.3 is not reproduced",
            }
        return rows, summary
    raise ConfigError(f"scenario: unknown scenario {scenario!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entdual", description=__doc__.splitlines()[0])
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out-dir", dest="output_dir")
    parser.add_argument("--visibility", dest="source_visibility", type=float)
    parser.add_argument("--reflectivity", dest="bs_reflectivity", type=float)
    parser.add_argument("--coherence-length", dest="coherence_length_um", type=float)
    parser.add_argument("--sigma", dest="sigma_um", type=float)
    parser.add_argument("--overlap", dest="overlap_imperfection", type=float)
    parser.add_argument("--qp-placement", dest="qp_placement")
    parser.add_argument("--dephasing-model", dest="dephasing_model")
    parser.add_argument("--source-noise", dest="source_noise")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--events", type=int)
    parser.add_argument("--dx", dest="dx_um", type=float, nargs="+")
    parser.add_argument("--p", dest="p_values", type=float, nargs="+")
    parser.add_argument("--theta-fixed", dest="theta_fixed_deg", type=float)
    parser.add_argument("--theta", dest="theta_deg", type=float, nargs="+")
    parser.add_argument("--pair", nargs=2)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    flags = vars(args)
    scenario = flags.pop("scenario")
    config_path = flags.pop("config")
    try:
        cfg = resolve_config(load_config(config_path), flags)
        cfg["scenario"] = scenario
        records, summary = run_scenario(scenario, cfg)
    except (ConfigError, ValidationError) as exc:
        print(f"entdual: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"entdual: error: {exc}", file=sys.stderr)
        return EXIT_IO
    out_dir = FsPath(cfg["output_dir"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        emit_csv(records, CSV_COLUMNS[scenario], out_dir / f"{scenario}.csv")
        emit_json({"scenario": scenario, "config": cfg, "summary": summary}, out_dir / f"{scenario}.json")
    except OSError as exc:
        print(f"entdual: error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
