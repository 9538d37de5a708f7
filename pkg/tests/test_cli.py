import csv
import json

import pytest

from entdual import cli


def run(tmp_path, *args):
    return cli.main([*args, "--out-dir", str(tmp_path)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("scenario", cli.SCENARIOS)
def test_every_scenario_runs(tmp_path, scenario):
    assert run(tmp_path, scenario) == cli.EXIT_OK
    rows = read_csv(tmp_path / f"{scenario}.csv")
    assert rows and list(rows[0]) == cli.CSV_COLUMNS[scenario]
    summary = json.loads((tmp_path / f"{scenario}.json").read_text())
    assert summary["scenario"] == scenario
    assert set(cli.DEFAULTS) == set(summary["config"])


def test_hom_zero_delay_gives_zero(tmp_path):
    assert run(tmp_path, "hom", "--dx", "0") == 0
    rows = read_csv(tmp_path / "hom.csv")
    assert len(rows) == 1 and float(rows[0]["coincidence"]) == 0.0


def test_reproduce_table1_rows(tmp_path):
    assert run(tmp_path, "reproduce-table1") == 0
    rows = read_csv(tmp_path / "reproduce-table1.csv")
    assert [float(r["dx_um"]) for r in rows] == [0.0, 46.0, 86.0]
    assert float(rows[0]["W_m"]) == pytest.approx(0.91, abs=1e-9)
    assert abs(float(rows[2]["W_m"]) - 0.02) <= 0.05


def test_reproduce_table2_reports_discrepancy(tmp_path):
    assert run(tmp_path, "reproduce-table2") == 0
    summary = json.loads((tmp_path / "reproduce-table2.json").read_text())["summary"]
    assert summary["discrepancy"]["published_W_p"] == 0.33
    assert summary["discrepancy"]["model_W_p"] == pytest.approx(0.679, abs=1e-9)


def test_dualism_check_json(tmp_path):
    assert run(tmp_path, "dualism-check") == 0
    summary = json.loads((tmp_path / "dualism-check.json").read_text())["summary"]
    assert summary["fidelity"] == pytest.approx(1, abs=1e-12)
    assert summary["concurrence_pol"] == pytest.approx(1, abs=1e-9)


def test_sampled_output_is_byte_identical(tmp_path, monkeypatch):
    args = ["delay-scan", "--events", "10000", "--visibility", "0.97", "--out-dir", "out"]
    outputs = []
    for name, seed in (("a", "9"), ("b", "9"), ("c", "10")):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        assert cli.main([*args, "--seed", seed]) == 0
        outputs.append([(tmp_path / name / "out" / f).read_bytes() for f in ("delay-scan.csv", "delay-scan.json")])
    assert outputs[0] == outputs[1]
    assert outputs[0][0] != outputs[2][0]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"source_visibility": 0.8, "p_values": [0.0, 0.5]}))
    assert cli.main(["dephasing-scan", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "dephasing-scan.json").read_text())
    assert data["config"]["source_visibility"] == 0.8
    rows = read_csv(tmp_path / "dephasing-scan.csv")
    assert float(rows[1]["W_p"]) == pytest.approx(0.4, abs=1e-9)

    assert cli.main(["dephasing-scan", "--config", str(cfg), "--visibility", "0.9", "--out-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "dephasing-scan.json").read_text())
    assert data["config"]["source_visibility"] == 0.9
    assert data["config"]["p_values"] == [0.0, 0.5]


def test_resolved_config_roundtrips(tmp_path):
    assert run(tmp_path, "fringes", "--visibility", "0.97") == 0
    resolved = json.loads((tmp_path / "fringes.json").read_text())["config"]
    again = tmp_path / "again"
    cfg = tmp_path / "resolved.json"
    cfg.write_text(json.dumps(resolved))
    assert cli.main(["fringes", "--config", str(cfg), "--out-dir", str(again)]) == 0
    assert (again / "fringes.csv").read_bytes() == (tmp_path / "fringes.csv").read_bytes()


@pytest.mark.parametrize(
    "field, value",
    [
        ("source_visibility", 1.5),
        ("bs_reflectivity", -0.2),
        ("coherence_length_um", 0),
        ("overlap_imperfection", 3),
        ("qp_placement", "Z"),
        ("dephasing_model", "other"),
        ("source_noise", "nowhere"),
        ("seed", -1),
        ("events", -5),
        ("p_values", [1.2]),
        ("pair", ["D1", "D9"]),
    ],
)
def test_invalid_fields_are_rejected_by_name(tmp_path, capsys, field, value):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({field: value}))
    assert cli.main(["hom", "--config", str(cfg), "--out-dir", str(tmp_path)]) == cli.EXIT_CONFIG
    assert field in capsys.readouterr().err
    assert not (tmp_path / "hom.csv").exists()


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"visiblity": 0.9}))
    assert cli.main(["hom", "--config", str(cfg)]) == cli.EXIT_CONFIG
    assert "visiblity" in capsys.readouterr().err


def test_malformed_json_rejected(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert cli.main(["hom", "--config", str(cfg)]) == cli.EXIT_CONFIG


def test_bad_flag_value_rejected(tmp_path, capsys):
    assert run(tmp_path, "hom", "--reflectivity", "1.4") == cli.EXIT_CONFIG
    assert "bs_reflectivity" in capsys.readouterr().err


def test_missing_config_file_is_io_error(tmp_path):
    assert cli.main(["hom", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_IO


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["dualism-check", "--out-dir", str(blocker / "sub")]) == cli.EXIT_IO


def test_emit_csv_refuses_empty_records(tmp_path):
    target = tmp_path / "out.csv"
    with pytest.raises(ValueError):
        cli.emit_csv([], ["a"], target)
    assert not target.exists()


def test_render_csv_format():
    text = cli.render_csv([{"a": 1 / 3, "b": None}], ["a", "b"])
    assert text == "a,b\n0.333333333333,\n"
