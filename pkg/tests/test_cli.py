import csv
import json

import numpy as np
import pytest

from glsim import ParseError, ValidationError, build_grid
from glsim.cli import DEFAULTS, load_field, main, parse_config
from glsim.diagnostics import CSV_COLUMNS


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


SMALL = {"domain": {"M": 32}, "scheme": {"dt": 0.01, "T": 0.2}}


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_minimal_config_fills_defaults():
    cfg = parse_config("{}")
    assert cfg.domain == DEFAULTS["domain"]
    assert cfg.params["alpha"] == 1.0
    assert cfg.scheme["boundary_order"] == 2
    assert cfg.feedback["family"] == "identity"
    assert cfg.output["sample_stride"] == 1


def test_alpha_zero_rejected():
    with pytest.raises(ValidationError) as info:
        parse_config('{"params": {"alpha": 0}}')
    assert info.value.problems[0][0] == "params.alpha"


def test_disk_in_two_dimensions_rejected():
    with pytest.raises(ValidationError) as info:
        parse_config('{"domain": {"N": 2, "r0": 0}}')
    assert [k for k, _ in info.value.problems] == ["domain.r0"]


def test_every_problem_is_reported():
    text = json.dumps({
        "domain": {"N": 4, "M": 2, "extra": 1},
        "params": {"alpha": -1, "p": 1},
        "scheme": {"dt": 0, "bc_variant": "robin"},
        "feedback": {"family": "custom", "m": 0},
        "surplus": {},
    })
    with pytest.raises(ValidationError) as info:
        parse_config(text)
    keys = {k for k, _ in info.value.problems}
    assert keys >= {"surplus", "domain.extra", "domain.N", "domain.M", "params.alpha", "params.p", "scheme.dt",
                    "scheme.bc_variant", "feedback.m", "feedback.phi"}


def test_malformed_json():
    with pytest.raises(ParseError):
        parse_config("{not json")
    with pytest.raises(ParseError):
        parse_config("[1, 2]")


def test_malformed_json_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{")
    assert main(["simulate", str(path)]) == 1
    assert "malformed JSON" in capsys.readouterr().err


def test_missing_file_and_usage_errors(tmp_path):
    assert main(["simulate", str(tmp_path / "absent.json")]) == 1
    assert main(["frobnicate"]) == 1


def test_simulate_writes_csv_and_summary(tmp_path):
    cfg = write_config(tmp_path, {**SMALL, "output": {"sample_stride": 3}})
    csv_path, json_path = tmp_path / "out.csv", tmp_path / "out.json"
    assert main(["simulate", cfg, "--csv", str(csv_path), "--json", str(json_path)]) == 0
    header, data = read_csv(csv_path)
    assert header == list(CSV_COLUMNS)
    np.testing.assert_allclose(data[:, 0], [0, 0.03, 0.06, 0.09, 0.12, 0.15, 0.18, 0.2], atol=1e-12)
    assert np.all(np.diff(data[:, 0]) > 0)
    raw = csv_path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    summary = json.loads(json_path.read_text())
    assert summary["schema"] == "glsim-report-v1"
    assert summary["steps"] == 20
    assert summary["runtime"] is None
    assert set(summary) >= {"final", "decay_fit", "violations", "config"}


def test_csv_values_round_trip_exactly(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    csv_path = tmp_path / "out.csv"
    assert main(["simulate", cfg, "--csv", str(csv_path), "--json", str(tmp_path / "s.json")]) == 0
    first_row = csv_path.read_text().splitlines()[2].split(",")
    assert all(repr(float(x)) == repr(float(repr(float(x)))) for x in first_row)
    assert any(len(x) > 12 for x in first_row)


def test_zero_initial_data_gives_zero_csv(tmp_path):
    field = tmp_path / "zero.json"
    field.write_text(json.dumps([0.0] * 33))
    cfg = write_config(tmp_path, {**SMALL, "initial": {"family": "file", "parameters": {"path": str(field)}}})
    csv_path = tmp_path / "z.csv"
    assert main(["simulate", cfg, "--csv", str(csv_path), "--json", str(tmp_path / "z.json")]) == 0
    _, data = read_csv(csv_path)
    assert np.all(data[:, 1:] == 0)


def test_determinism(tmp_path):
    cfg = write_config(tmp_path, {**SMALL, "params": {"kappa": 1, "beta": 1},
                                  "initial": {"family": "hump", "noise": 0.1, "seed": 7}})
    outs = []
    for k in range(2):
        c, j = tmp_path / f"{k}.csv", tmp_path / f"{k}.json"
        assert main(["simulate", cfg, "--csv", str(c), "--json", str(j)]) == 0
        outs.append((c.read_bytes(), j.read_bytes()))
    assert outs[0] == outs[1]


def test_decay_config_rate(tmp_path, capsys):
    cfg = write_config(tmp_path, {"domain": {"M": 64}, "params": {"kappa": 1, "beta": 1, "gamma": -0.5},
                                  "scheme": {"dt": 0.01, "T": 10.0}, "output": {"sample_stride": 50}})
    assert main(["simulate", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["decay_fit"]["rate"] >= 0.45


def test_blowup_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"domain": {"M": 16}, "params": {"gamma": 200}, "scheme": {"dt": 0.01, "T": 1}})
    assert main(["simulate", cfg]) == 2


def test_check_command(tmp_path, capsys):
    assert main(["check", write_config(tmp_path, {})]) == 0
    text = capsys.readouterr().out
    assert "feedback (identity): pass" in text
    assert "(ok)" in text
    assert "geometric condition: holds" in text


def test_check_nonmonotone_feedback(tmp_path):
    cfg = {"feedback": {"family": "custom", "phi": "1 + 0.9*sin(5*s)", "m": 0.1, "M": 2}}
    assert main(["check", write_config(tmp_path, cfg)]) == 2


def test_check_incompatible_data_only_warns(tmp_path, capsys):
    cfg = write_config(tmp_path, {"initial": {"family": "mode", "parameters": {"k": 0.5}}})
    assert main(["check", cfg]) == 0
    assert "WARNING" in capsys.readouterr().out


def test_experiment_manufactured_reports_order(tmp_path):
    cfg = write_config(tmp_path, {"domain": {"M": 16}, "scheme": {"dt": 0.025, "T": 0.5},
                                  "experiment": {"levels": 3}})
    out = tmp_path / "mms.json"
    assert main(["experiment", "manufactured", cfg, "--json", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["fits"]["order"] > 1.8
    assert report["checks"]["order"]["passed"] is True
    assert report["wall_time"] is None


def test_experiment_linear_default_physics(tmp_path):
    cfg = write_config(tmp_path, {"domain": {"M": 64}, "scheme": {"dt": 0.01, "T": 1.0}})
    assert main(["experiment", "linear", cfg, "--json", str(tmp_path / "lin.json")]) == 0


def test_experiment_inviscid_needs_two_dimensions(tmp_path, capsys):
    assert main(["experiment", "inviscid", write_config(tmp_path, {})]) == 1
    assert "domain.N" in capsys.readouterr().err


def test_unknown_experiment(tmp_path):
    assert main(["experiment", "nonsense", write_config(tmp_path, {})]) == 1


def test_experiment_option_must_fit_study(tmp_path):
    cfg = write_config(tmp_path, {**SMALL, "experiment": {"epsilon_list": [0.1, 0.01]}})
    assert main(["experiment", "manufactured", cfg]) == 1


def test_load_field_formats(tmp_path):
    g = build_grid(1, 0, 1, 4)
    np.save(tmp_path / "u.npy", np.arange(5) * 1j)
    np.testing.assert_array_equal(load_field(tmp_path / "u.npy", g), np.arange(5) * 1j)
    (tmp_path / "u.json").write_text("[0, [1, 2], 3, 4, 5]")
    assert load_field(tmp_path / "u.json", g)[1] == 1 + 2j
    (tmp_path / "short.json").write_text("[0, 1]")
    with pytest.raises(ValidationError):
        load_field(tmp_path / "short.json", g)
