from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlspec.cli import ConfigError, emit_config, main, parse_config
from nlspec.cli.output import csv_text, dumps


def _write(tmp_path, cfg: dict, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(tmp_path, command, cfg, out="out", extra=()):
    out_dir = tmp_path / out
    code = main([command, "--config", _write(tmp_path, cfg), "--out", str(out_dir), *extra])
    return code, out_dir


def test_defaults_and_roundtrip():
    cfg = parse_config({"command": "spectrum", "scenario": "SCEN-A"})
    assert cfg.n == 200 and cfg.steps == 400 and cfg.stepper == "cf4" and cfg.workers == 1
    assert parse_config(emit_config(cfg)) == cfg


@given(n=st.integers(1, 500), steps=st.integers(4, 900), tol=st.floats(1e-14, 1e-2),
       stepper=st.sampled_from(["cf4", "cn", "rk4"]),
       values=st.one_of(st.none(), st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=5)))
@settings(max_examples=40, deadline=None)
def test_roundtrip_property(n, steps, tol, stepper, values):
    cfg = parse_config({"command": "sweep-rate", "scenario": "SCEN-F", "n": n, "steps": steps, "tol": tol,
                        "stepper": stepper, "values": values})
    text = emit_config(cfg)
    assert emit_config(parse_config(text)) == text


@pytest.mark.parametrize("data,needle", [
    ({"command": "spectrum", "sceneario": "SCEN-A"}, "unknown key 'sceneario'"),
    ({"command": "spectrum"}, "scenario required"),
    ({"command": "spectrum", "scenario": "SCEN-A", "n": "200"}, "n:"),
    ({"command": "spectrum", "scenario": "SCEN-A", "n": 0}, "n: must be positive"),
    ({"command": "spectrum", "scenario": {"A": 0.0}}, "scenario.kernels required"),
    ({"command": "spectrum", "scenario": "SCEN-A", "stepper": "euler"}, "stepper"),
    ({"command": "launch", "scenario": "SCEN-A"}, "command"),
])
def test_strict_errors(data, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert needle in str(exc.value)


def test_invalid_json():
    with pytest.raises(ConfigError, match="JSON"):
        parse_config("{not json")


def test_dumps_is_deterministic_and_exact():
    text = dumps({"a": 0.1, "b": [1, 2.5], "c": float("nan"), "d": None, "e": True})
    assert '"a": 0.10000000000000001' in text
    assert '"nan"' in text and "null" in text and "true" in text
    assert json.loads(text)["b"] == [1, 2.5]


def test_csv_text():
    text = csv_text(["x", "ok"], [(0.5, True), (None, False)])
    assert text == "x,ok\n0.5,true\n,false\n"


def test_spectrum_outputs(tmp_path):
    code, out = _run(tmp_path, "spectrum", {"scenario": "SCEN-A", "n": 40, "steps": 8})
    assert code == 0
    res = json.loads((out / "results.json").read_text())
    assert abs(res["s"] - 1.0) < 1e-10 and res["status"] == 0
    assert (out / "resolved-config.json").exists() and (out / "timings.json").exists()
    rows = list(csv.reader((out / "results.csv").open()))
    assert rows[0] == ["node", "x", "species", "value"] and len(rows) == 41


def test_inline_scenario(tmp_path):
    scen = {"kernels": [{"type": "separable", "f": "1+x", "g": "1+x"}], "D": 1.0, "A": 0.0}
    code, out = _run(tmp_path, "spectrum", {"scenario": scen, "n": 100, "steps": 8})
    assert code == 0
    assert abs(json.loads((out / "results.json").read_text())["s"] - 7 / 3) < 2e-3


def test_input_errors_exit_1(tmp_path, capsys):
    code, _ = _run(tmp_path, "spectrum", {"scenario": "SCEN-A", "sceneario": 1})
    assert code == 1
    assert "unknown key" in capsys.readouterr().err
    code, _ = _run(tmp_path, "spectrum", {"scenario": "Z-(i)"})
    assert code == 1
    code, _ = _run(tmp_path, "spectrum", {"scenario": "SCEN-A", "command": "approx"})
    assert code == 1
    assert main(["spectrum", "--config", str(tmp_path / "missing.json")]) == 1


def test_certify_exit_codes(tmp_path):
    code, out = _run(tmp_path, "certify", {"scenario": "SCEN-D", "n": 40, "steps": 16})
    assert code == 0
    code, _ = _run(tmp_path, "certify", {"scenario": "SCEN-D", "n": 40, "steps": 16, "cert_tol": 1e-30}, "o2")
    assert code == 2


def test_sweep_rate_csv(tmp_path):
    code, out = _run(tmp_path, "sweep-rate", {"scenario": "SCEN-F", "n": 40, "steps": 8, "values": [1e-3, 1e3]})
    assert code == 0
    rows = list(csv.DictReader((out / "results.csv").open()))
    assert [float(r["rate_scale"]) for r in rows] == [1e-3, 1e3]
    assert float(rows[1]["s"]) < -100


def test_workers_give_identical_results(tmp_path):
    cfg = {"scenario": "SCEN-F", "n": 30, "steps": 8, "values": [0.01, 1.0, 100.0]}
    _, a = _run(tmp_path, "sweep-rate", cfg, "a")
    _, b = _run(tmp_path, "sweep-rate", cfg, "b", ["--workers", "2"])
    assert (a / "results.json").read_bytes() == (b / "results.json").read_bytes()


def test_stemcell_command(tmp_path):
    code, out = _run(tmp_path, "stemcell", {"scenario": "S-n0-decay", "thin": 10})
    assert code == 0
    res = json.loads((out / "results.json").read_text())
    assert res["verdict"] == "decay"
    code, _ = _run(tmp_path, "zika", {"scenario": "S-n0-decay"}, "z")
    assert code == 1


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "nlspec.cli.main", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "--workers" in out.stdout
