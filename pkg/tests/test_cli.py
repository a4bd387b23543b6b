import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from gkpmagic import io
from gkpmagic.cli import main
from gkpmagic.core import SQRT_PI


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_bloch_vacuum_origin(capsys):
    code, out, _ = run(capsys, "bloch", "--state", "vacuum", "--t", "0", "0")
    assert code == 0
    data = json.loads(out)
    r0, rx, ry, rz = data["bloch"]
    assert r0 == 1.0 and ry == 0.0
    assert rx == pytest.approx(rz, abs=1e-15)
    assert 0.066 <= data["pdf"] <= 0.094


def test_bloch_threshold_thermal(capsys):
    code, out, _ = run(capsys, "bloch", "--state", "thermal:0.366", "--t", "0", "0")
    data = json.loads(out)
    assert code == 0 and data["norm"] < 1


def test_bloch_hex_routing(capsys):
    code, out, _ = run(capsys, "bloch", "--state", "vacuum", "--t", "0", "0", "--lattice", "hex")
    data = json.loads(out)
    assert code == 0 and data["lattice"] == "hex"
    cov = np.array(data["square_equivalent_state"]["cov"])
    assert cov[0, 1] != 0 and np.linalg.det(cov) == pytest.approx(0.25)


@pytest.mark.parametrize("argv, field", [
    (["bloch", "--state", "thermal:-1"], "state"),
    (["bloch", "--state", "gauss:0,0,0.1,0,0.1"], "state"),
    (["bloch", "--lattice", "triangle"], "lattice"),
    (["bloch", "--t", "nan", "0"], "t"),
    (["bloch", "--state", "thermal:0.1", "--lattice", "hex", "--state", "gauss:1,0,1,0,1"],
     "lattice"),
    (["fidelity-map", "--family", "Q"], "family"),
    (["fidelity-map", "--resolution", "0"], "resolution"),
    (["success-curve", "--f-grid", "0.9", "0.8"], "f_grid"),
    (["success-curve", "--f-grid", "0.4"], "f_grid"),
    (["success-curve", "--nbar", "-1"], "nbar"),
    (["success-curve", "--tol", "0"], "tol"),
    (["threshold", "--f", "1.2"], "f"),
    (["verify", "--seed", "-3"], "seed"),
    (["verify", "--beta", "-0.1", "--oracle-cases", "1"], "beta"),
])
def test_validation_errors_exit_2(capsys, tmp_path, monkeypatch, argv, field):
    monkeypatch.chdir(tmp_path)
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == ""
    assert f"{field}:" in err
    assert list(tmp_path.iterdir()) == []


def test_argparse_usage_error_exits_2(capsys):
    code, _, _ = run(capsys, "bloch", "--bogus")
    assert code == 2


def test_fidelity_map_files(capsys, tmp_path):
    out = tmp_path / "map.csv"
    code, stdout, _ = run(capsys, "fidelity-map", "--state", "vacuum", "--resolution", "16",
                          "--out", str(out))
    assert code == 0
    summary = json.loads(stdout)
    assert summary["fraction_above_threshold"] > 0.99
    assert {"min_F", "max_F", "non_distillable_fraction"} <= set(summary)
    lines = out.read_text().splitlines()
    assert lines[0] == "t_q,t_p,F,nearest_index" and len(lines) == 16 * 16 + 1
    bloch = (tmp_path / "map_bloch.csv").read_text().splitlines()
    assert bloch[0] == "t_q,t_p,r0,rx,ry,rz" and len(bloch) == 257
    assert json.loads((tmp_path / "map_summary.json").read_text())["resolution"] == 16
    # row-major: t_p varies fastest
    first, second = (row.split(",") for row in lines[1:3])
    assert first[0] == second[0] and float(first[1]) < float(second[1])


def test_single_point_map_equals_bloch_at_centre(capsys, tmp_path):
    run(capsys, "fidelity-map", "--resolution", "1", "--out", str(tmp_path / "m.csv"))
    row = (tmp_path / "m_bloch.csv").read_text().splitlines()[1].split(",")
    code, out, _ = run(capsys, "bloch", "--t", repr(SQRT_PI), repr(SQRT_PI))
    data = json.loads(out)
    assert float(row[0]) == pytest.approx(data["t"][0], abs=1e-15)
    assert float(row[2]) == pytest.approx(data["pdf"], abs=1e-15)
    assert np.allclose([float(v) for v in row[3:]], data["bloch"][1:], atol=1e-15)


def test_thermal_half_map_not_distillable(capsys, tmp_path):
    code, out, _ = run(capsys, "fidelity-map", "--state", "thermal:0.5", "--resolution", "32",
                       "--out", str(tmp_path / "m.csv"))
    assert code == 0 and json.loads(out)["max_F"] < 0.853


def test_success_curve_files(capsys, tmp_path):
    code, out, _ = run(capsys, "success-curve", "--nbar", "0", "0.4", "--f-grid", "0.5", "0.853",
                       "--out", str(tmp_path / "c.csv"))
    assert code == 0
    report = json.loads(out)
    assert report[0]["P"][0] == pytest.approx(1.0, abs=1e-4)
    assert report[1]["P"][1] == 0.0
    csv0 = (tmp_path / "c_nbar0.csv").read_text().splitlines()
    assert csv0[0] == "f,P" and len(csv0) == 3
    side = json.loads((tmp_path / "c_nbar0.4.json").read_text())
    assert side == {"nbar": 0.4, "family": "H", "lattice": "square", "quadrature_tol": 1e-4}


def test_threshold_command(capsys, tmp_path):
    code, out, _ = run(capsys, "threshold", "--family", "H", "--f", "0.853", "--xtol", "0.01",
                       "--out", str(tmp_path / "th.json"))
    assert code == 0
    data = json.loads(out)
    assert abs(data["nbar_star"] - 0.366) < 0.01
    assert json.loads((tmp_path / "th.json").read_text()) == data


def test_verify_empty_and_default(capsys):
    code, out, _ = run(capsys, "verify", "--n-cases", "0")
    data = json.loads(out)
    assert code == 0 and data["pass"] and data["dual_route"]["cases"] == []
    code, out, _ = run(capsys, "verify", "--n-cases", "200", "--seed", "7")
    data = json.loads(out)
    assert code == 0 and data["dual_route"]["max_abs_err"] < 1e-10


def test_verify_failure_exit_1(capsys):
    code, out, _ = run(capsys, "verify", "--n-cases", "50", "--dual-tol", "1e-30")
    assert code == 1 and json.loads(out)["pass"] is False


def test_verify_oracle_cases(capsys):
    code, out, _ = run(capsys, "verify", "--n-cases", "0", "--oracle-cases", "3")
    data = json.loads(out)
    assert code == 0
    assert data["oracle"]["max_abs_err"] < 1e-3 and len(data["oracle"]["cases"]) == 3


def test_deterministic_outputs(capsys, tmp_path):
    for name in ("a", "b"):
        run(capsys, "verify", "--n-cases", "30", "--seed", "5", "--out", str(tmp_path / f"{name}.json"))
        run(capsys, "fidelity-map", "--state", "thermal:0.2", "--resolution", "8",
            "--out", str(tmp_path / f"{name}.csv"))
    for suffix in (".json", ".csv", "_bloch.csv", "_summary.json"):
        a = (tmp_path / f"a{suffix}").read_bytes()
        b = (tmp_path / f"b{suffix}").read_bytes()
        if suffix == "_summary.json":
            a, b = a.replace(b"a.csv", b"x").replace(b"a_", b"x_"), \
                b.replace(b"b.csv", b"x").replace(b"b_", b"x_")
        assert a == b


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"state": "thermal:0.366", "t": [0.5, 0.25]}))
    code, out, _ = run(capsys, "bloch", "--config", str(cfg))
    data = json.loads(out)
    assert code == 0 and data["t"] == [0.5, 0.25] and data["state"]["cov"][0][0] == 0.866
    # explicit flags override the file
    code, out, _ = run(capsys, "bloch", "--config", str(cfg), "--state", "vacuum")
    assert json.loads(out)["state"]["cov"][0][0] == 0.5
    cfg.write_text(json.dumps({"state": "vacuum", "colour": "red"}))
    code, _, err = run(capsys, "bloch", "--config", str(cfg))
    assert code == 2 and "colour" in err
    code, _, err = run(capsys, "bloch", "--config", str(tmp_path / "missing.json"))
    assert code == 2 and "config:" in err


def test_output_dir_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("GKPMAGIC_OUTPUT_DIR", str(tmp_path / "runs"))
    code, out, _ = run(capsys, "fidelity-map", "--resolution", "2", "--out", "m.csv")
    assert code == 0
    assert (tmp_path / "runs" / "m.csv").exists()


def test_unwritable_output_rejected_before_compute(capsys, tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    try:
        if os.access(locked, os.W_OK):
            pytest.skip("running with privileges that ignore directory permissions")
        code, _, err = run(capsys, "fidelity-map", "--out", str(locked / "m.csv"))
        assert code == 2 and "out:" in err
    finally:
        locked.chmod(0o700)


def test_io_formatting(tmp_path):
    assert io.fmt(0.1) == "0.10000000000000001"
    assert io.fmt(3) == "3"
    text = io.dumps({"b": [1.0, float("nan")], "a": 0.1})
    assert text.index('"a"') < text.index('"b"')
    assert float(json.loads(text)["a"]) == 0.1
    assert "NaN" in text
    path = io.write_csv(tmp_path / "x.csv", ["u"], [(1 / 3,)])
    assert float(path.read_text().splitlines()[1]) == 1 / 3
    assert [p.name for p in tmp_path.iterdir()] == ["x.csv"]


def test_console_script_and_module_entry():
    res = subprocess.run([sys.executable, "-m", "gkpmagic", "bloch"], capture_output=True,
                         text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["bloch"][0] == 1.0
    res = subprocess.run([sys.executable, "-m", "gkpmagic", "bloch", "--state", "nope"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 2 and "state:" in res.stderr
