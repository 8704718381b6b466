import json

import pytest

from circharvest.cli import Scenario, main
from circharvest.io import csv_text, fmt, json_text


def read(path):
    return path.read_text().splitlines()


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0**-40, 1e300, -7.25):
        assert float(fmt(x)) == x
    assert fmt(3) == "3" and fmt(True) == "true"
    assert csv_text(("a", "b"), [(1, 0.5)]) == "a,b\n1,0.5\n"
    with pytest.raises(ValueError):
        csv_text(("a",), [(1, 2)])
    assert json.loads(json_text({"x": [0.1, float("inf")], "n": 2})) == {"x": [0.1, None], "n": 2}


def test_scenario_round_trip(tmp_path):
    sc = Scenario(growth_rate=0.2, theta_grid=(2.0, 5.0), i_grid=(10, 20), seed=3)
    again = Scenario.from_dict(json.loads(json.dumps(sc.to_dict())))
    assert again == sc
    assert Scenario.from_dict({}) == Scenario()


def test_optimize_two_round_share(tmp_path):
    out = tmp_path / "opt.csv"
    assert main(["nondurable-optimize", "--growth-rate", "0.15", "--out", str(out)]) == 0
    lines = read(out)
    assert lines[0] == "theta,alpha,G,variant"
    assert abs(float(lines[1].split(",")[1]) - 0.28) < 0.005


def test_closed_form_table(tmp_path):
    out = tmp_path / "cf.csv"
    assert main(["game-closed-form", "--i-min", "1", "--i-max", "50", "--out", str(out)]) == 0
    lines = read(out)
    assert lines[0] == "I,alpha1,alpha2,payoff,limit_price,final_stock"
    assert len(lines) == 51
    row = lines[2].split(",")
    assert row[0] == "2" and abs(float(row[1]) - 0.282) < 1e-3 and abs(float(row[2]) - 0.145) < 1e-3


def test_empty_alpha_grid_is_rejected(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--alpha-grid", "", "--out", str(out)]) == 1
    assert not out.exists()


def test_usage_errors_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 1
    assert main(["sweep", "--locations", "abc"]) == 1
    bad = tmp_path / "bad.toml"
    bad.write_text("unknown_key = 1\n")
    assert main(["sweep", "--config", str(bad)]) == 1


def test_non_convergence_exits_two(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["control-solve", "--round-time", "3", "--max-iter", "2", "--out", str(out)]) == 2
    assert not out.exists()
    assert "did not converge" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text("round_time = 10.0\ngrowth_rate = 0.15\n")
    out = tmp_path / "o.csv"
    assert main(["nondurable-optimize", "--config", str(cfg), "--out", str(out)]) == 0
    assert abs(float(read(out)[1].split(",")[1]) - 0.5) < 1e-3
    assert main(["nondurable-optimize", "--config", str(cfg), "--round-time", "5", "--out", str(out)]) == 0
    assert abs(float(read(out)[1].split(",")[1]) - 0.2795) < 1e-3
    js = tmp_path / "s.json"
    js.write_text(json.dumps({"round_time": 10.0}))
    assert main(["nondurable-eval", "--config", str(js), "--alpha", "0.5", "--out", str(out)]) == 0


def test_all_commands_emit_headers(tmp_path):
    f = "1,1.2222222222222223"
    expected = {
        "nondurable-eval": "theta,alpha,G,variant",
        "sweep": "theta,alpha,G,variant",
        "control-solve": "round,t,alpha,p,f_before",
        "durable-solve": "N,case,alpha_1,alpha_2,objective,residual",
        "limit-detect": "I,shift,noise_std,power",
    }
    extra = {"limit-detect": ["--trials", "1000", "--i-grid", "10,100"], "control-solve": ["--steps-per-round", "32"]}
    for cmd, header in expected.items():
        out = tmp_path / f"{cmd}.csv"
        assert main([cmd, "--growth-factors", f, "--out", str(out), *extra.get(cmd, [])]) == 0
        assert read(out)[0] == header
    for cmd in ("game-solve", "limit-discount"):
        out = tmp_path / f"{cmd}.json"
        assert main([cmd, "--growth-factors", f, "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data
    assert json.loads((tmp_path / "limit-discount.json").read_text())["rho"] > 0
