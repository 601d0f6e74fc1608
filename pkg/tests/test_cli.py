import csv
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thiele.cli import main
from thiele.config import RunConfig
from thiele.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

HEAD = """
[model]
a = 0.1
b = 0.02
sigma = 0.01
r0 = 0.03

[mortality]
alpha0 = 0.00127529
alpha1 = 2.51137e-6
alpha2 = 0.1271853
entry_age = 30.0
"""

ENDOW = HEAD + """
[product]
template = "endowment_reduction"
E = 100000.0
K = 0.04
rho = {rho}
T = 10.0
premium = "solve"

[grid]
dx = 0.005
output_dt = 1.0

[mc]
paths = 20000
seed = 3
dt = 0.0125
bias = {bias}

[mean_diff]
t_step = 1.0
paths = 400
seed = 1
"""

CAPLET = HEAD + """
[product]
template = "caplet"
E = {E}
K = 0.03
T = 5.0

[grid]
dx = 0.005
output_dt = 1.0
"""


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_unknown_key_is_reported_with_location(tmp_path, capsys):
    cfg = _write(tmp_path, CAPLET.format(E=1.0) + "spacing = 2\n")
    assert main(["surface", "--config", cfg, "--out", str(tmp_path / "s.csv")]) == 2
    err = capsys.readouterr().err
    assert "[grid]" in err and "spacing" in err
    with pytest.raises(ConfigError, match="unknown section"):
        RunConfig.from_toml(CAPLET.format(E=1.0) + "[extra]\nx = 1\n")


@pytest.mark.parametrize("broken, needle", [
    ("[model]\na = 0.1\n", "missing"),
    (HEAD + "[product]\ntemplate = 'nope'\nT = 1.0\n", "template"),
    (HEAD + "[product]\ntemplate = 'caplet'\nT = 1.0\nE = 1.0\n[grid]\ndx = -1.0\n", "dx"),
    ("[model\n", "TOML"),
])
def test_config_errors_exit_2(tmp_path, capsys, broken, needle):
    assert main(["premium", "--config", _write(tmp_path, broken)]) == 2
    assert needle in capsys.readouterr().err
    assert main(["premium", "--config", str(tmp_path / "missing.toml")]) == 2


def test_unsupported_combinations_exit_3(tmp_path):
    cfg = _write(tmp_path, CAPLET.format(E=1.0))
    assert main(["premium", "--config", cfg]) == 3
    assert main(["mean-diff", "--config", cfg, "--out", str(tmp_path / "m.csv")]) == 3
    re = (CONFIGS / "reinsurance.toml").read_text()
    assert main(["surface", "--method", "closedform", "--config", _write(tmp_path, re, "re.toml"),
                 "--out", str(tmp_path / "r.csv")]) == 3


@given(a=st.floats(0.01, 2.0), sigma=st.floats(0.0, 0.1), dx=st.floats(1e-4, 0.1),
       paths=st.integers(2, 10**6), rho=st.floats(0.0, 1.0), out=st.text("abc/_.", min_size=1, max_size=12),
       nodes=st.lists(st.lists(st.floats(0, 10), min_size=2, max_size=2), max_size=3))
def test_toml_round_trip_is_idempotent(a, sigma, dx, paths, rho, out, nodes):
    cfg = RunConfig.from_toml(ENDOW.format(rho=0.2, bias=0.0))
    cfg.model.a, cfg.model.sigma, cfg.grid.dx = a, sigma, dx
    cfg.mc.paths, cfg.product.rho, cfg.output.surface, cfg.mc.nodes = paths, rho, out, nodes
    text = cfg.to_toml()
    again = RunConfig.from_toml(text)
    assert again == cfg
    assert again.to_toml() == text


def test_premium_command(tmp_path, capsys):
    report = tmp_path / "premium.json"
    assert main(["premium", "--config", _write(tmp_path, ENDOW.format(rho=0.2, bias=0.0)),
                 "--out", str(report)]) == 0
    out = capsys.readouterr().out
    assert "premium = 9092.3" in out and "baseline_premium = 8770.2" in out
    data = json.loads(report.read_text())
    assert data["premium"] == pytest.approx(9092.40, abs=0.01)
    assert data["baseline_premium"] == pytest.approx(8770.29, abs=0.01)
    assert data["benefit_value"] == pytest.approx(data["premium"] * data["annuity_value"], rel=1e-12)


def test_surface_csv_is_byte_deterministic(tmp_path):
    cfg = _write(tmp_path, CAPLET.format(E=100000.0))
    for name in ("a", "b"):
        assert main(["surface", "--config", cfg, "--out", str(tmp_path / name / "s.csv")]) == 0
    for state in ("alive", "dead"):
        first = (tmp_path / "a" / f"s_{state}.csv").read_bytes()
        assert first == (tmp_path / "b" / f"s_{state}.csv").read_bytes()
        assert first.startswith(b"t,x,state,value\n")


@pytest.mark.parametrize("method", ["pde", "closedform"])
def test_terminal_rows_equal_the_payoff(tmp_path, method):
    cfg = _write(tmp_path, CAPLET.format(E=100000.0))
    assert main(["surface", "--method", method, "--config", cfg, "--out", str(tmp_path / "s.csv")]) == 0
    rows = _rows(tmp_path / "s_alive.csv")
    times = sorted({float(r["t"]) for r in rows})
    assert times == pytest.approx(np.arange(6.0))
    for r in rows:
        if float(r["t"]) == 5.0:
            assert float(r["value"]) == pytest.approx(100000.0 * max(float(r["x"]) - 0.03, 0.0), abs=1e-9)
    assert all(float(r["value"]) == 0.0 for r in _rows(tmp_path / "s_dead.csv"))


def test_zero_policy_surface_is_zero(tmp_path):
    cfg = _write(tmp_path, CAPLET.format(E=0.0))
    assert main(["surface", "--config", cfg, "--out", str(tmp_path / "s.csv")]) == 0
    assert all(float(r["value"]) == 0.0 for r in _rows(tmp_path / "s_alive.csv"))


def test_mc_check_pass_and_injected_bias(tmp_path, capsys):
    good = _write(tmp_path, ENDOW.format(rho=0.2, bias=0.0), "good.toml")
    assert main(["mc-check", "--config", good]) == 0
    assert "PASS" in capsys.readouterr().out
    bad = _write(tmp_path, ENDOW.format(rho=0.2, bias=0.1), "bad.toml")
    assert main(["mc-check", "--config", bad]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_mean_diff_without_reduction_is_zero(tmp_path):
    out = tmp_path / "md.csv"
    assert main(["mean-diff", "--config", _write(tmp_path, ENDOW.format(rho=0.0, bias=0.0)),
                 "--out", str(out)]) == 0
    rows = _rows(out)
    assert [float(r["t"]) for r in rows] == pytest.approx(np.arange(11.0))
    assert all(float(r["mean_diff"]) == 0.0 and float(r["stderr"]) == 0.0 for r in rows)


def test_mean_diff_terminal_row_is_zero(tmp_path):
    out = tmp_path / "md.csv"
    assert main(["mean-diff", "--config", _write(tmp_path, ENDOW.format(rho=0.2, bias=0.0)),
                 "--out", str(out), "--seed", "4"]) == 0
    rows = _rows(out)
    assert float(rows[-1]["mean_diff"]) == 0.0 and float(rows[0]["mean_diff"]) == pytest.approx(0.0, abs=1e-6)
    assert max(float(r["mean_diff"]) for r in rows) > 0.0


@pytest.mark.parametrize("name", ["endowment", "pension", "binary_endowment", "reinsurance", "rate_cap",
                                  "rate_floor", "caplet", "floorlet", "endowment_coarse"])
def test_shipped_configs_load(name):
    cfg = RunConfig.load(CONFIGS / f"{name}.toml")
    assert RunConfig.from_toml(cfg.to_toml()) == cfg


def test_coarse_cap_terminal_rows(tmp_path):
    text = HEAD + """
[product]
template = "rate_cap"
E = 100000.0
K = 0.04
T = 10.0

[grid]
dt = 0.1
dx = 0.08333333333333333
x_min = -0.5
x_max = 0.5
align_threshold = false
"""
    assert main(["surface", "--config", _write(tmp_path, text), "--out", str(tmp_path / "s.csv")]) == 0
    rows = [r for r in _rows(tmp_path / "s_alive.csv") if float(r["t"]) == 10.0]
    assert len(rows) == 13
    for r in rows:
        assert float(r["value"]) == (100000.0 if float(r["x"]) >= 0.04 else 0.0)
