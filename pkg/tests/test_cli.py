import csv
import io
import json
import math

import numpy as np
import pytest

from qedmodel import tp1
from qedmodel.cli import build_parser, run
from qedmodel.dataio import CALIBRATION_COLUMNS
from qedmodel.dynamics import simulate_sde

AXP_FLAGS = ["--theta", "-1.6485", "--sigma", "0.0318", "--kappa", "-4.9464", "--g", "3.7041"]


def invoke(capsys, argv):
    code = run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rates_axp(capsys):
    code, out, _ = invoke(capsys, ["rates", *AXP_FLAGS, "--recovery", "0.4", "--methods", "kramers"])
    assert code == 0
    spread = json.loads(out)["kramers"]["spread_bps"]
    assert abs(spread - 93.8) / 93.8 <= 0.15


def test_simulate_deterministic(capsys):
    argv = ["simulate", "--gbm", "--theta", "0.1", "--sigma", "0.2", "--paths", "10", "--t-end", "0.1"]
    _, a, _ = invoke(capsys, argv)
    _, b, _ = invoke(capsys, argv)
    _, c, _ = invoke(capsys, argv + ["--seed", "1"])
    assert a == b and a != c
    header = next(csv.reader(io.StringIO(a)))
    assert header == ["t"] + [f"path_{i}" for i in range(10)]


def test_usage_errors(capsys):
    assert invoke(capsys, ["rates", "--bogus", "1"])[0] == 2
    assert invoke(capsys, ["nope"])[0] == 2
    assert invoke(capsys, ["rates", "--sigma", "0.1"])[0] == 2


def test_model_error_exit_code(capsys):
    code, _, err = invoke(capsys, ["rates", "--theta", "0.5", "--sigma", "0.1", "--kappa", "0.1", "--g", "0.1"])
    assert code == 1 and "barrier" in err


def test_config_file_and_override(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"theta": -1.6485, "sigma": 0.0318, "kappa": -4.9464, "g": 3.7041,
                               "methods": "kramers"}))
    _, a, _ = invoke(capsys, ["rates", "--config", str(cfg)])
    monkeypatch.setenv("QED_CONFIG", str(cfg))
    _, b, _ = invoke(capsys, ["rates"])
    _, c, _ = invoke(capsys, ["rates", "--recovery", "0.5"])
    assert a == b
    assert json.loads(c)["recovery"] == 0.5
    cfg.write_text(json.dumps({"bogus": 1}))
    assert invoke(capsys, ["rates"])[0] == 2


def test_other_subcommands(capsys, tmp_path):
    flags = ["--theta", "-0.99", "--sigma", str(math.sqrt(0.02)), "--kappa", "-3", "--g", "2"]
    code, out, _ = invoke(capsys, ["potential", *flags])
    assert code == 0 and json.loads(out)["regime"] == "metastable"
    code, out, _ = invoke(capsys, ["potential", *flags, "--table", "--grid-n", "5"])
    assert code == 0 and out.splitlines()[0] == "y,V,dV,U_minus,U_plus"
    code, out, _ = invoke(capsys, ["instanton", *flags, "--grid-n", "101"])
    assert code == 0 and len(out.splitlines()) == 102
    code, out, _ = invoke(capsys, ["density", "--theta", "0.3", "--sigma", "0.25", "--kappa", "0.1",
                                   "--g", "0.01", "--grid-n", "11"])
    assert code == 0 and out.startswith("x,density")
    code, out, _ = invoke(capsys, ["density", *flags])
    assert code == 0 and json.loads(out)["normalizable"] is False
    out_file = tmp_path / "esc.json"
    code, _, _ = invoke(capsys, ["escape", "--theta", "-0.98", "--sigma", "0.2", "--kappa", "-3",
                                 "--g", "2", "--paths", "20", "--dt", "0.01", "--out", str(out_file)])
    assert code == 0 and json.loads(out_file.read_text())["n_paths"] == 20


def test_help_documents_flags(capsys):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name, sp in sub.items():
        for action in sp._actions:
            if action.option_strings and action.dest != "help":
                assert action.help, (name, action.dest)


@pytest.fixture
def market_files(tmp_path):
    p = tp1(0.02)
    ens = simulate_sde(1.0, p, 520 / 252, 1 / 252, 1, seed=8, space="y")
    prices = 80.0 * np.exp(ens.values[0])
    import datetime as dt
    days, d = [], dt.date(2010, 1, 4)
    while len(days) < prices.size:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    pf = tmp_path / "p.csv"
    pf.write_text("symbol,date,price\n" + "".join(f"AXP,{a.isoformat()},{float(b)!r}\n" for a, b in zip(days, prices)))
    cf = tmp_path / "c.csv"
    cf.write_text("symbol,date,spread_bps\n" + "".join(f"AXP,{a.isoformat()},2.3\n" for a in days if a.year == 2010))
    return pf, cf


def test_calibrate_end_to_end(capsys, market_files, tmp_path):
    # the last price falls alone in 2012 and that year is skipped
    pf, cf = market_files
    out = tmp_path / "calibration.csv"
    argv = ["calibrate", "--prices", str(pf), "--cds", str(cf), "--lambda1", "10",
            "--restarts", "1", "--max-iters", "300", "--out", str(out)]
    assert run(argv + ["--workers", "1"]) == 0
    first = out.read_text()
    assert run(argv + ["--workers", "2"]) == 0
    assert out.read_text() == first
    rows = list(csv.DictReader(io.StringIO(first)))
    assert tuple(rows[0]) == CALIBRATION_COLUMNS
    assert [r["year"] for r in rows] == ["2010", "2011"]
    assert "skipping AXP 2012" in capsys.readouterr().err
    assert rows[0]["observed_mean_spread_bps"] == "2.2999999999999998"
    assert rows[1]["observed_mean_spread_bps"] == ""


def test_compare_end_to_end(capsys, market_files):
    pf, cf = market_files
    code, out, _ = invoke(capsys, ["compare", "--prices", str(pf), "--cds", str(cf), "--restarts", "0",
                                   "--max-iters", "200", "--workers", "1"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[0]["ll_qed_unconstrained"]) >= float(rows[0]["ll_gbm"]) - 1e-6
    assert rows[1]["ll_qed_lambda_1"] == ""
