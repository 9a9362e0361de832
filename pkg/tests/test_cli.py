import json
import math
import subprocess
import sys

import pytest

from copoly.cli import main, read_config


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_sweep_free_walk(capsys):
    code, out, _ = run(capsys, "sweep", "--lambda", 0, "--N", 4)
    assert code == 0
    first = out.splitlines()[0]
    assert float(first.split("=")[1]) == pytest.approx(math.log(0.375), abs=1e-15)


def test_sweep_window_agreement(capsys):
    vals = {}
    for win in ("default", "none"):
        code, out, _ = run(capsys, "sweep", "--lambda", 0.6, "--h", 0.44, "--N", "1e4", "--window", win,
                           "--format", "json")
        assert code == 0
        vals[win] = json.loads(out)["pinned_log"]
    assert abs(vals["default"] - vals["none"]) <= 1e-7


def test_sweep_artifacts(tmp_path, capsys):
    code, _, _ = run(capsys, "sweep", "--lambda", 0.6, "--h", 0.44, "--N", 2000, "--grid", "log10",
                     "--points", 8, "--profile", "yes", "--out", tmp_path)
    assert code == 0
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "N,logZ0,logZ" and trace[-1].startswith("2000,")
    assert (tmp_path / "profile.csv").read_text().startswith("height,value,log_scale\n")
    report = json.loads((tmp_path / "result.json").read_text())
    assert float(trace[-1].split(",")[1]) == report["pinned_log"]
    assert report["config"]["lambda"] == "0.6" and report["config"]["command"] == "sweep"


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# loctest example\nlambda = 1\nm = 0.67\nN = 400\nn = 5\nseed = 3\n")
    assert read_config(cfg)["lambda"] == "1"
    code, out, _ = run(capsys, "loctest", "--config", cfg, "--format", "json")
    assert code == 0
    base = json.loads(out)
    assert base["report"]["n"] == 5 and base["config"]["seed"] == "3"
    code, out, _ = run(capsys, "loctest", "--config", cfg, "--n", 7, "--format", "json")
    assert json.loads(out)["report"]["n"] == 7


def test_report_reproduces_run(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "meander", "--lambda", 0.6, "--h", 0.47, "--N", 2000, "--n", 6, "--seed", 5,
               "--out", a)[0] == 0
    assert run(capsys, "meander", "--config", a / "report.json", "--out", b)[0] == 0
    assert (a / "distances.csv").read_bytes() == (b / "distances.csv").read_bytes()
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    ra["config"].pop("out"), rb["config"].pop("out")
    assert ra == rb


def test_deterministic_and_schedule_invariant(tmp_path, capsys):
    outs = []
    for jobs, name in ((1, "x"), (1, "y"), (3, "z")):
        d = tmp_path / name
        assert run(capsys, "loctest", "--lambda", 1, "--m", 0.67, "--N", 600, "--n", 9, "--seed", 8,
                   "--jobs", jobs, "--out", d)[0] == 0
        outs.append((d / "samples.csv").read_bytes())
        report = json.loads((d / "report.json").read_text())["report"]
        outs.append(json.dumps(report, sort_keys=True).encode())
    assert outs[0] == outs[2] == outs[4]
    assert outs[1] == outs[3] == outs[5]


def test_csv_precision(tmp_path, capsys):
    run(capsys, "loctest", "--lambda", 1, "--h", 0.5, "--N", 200, "--n", 3, "--out", tmp_path)
    rows = (tmp_path / "samples.csv").read_text().splitlines()[1:]
    for row in rows:
        value = row.split(",")[2]
        assert repr(float(value)) == repr(float(f"{float(value):.17g}"))
        assert len(value.replace("-", "").replace(".", "").split("e")[0]) >= 15


def test_seed_env_fallback(monkeypatch, capsys):
    monkeypatch.setenv("COPOLY_SEED", "11")
    _, out, _ = run(capsys, "sweep", "--lambda", 1, "--h", 0.3, "--N", 100, "--format", "json")
    via_env = json.loads(out)
    assert via_env["config"]["seed"] == "11"
    monkeypatch.delenv("COPOLY_SEED")
    _, out, _ = run(capsys, "sweep", "--lambda", 1, "--h", 0.3, "--N", 100, "--seed", 11, "--format", "json")
    assert json.loads(out)["pinned_log"] == via_env["pinned_log"]


@pytest.mark.parametrize("argv, field", [
    (["sweep", "--lambda", "abc", "--N", "4"], "lambda"),
    (["sweep", "--lambda", "1", "--N", "5"], "N"),
    (["sweep", "--lambda", "1"], "N"),
    (["sweep", "--lambda", "1", "--N", "4", "--window", "1,2"], "window"),
    (["loctest", "--lambda", "1", "--N", "4"], "h"),
    (["loctest", "--lambda", "1", "--h", "0.5", "--N", "4", "--scan", "yes"], "N_max"),
    (["meander", "--lambda", "1", "--h", "0.5", "--N", "4", "--law", "cauchy"], "law"),
    (["limit", "--m", "0.8", "--N", "10", "--law", "gaussian"], "law"),
])
def test_config_errors(argv, field, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert f"{field}:" in err or field in err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("lambda = 1\nN = 4\nbogus = 3\n")
    code, _, err = run(capsys, "sweep", "--config", cfg)
    assert code == 2 and "bogus" in err


def test_usage_error_exit_code(capsys):
    assert run(capsys, "nosuch")[0] == 2


def test_numerical_failure_exit_code(capsys):
    code, _, err = run(capsys, "sweep", "--law", "gaussian", "--lambda", 300, "--N", 400)
    assert code == 3 and "numerical" in err
    code, _, err = run(capsys, "critcurve", "--lambdas", "0", "--N", 100)
    assert code == 3


def test_loctest_single_sample(capsys):
    code, out, _ = run(capsys, "loctest", "--lambda", 1, "--m", 0.67, "--N", 3600, "--n", 1, "--format", "json")
    report = json.loads(out)["report"]
    assert code == 0 and report["n"] == 1 and report["p_value_bound"] > 0.9


def test_loctest_scan(tmp_path, capsys):
    code, out, _ = run(capsys, "loctest", "--lambda", 1, "--m", 0.67, "--N", 400, "--n", 20,
                       "--scan", "yes", "--N-max", 12800, "--resolution", 200, "--out", tmp_path,
                       "--format", "json")
    assert code == 0
    scan = json.loads(out)["scan"]
    assert scan["N_plus"] - scan["N_minus"] <= 200
    rows = (tmp_path / "scan.csv").read_text().splitlines()
    assert rows[0] == "N,n,u_hat,p_upper,p_lower" and len(rows) > 4


def test_meander_ci(tmp_path, capsys):
    code, out, _ = run(capsys, "meander", "--lambda", 0.6, "--h", 0.47, "--N", 1000, "--n", 100,
                       "--jobs", 2, "--format", "json")
    doc = json.loads(out)
    lo, hi = doc["median_ci"]
    assert code == 0 and lo <= doc["median"] <= hi


def test_critcurve_gaussian(tmp_path, capsys):
    code, out, _ = run(capsys, "critcurve", "--law", "gaussian", "--lambdas", "0.5:2:3", "--N", 2000,
                       "--out", tmp_path, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["criterion"] == "max_ratio"
    curve = (tmp_path / "curve.csv").read_text().splitlines()
    ratios = [float(r.split(",")[2]) / float(r.split(",")[1]) for r in curve[1:]]
    assert doc["m_hat"][0] == pytest.approx(max(ratios), rel=1e-12)
    assert len((tmp_path / "errors.csv").read_text().splitlines()) == 4


def test_stretch_and_limit(tmp_path, capsys):
    code, out, _ = run(capsys, "stretch", "--lambda", 0.6, "--h", 0.3, "--cap", 200_000, "--n", 3,
                       "--extend", 2000, "--out", tmp_path, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["certified"] == 3 and doc["exponent"] < 0
    assert (tmp_path / "extension.csv").exists()
    code, out, _ = run(capsys, "limit", "--m", 0.9, "--N", 2000, "--grid", "500,1000", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "N,logZ0,logZ" and len(out.splitlines()) == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "copoly", "sweep", "--lambda", "0", "--N", "4"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "log Z_N(0)" in res.stdout
