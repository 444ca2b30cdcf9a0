import json
import subprocess
import sys

import pytest

from pnrcount import PhotonHistogram
from pnrcount.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_PARSE, EXIT_UNIDENTIFIABLE, main
from pnrcount.io import parse_histogram


def run(*argv):
    return main([str(a) for a in argv])


def first_line_config(path):
    line = path.read_text().splitlines()[0]
    assert line.startswith("# ")
    return json.loads(line[2:])


def test_simulate_writes_histogram_and_sidecar(tmp_path):
    out = tmp_path / "h.csv"
    assert run("simulate", "--M", 40, "--p", 0.2, "--nu", 100, "--seed", 1, "-o", out) == EXIT_OK
    hist = parse_histogram(out.read_text())
    assert hist.nu == 100
    cfg = first_line_config(out)
    assert cfg["seed"] == 1 and cfg["M"] == 40 and cfg["command"] == "simulate"
    side = json.loads((tmp_path / "h.json").read_text())
    assert side["schema_version"] == 1 and side["config"]["seed"] == 1
    pmf = dict((n, v) for n, v in side["ideal_pmf"])
    assert max(pmf, key=pmf.get) == 8


def test_rerun_byte_identical(tmp_path):
    # the resolved config (output path included) is embedded, so reruns target the same path
    a, rep = tmp_path / "a.csv", tmp_path / "a.rep"
    snapshots = []
    for _ in range(2):
        assert run("simulate", "--M", 40, "--p", 0.2, "--nu", 5000, "--seed", 9, "-o", a) == EXIT_OK
        assert run("estimate", a, "-o", rep) == EXIT_OK
        snapshots.append((a.read_bytes(), a.with_suffix(".json").read_bytes(), rep.read_bytes()))
    assert snapshots[0] == snapshots[1]


def test_round_trip_large_nu(tmp_path):
    h, rep = tmp_path / "h.csv", tmp_path / "r.json"
    assert run("simulate", "--M", 40, "--p", 0.2, "--nu", 100_000, "--seed", 4, "-o", h) == EXIT_OK
    assert run("estimate", h, "-o", rep) == EXIT_OK
    doc = json.loads(rep.read_text())
    est = doc["estimate"]
    assert 36 <= est["M"] <= 44
    assert est["lambda"] == pytest.approx(est["M"] * est["p"])
    assert est["converged"] is True
    assert doc["kind"] == "estimate" and "profile" in est


def test_estimate_bernoulli_with_cap(tmp_path):
    h, rep = tmp_path / "h.csv", tmp_path / "r.json"
    h.write_text("N,count\n0,60\n1,40\n")
    assert run("estimate", h, "--M-max", 1, "--no-profile", "-o", rep) == EXIT_OK
    est = json.loads(rep.read_text())["estimate"]
    assert est["M"] == 1 and est["p"] == pytest.approx(0.4) and "profile" not in est


def test_exit_codes(tmp_path, capsys):
    assert run("simulate", "--M", 40, "--p", 0.2, "--nu", 0, "--seed", 1, "-o", tmp_path / "x.csv") == EXIT_CONFIG
    assert run("simulate", "--M", 40, "--p", 1.5, "--nu", 5, "--seed", 1, "-o", tmp_path / "x.csv") == EXIT_CONFIG
    header_only = tmp_path / "empty.csv"
    header_only.write_text("N,count\n")
    assert run("estimate", header_only) == EXIT_PARSE
    bad = tmp_path / "bad.csv"
    bad.write_text("N,count\n0,3\n1,x\n")
    assert run("estimate", bad) == EXIT_PARSE
    assert "line 3" in capsys.readouterr().err
    dark = tmp_path / "dark.csv"
    dark.write_text("N,count\n0,100\n")
    assert run("estimate", dark) == EXIT_UNIDENTIFIABLE
    assert run("estimate", tmp_path / "missing.csv") == EXIT_CONFIG
    assert run("crlb", "--M", 10000, "--p", 1e-9) == EXIT_NUMERICAL
    assert len({EXIT_CONFIG, EXIT_PARSE, EXIT_UNIDENTIFIABLE, EXIT_NUMERICAL, EXIT_OK}) == 5


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"M": 12, "p": 0.5, "nu": 50, "seed": 3}))
    out = tmp_path / "h.csv"
    assert run("simulate", "--config", cfg, "--nu", 70, "-o", out) == EXIT_OK
    c = first_line_config(out)
    assert (c["M"], c["nu"], c["seed"]) == (12, 70, 3)
    cfg.write_text(json.dumps({"M": 12, "p": 0.5, "nu": 50, "seed": 3, "colour": "red"}))
    assert run("simulate", "--config", cfg, "-o", out) == EXIT_CONFIG
    cfg.write_text("[1, 2]")
    assert run("simulate", "--config", cfg, "-o", out) == EXIT_CONFIG


def test_missing_seed_is_drawn_and_reported(tmp_path, capsys):
    out = tmp_path / "h.csv"
    assert run("simulate", "--M", 5, "--p", 0.5, "--nu", 10, "-o", out) == EXIT_OK
    seed = int(capsys.readouterr().err.split("seed:")[1])
    assert first_line_config(out)["seed"] == seed


def test_crlb_report(tmp_path):
    rep = tmp_path / "c.json"
    assert run("crlb", "--M", 40, "--p", 0.2, "--nu", 10_000, "-o", rep) == EXIT_OK
    doc = json.loads(rep.read_text())
    assert doc["beta_model"] == {"lambda": pytest.approx(8.0), "xi": pytest.approx(200.0)}
    assert doc["beta"]["ellipse"]["center"] == pytest.approx([8.0, 200.0])
    assert doc["beta"]["ellipse"]["quantile"] == pytest.approx(5.9915, abs=1e-4)
    assert len(doc["theta"]["mapped_region"]["boundary"]) == 100
    assert doc["experiments_for_1pct"]["nu"] >= 1


def test_montecarlo_outputs(tmp_path):
    csv_out, js = tmp_path / "s.csv", tmp_path / "s.json"
    args = ("montecarlo", "--M", 40, "--p", 0.2, "--nu-list", "500,5000", "--runs", 8, "--seed", 2)
    assert run(*args, "-o", csv_out) == EXIT_OK
    lines = csv_out.read_text().splitlines()
    assert lines[1].startswith("nu,parameter,truth")
    assert len(lines) == 2 + 2 * 4
    assert run(*args, "--format", "json", "-o", js) == EXIT_OK
    assert len(json.loads(js.read_text())["rows"]) == 8
    first = csv_out.read_bytes()
    assert run(*args, "-o", csv_out, "--threads", 3) == EXIT_OK
    assert csv_out.read_bytes().split(b"\n", 1)[1] == first.split(b"\n", 1)[1]
    assert run(*args, "-o", csv_out) == EXIT_OK
    assert csv_out.read_bytes() == first


def test_plan_outputs(tmp_path):
    out = tmp_path / "plan.csv"
    assert run("plan", "--resolution", "6,5", "--lambdas", "5,20", "-o", out) == EXIT_OK
    rows = out.read_text().splitlines()
    assert rows[1].startswith("p\\M,2,")
    assert len(rows) == 2 + 5
    contours = (tmp_path / "plan_contours.csv").read_text().splitlines()
    assert contours[1] == "lambda,M,p,nu_exact,nu"
    js = tmp_path / "plan.json"
    assert run("plan", "--resolution", "6,5", "--format", "json", "-o", js) == EXIT_OK
    doc = json.loads(js.read_text())
    assert len(doc["nu_exact"]) == 5 and len(doc["nu_exact"][0]) == 6


def test_console_script_entry_point(tmp_path):
    h = tmp_path / "h.csv"
    h.write_text("N,count\n0,60\n1,40\n")
    proc = subprocess.run([sys.executable, "-m", "pnrcount.cli", "estimate", str(h), "--M-max", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["estimate"]["M"] == 1
