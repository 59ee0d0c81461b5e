import io
import json
import subprocess
import sys

import numpy as np
import pytest

from relpov import dists
from relpov.cli import emit, run
from relpov.ingest import fixture_path


def call(*argv):
    out = io.StringIO()
    code = run([str(a) for a in argv], out)
    return code, out.getvalue()


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


@pytest.fixture
def ln_file(write_lines):
    s = dists.sample(dists.Lognormal(0, 1), 400, 21)
    return write_lines([f"{v:.17g}" for v in s.values], "ln.txt")


@pytest.fixture
def small_file(write_lines):
    return write_lines([1, 2, 3, 4, 5], "small.txt")


def test_estimate_small(small_file):
    code, text = call("estimate", "--input", small_file)
    assert code == 0
    rec = records(text)[0]
    assert rec["h_hat"] == 0.2 and rec["median"] == 3.0 and rec["line"] == 1.5
    assert "se2" not in rec


def test_estimate_with_standard_errors(ln_file):
    from relpov.estimate import standard_errors
    from relpov.ingest import read_raw

    code, text = call("estimate", "--input", ln_file, "--p", "0.6")
    rec = records(text)[0]
    se = standard_errors(read_raw(ln_file), 0.6)
    assert code == 0 and rec["se2"] == float(f"{se.se2:.6g}")


def test_estimate_csv_column(write_lines):
    path = write_lines(["id,income", "1,10", "2,20", "3,30"], "c.csv")
    code, text = call("estimate", "--input", path, "--format", "csv")
    assert code == 0
    header, row = text.strip().splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert rec == {"h_hat": "0.333333", "median": "20", "line": "10", "p": "0.5", "n": "3", "count": "1"}


def test_ci_methods_and_seed(ln_file, monkeypatch):
    code, text = call("ci", "--input", ln_file, "--method", "wald2,bootstrap,wilson",
                      "--replicates", "200", "--seed", "4")
    recs = records(text)
    assert code == 0 and [r["method"] for r in recs] == ["wald2", "bootstrap", "wilson"]
    for r in recs:
        assert r["lower"] <= r["point"] <= r["upper"]
    monkeypatch.setenv("RELPOV_SEED", "4")
    assert call("ci", "--input", ln_file, "--method", "wald2,bootstrap,wilson",
                "--replicates", "200")[1] == text
    monkeypatch.setenv("RELPOV_SEED", "5")
    assert call("ci", "--input", ln_file, "--method", "bootstrap", "--replicates", "200")[1] != \
        call("ci", "--input", ln_file, "--method", "bootstrap", "--replicates", "200", "--seed", "4")[1]


def test_bad_seed_environment(ln_file, monkeypatch):
    monkeypatch.setenv("RELPOV_SEED", "abc")
    assert call("estimate", "--input", ln_file)[0] == 2


def test_ci_compare(ln_file):
    code, text = call("ci", "--input", ln_file, "--compare", ln_file, "--method", "wald2")
    rec = records(text)[0]
    assert code == 0 and rec["quantity"] == "difference" and rec["point"] == 0.0
    assert call("ci", "--input", ln_file, "--compare", ln_file, "--method", "cp")[0] == 1


def test_grouped_gld_fixture():
    code, text = call("grouped", "--input", fixture_path("au_income_2014.csv"))
    rec = records(text)[0]
    assert code == 0 and rec["method"] == "gld" and rec["bins"] == 29
    assert rec["h_hat"] == pytest.approx(0.1096, abs=5e-4)


def test_grouped_li_without_means_is_domain_error(capsys):
    code, _ = call("grouped", "--input", fixture_path("au_income_2014.csv"), "--method", "li")
    assert code == 1
    assert "GLD" in capsys.readouterr().err


def test_grouped_li_with_bootstrap(write_lines):
    rows = ["lower,upper,count,mean", "0,1,20,0.6", "1,2,30,1.5", "2,4,30,2.8", "4,,20,6"]
    code, text = call("grouped", "--input", write_lines(rows, "g.csv"), "--method", "li",
                      "--bootstrap", "60", "--seed", "2")
    rec = records(text)[0]
    assert code == 0 and rec["tail_theta"] == 2.0
    assert rec["lower"] <= rec["h_hat"] <= rec["upper"]


def test_malformed_rows_reported(write_lines, capsys):
    path = write_lines(["1.5", "abc", "-2", "4"], "bad.txt")
    assert call("estimate", "--input", path)[0] == 2
    assert "2, 3" in capsys.readouterr().err


def test_missing_file_and_usage():
    assert call("estimate", "--input", "/nonexistent/file.txt")[0] == 2
    assert call("estimate")[0] == 2
    assert call("estimate", "--input", "x", "--p", "1.5")[0] == 2
    assert call("nosuch")[0] == 2
    assert call("--help")[0] == 0


def test_transfer_command():
    code, text = call("transfer", "--model", "lognormal(0, 1)", "--simulate", "2000")
    rec = records(text)[0]
    assert code == 0
    assert rec["rate"] == pytest.approx(0.04194, abs=1e-5)
    assert rec["budget_rate_weighted"] == pytest.approx(0.05119, abs=1e-5)
    assert rec["post_strict_below_line"] == 0.0
    assert call("transfer", "--model", "lognormal(0, 1)", "--cutoff-quantile", "0.4")[0] == 1
    assert call("transfer", "--model", "bogus(1)")[0] in (1, 2)


def test_reconstruct_command(tmp_path):
    out = tmp_path / "rec.txt"
    code, text = call("reconstruct", "--input", fixture_path("au_income_2014.csv"), "--scale", "10",
                      "--bootstrap", "50", "--output", out)
    rec = records(text)[0]
    assert code == 0 and rec["n"] == 226791
    assert abs(rec["h_hat"] - 0.110) < 0.005
    assert rec["bootstrap_se"] > 0
    assert len(out.read_text().splitlines()) == rec["n"]


def test_study_command(tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text('kind = "coverage"\nreplications = 5\nmethods = ["wald2"]\n'
                   'sample_sizes = [40]\ndistribution_names = ["LN", "EXP"]\n')
    csv_out = tmp_path / "s.csv"
    code, text = call("study", "--config", cfg, "--output", csv_out)
    assert code == 0 and text.startswith("method")
    assert len(csv_out.read_text().splitlines()) == 3
    code, text = call("study", "--config", cfg, "--format", "json", "--replications", "3")
    recs = records(text)
    assert code == 0 and {r["replications"] for r in recs} == {3}
    assert call("study", "--config", tmp_path / "none.toml")[0] == 1


def test_json_schema_round_trip():
    buf = io.StringIO()
    emit([{"a": 1.23456789, "b": float("nan"), "c": True, "d": np.float64(2.0)}], "json", buf)
    back = json.loads(buf.getvalue())
    assert back == {"a": 1.23457, "b": None, "c": True, "d": 2.0}
    buf = io.StringIO()
    emit([{"a": 1.0, "b": float("nan")}], "text", buf)
    assert buf.getvalue().split() == ["a", "1", "b", "nan"]


def test_console_entry_point(small_file):
    proc = subprocess.run([sys.executable, "-m", "relpov.cli", "estimate", "--input", str(small_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["h_hat"] == 0.2
