import csv
import io
import json
import math
import subprocess
import sys

import pytest

from qkdbound import cli
from qkdbound.asymptotics import solve_delta
from qkdbound.oracles import AuditReport


def call(*argv):
    buf = io.StringIO()
    code = cli.main(list(argv), buf)
    return code, buf.getvalue()


def call_json(*argv):
    code, text = call(*argv, "--format", "json")
    assert code == 0, text
    return json.loads(text)


class TestBound:
    def test_normal_companion(self):
        rec = call_json("bound", "--n", "10000", "--l", "1000", "--R", "0.5", "--k", "75", "--delta", "0.01")
        assert rec["normal_approximation"] == pytest.approx(0.126, abs=5e-4)
        for key in ("total_bound", "per_bit_bound", "term1", "term2", "max_mass", "argmax_j_term1", "argmax_j_term2"):
            assert key in rec
        assert rec["total_bound"] == pytest.approx(rec["term1"] + rec["term2"], rel=1e-15)

    def test_delta_from_eps(self):
        rec = call_json("bound", "--n", "10000", "--l", "20000", "--R", "0.5", "--k", "1500",
                        "--delta-from-eps", "0.001")
        assert rec["delta"] == pytest.approx(solve_delta(10000, 20000, 1500, 0.001), rel=1e-15)
        assert rec["roundtrip_eps"] == pytest.approx(0.001, rel=1e-9)

    def test_delta_table(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("# k delta\n70 0.01\n71, 0.01\n72 0.01\n")
        a = call_json("bound", "--n", "5000", "--l", "1000", "--R", "0.6", "--k-low", "70", "--k-high", "72",
                      "--delta-table", str(path))
        b = call_json("bound", "--n", "5000", "--l", "1000", "--R", "0.6", "--k-low", "70", "--k-high", "72",
                      "--delta", "0.01")
        assert a["total_bound"] == b["total_bound"]

    def test_missing_rate_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["bound", "--n", "100", "--l", "100", "--k", "5", "--delta", "0.01"])
        assert exc.value.code == 2
        assert "--R" in capsys.readouterr().err

    def test_missing_thresholds_is_usage_error(self):
        code, _ = call("bound", "--n", "100", "--l", "100", "--R", "0.5", "--delta", "0.01")
        assert code == 2

    def test_negative_key_length_is_precondition(self, capsys):
        code, out = call("bound", "--n", "100", "--l", "100", "--R", "0.1", "--k-low", "0", "--k-high", "20",
                         "--delta", "0.01")
        assert code == 3 and out == ""
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ConfigurationError" and "negative" in err["message"]

    def test_text_rounding(self):
        code, text = call("bound", "--n", "10000", "--l", "1000", "--R", "0.5", "--k", "75", "--delta", "0.01")
        assert code == 0
        line = next(ln for ln in text.splitlines() if ln.startswith("normal_approximation"))
        assert line.split()[-1] == "0.126161"
        code, text = call("bound", "--n", "10000", "--l", "1000", "--R", "0.5", "--k", "75", "--delta", "0.01",
                          "--digits", "3")
        line = next(ln for ln in text.splitlines() if ln.startswith("normal_approximation"))
        assert line.split()[-1] == "0.126"


class TestTable:
    def test_default_csv(self):
        code, text = call("table")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(text)))
        assert list(rows[0]) == ["l", "statistic", "phi", "erratum", "printed_statistic"]
        by_l = {int(r["l"]): r for r in rows}
        assert float(by_l[1000]["statistic"]) == pytest.approx(-1.14, abs=0.005)
        assert float(by_l[1000]["phi"]) == pytest.approx(0.126, abs=0.002)
        assert float(by_l[50000]["phi"]) == pytest.approx(0.000264, abs=2e-6)
        assert by_l[40000]["erratum"] == "true" and float(by_l[40000]["printed_statistic"]) == -4.0
        assert float(by_l[40000]["statistic"]) == pytest.approx(-3.40, abs=0.005)
        assert sum(r["erratum"] == "true" for r in rows) == 1

    def test_json_full_precision(self):
        rows = call_json("table")
        assert len(rows) == 6
        assert rows[2]["phi"] == pytest.approx(0.000968, abs=2e-6)
        # JSON keeps every digit; CSV rounds to six significant digits
        assert len(repr(rows[0]["statistic"])) > 10

    def test_custom_rows_have_no_erratum(self):
        rows = call_json("table", "--n", "5000", "--l", "40000")
        assert rows[0]["erratum"] is False and rows[0]["printed_statistic"] is None


class TestOtherCommands:
    def test_solve_delta(self):
        rec = call_json("solve-delta", "--n", "10000", "--l", "20000", "--k", "1500", "--eps", "0.000968")
        assert rec["delta"] == pytest.approx(0.01, abs=1e-4)
        assert rec["roundtrip_eps"] == pytest.approx(0.000968, rel=1e-9)

    def test_exponent(self):
        rec = call_json("exponent", "--p-low", "0.05", "--eps", "0.01")
        assert rec["exponent"] == pytest.approx(3.4742e-4, rel=1e-4)
        assert rec["quadratic_approximation"] > 0

    def test_compare(self):
        rows = call_json("compare", "--p", "0.05", "--n", "1000", "10000")
        assert [r["n"] for r in rows] == [1000, 10000]
        assert all(r["better"] for r in rows)

    def test_domain_error_exit(self):
        code, _ = call("exponent", "--p-low", "0.45", "--p-high", "0.49", "--eps", "0.05")
        assert code == 3


class TestSimulate:
    def test_noiseless(self, tmp_path):
        path = tmp_path / "t.jsonl"
        rec = call_json("simulate", "--runs", "20", "--seed", "3", "--transcripts", str(path))
        assert rec["runs"] == 20 and rec["agreement_rate"] == 1.0 and rec["abort_rate"] == 0.0
        lines = path.read_text().splitlines()
        assert len(lines) == 20 and json.loads(lines[0])["agree"] is True

    def test_reproducible(self):
        args = ("simulate", "--runs", "30", "--p-bit", "0.02", "--p-phase", "0.02", "--seed", "5")
        assert call(*args) == call(*args)
        assert call(*args)[1] != call("simulate", "--runs", "30", "--p-bit", "0.02", "--p-phase", "0.02",
                                      "--seed", "6")[1]

    def test_seed_env(self, monkeypatch):
        args = ("simulate", "--runs", "30", "--p-bit", "0.05", "--p-phase", "0.05", "--format", "json")
        monkeypatch.setenv(cli.SEED_ENV, "9")
        from_env = call(*args)
        assert from_env == call(*args[:-2], "--seed", "9", "--format", "json")
        monkeypatch.delenv(cli.SEED_ENV)
        assert call(*args) == call(*args[:-2], "--seed", "0", "--format", "json")

    def test_modified(self):
        rec = call_json("simulate", "--runs", "4", "--repeat-a", "3", "--seed", "1")
        assert rec["runs"] == 12

    def test_code_file(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("1000110\n0100101\n0010011\n0001111\n")
        rec = call_json("simulate", "--n-plus", "7", "--l-times", "20", "--code", str(path), "--runs", "5")
        assert rec["agreement_rate"] == 1.0

    def test_bad_sizes(self):
        assert call("simulate", "--n-plus", "8")[0] == 2
        assert call("simulate", "--n-plus", "7", "--code", "/nonexistent/file")[0] == 3


class TestOracleCheck:
    def test_lemma1(self):
        rec = call_json("oracle-check", "--lemma", "1", "--n", "2", "--trials", "1000", "--seed", "7")
        assert rec["status"] == "PASS" and rec["instances"] == 1000 and rec["min_slack"] >= -1e-12

    def test_lemma7_uniform(self):
        rec = call_json("oracle-check", "--lemma", "7", "--d", "4", "--uniform")
        assert rec["equality"] is True and abs(rec["min_slack"]) < 1e-12

    def test_lemma2_exhaustive(self):
        rec = call_json("oracle-check", "--lemma", "2", "--n", "4", "--t", "0", "--s", "1",
                        "--channel", "bsc:0.2", "--exhaustive")
        assert rec["status"] == "PASS"
        (row,) = rec["results"]
        assert row["exact"] and row["ensemble_size"] == 15 and row["average"] <= row["bound"]

    def test_guard_is_precondition(self):
        assert call("oracle-check", "--lemma", "1", "--n", "13", "--trials", "1")[0] == 3
        assert call("oracle-check", "--lemma", "2", "--n", "13", "--s", "1")[0] == 3

    def test_audit_failure_exit(self, monkeypatch):
        monkeypatch.setattr(cli, "audit_lemma7", lambda *a, **k: AuditReport(7, 1, 1, -0.5))
        code, text = call("oracle-check", "--lemma", "7", "--format", "json")
        assert code == 4 and json.loads(text)["status"] == "FAIL"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qkdbound", "table", "--format", "json"],
                         capture_output=True, text=True, check=True)
    rows = json.loads(res.stdout)
    assert math.isclose(rows[0]["phi"], 0.126, abs_tol=2e-3)


def test_usage_without_command():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2
