"""CLI exit codes and output formats."""

import json
import subprocess
import sys

import pytest

GOOD = 'let negate (x :: IorB) :: IorB = if tag x = "Int" then 0 - x else not x\n'
BAD = "let negate (x :: IorB) :: IorB = 0 - x\n"


def run_cli(*args, timeout=300):
    return subprocess.run([sys.executable, "-m", "duckcheck.cli", *args],
                          capture_output=True, text=True, timeout=timeout)


@pytest.fixture()
def good_file(tmp_path):
    p = tmp_path / "good.dref"
    p.write_text(GOOD)
    return str(p)


@pytest.fixture()
def bad_file(tmp_path):
    p = tmp_path / "bad.dref"
    p.write_text(BAD)
    return str(p)


class TestCheck:
    def test_ok_prints_scheme(self, good_file):
        r = run_cli("check", good_file)
        assert r.returncode == 0
        assert "->" in r.stdout

    def test_negate_prints_dependent_signature(self):
        r = run_cli("check", "corpus/negate.dref")
        assert r.returncode == 0
        assert "tag(v) = tag(x)" in r.stdout

    def test_type_error_exit_1(self, bad_file):
        r = run_cli("check", bad_file)
        assert r.returncode == 1
        assert "[" in r.stderr  # rule name in diagnostics

    def test_missing_file_exit_2(self):
        r = run_cli("check", "/nonexistent/file.dref")
        assert r.returncode == 2

    def test_json_schema(self, good_file):
        r = run_cli("check", good_file, "--json")
        body = json.loads(r.stdout)
        assert set(body) >= {"file", "status", "scheme", "diagnostics", "stats"}
        assert body["status"] == "ok"
        assert set(body["stats"]) == {"smt_queries", "wall_ms"}

    def test_json_schema_on_mutants(self, tmp_path):
        import glob
        for path in sorted(glob.glob("corpus-mutants/*.dref"))[:3]:
            r = run_cli("check", path, "--json")
            body = json.loads(r.stdout)
            assert body["status"] == "typeerror"
            assert body["diagnostics"][0]["rule"]

    def test_smt_log_round_trip(self, good_file, tmp_path):
        d = tmp_path / "logs"
        r = run_cli("check", good_file, "--smt-log", str(d))
        assert r.returncode == 0
        files = list(d.iterdir())
        assert files and files[0].stat().st_size > 0

    def test_strict_elim_flag_accepted(self, good_file):
        r = run_cli("check", good_file, "--strict-elim")
        assert r.returncode == 0


class TestRun:
    def test_value_exit_0(self, tmp_path):
        p = tmp_path / "v.dref"
        p.write_text("let r = 40 + 2\n")
        r = run_cli("run", str(p))
        assert r.returncode == 0
        assert r.stdout.strip() == "42"

    def test_type_error_exit_1(self, bad_file):
        r = run_cli("run", bad_file)
        assert r.returncode == 1

    def test_stuck_exit_3_with_no_check(self, tmp_path):
        p = tmp_path / "s.dref"
        p.write_text('let r = get 3 "x"\n')
        r = run_cli("run", str(p), "--no-check")
        assert r.returncode == 3

    def test_fuel_exit_4(self, tmp_path):
        p = tmp_path / "d.dref"
        p.write_text("let rec loop (x :: Int) :: Int = loop x let r = loop 0\n")
        r = run_cli("run", str(p), "--fuel", "500")
        assert r.returncode == 4

    def test_trace_goes_to_stderr(self, tmp_path):
        p = tmp_path / "t.dref"
        p.write_text("let r = 1 + 1\n")
        r = run_cli("run", str(p), "--trace")
        assert r.returncode == 0
        assert r.stderr.count("\n") >= 2


class TestCorpus:
    def test_empty_dir_trivially_ok(self, tmp_path):
        r = run_cli("corpus", str(tmp_path))
        assert r.returncode == 0

    def test_mismatch_nonzero(self, tmp_path):
        p = tmp_path / "x.dref"
        p.write_text("-- expect: typeerror\nlet x = 3\n")
        r = run_cli("corpus", str(tmp_path))
        assert r.returncode == 1

    def test_json_report(self, tmp_path):
        p = tmp_path / "x.dref"
        p.write_text("-- expect: ok\nlet x = 3\n")
        r = run_cli("corpus", str(tmp_path), "--json")
        body = json.loads(r.stdout)
        assert body["passed"] == 1
        entry = body["entries"][0]
        assert set(entry) >= {"file", "expected", "status", "ok", "wall_ms",
                              "smt_queries"}
