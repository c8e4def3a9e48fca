"""End-to-end scenarios combining checking and evaluation."""

import subprocess
import sys

from duckcheck.service import CheckRequest, RunRequest, check_source, run_source

TREE = """
type Tree[+A] { val: {v | v :: A}, l: {v | v :: Tree[A]}, r: {v | v :: Tree[A]} }

let rec size (t :: {v | v :: Tree[Int]}) :: Int =
  if t = null then 0 else 1 + size t["l"] + size t["r"]

let t2 = new Tree [Int] (5, new Tree [Int] (1, null, null), null)
let n :: Int = size t2
"""


class TestUserDatatypes:
    def test_two_field_recursive_datatype_checks_and_runs(self):
        assert check_source(CheckRequest(source=TREE)).status == "ok"
        res = run_source(RunRequest(source=TREE))
        assert res.status == "value"
        assert res.value == "2"

    def test_wrong_field_count_rejected(self):
        bad = TREE.replace('new Tree [Int] (1, null, null)',
                           'new Tree [Int] (1, null)')
        assert check_source(CheckRequest(source=bad)).status == "typeerror"


class TestPolymorphicRuntime:
    def test_map_checks_and_runs(self):
        src = open("corpus/map.dref").read() + """
let out = map [Int] [Int] (fun (n :: Int) -> 0 - n) (new List [Int] (3, new List [Int] (7, null)))
"""
        assert check_source(CheckRequest(source=src)).status == "ok"
        res = run_source(RunRequest(source=src))
        assert res.status == "value"
        assert res.value == "new List (-3, new List (-7, null))"

    def test_filter_checks_and_runs(self):
        src = open("corpus/filter.dref").read() + """
let keep (x :: Top) :: {v | Bool(v) /\\ (v = true => Int(x))} =
  tag x = "Int"
let mixed = new List [Top] (1, new List [Top] (true, new List [Top] (2, null)))
let out :: {v | v :: List[Int]} = filter [Top] [Int] keep mixed
"""
        assert check_source(CheckRequest(source=src)).status == "ok"
        res = run_source(RunRequest(source=src))
        assert res.status == "value"
        assert res.value == "new List (1, new List (2, null))"


class TestDeterminism:
    def test_identical_runs_identical_output(self):
        src = open("corpus/negate.dref").read()
        a = check_source(CheckRequest(source=src))
        b = check_source(CheckRequest(source=src))
        assert a.status == b.status == "ok"
        assert a.scheme == b.scheme
        assert a.stats.smt_queries == b.stats.smt_queries

    def test_explicit_solver_command(self, tmp_path):
        p = tmp_path / "x.dref"
        p.write_text("let r :: Int = 1 + 1\n")
        cmd = f"{sys.executable} -m duckcheck.minismt"
        r = subprocess.run(
            [sys.executable, "-m", "duckcheck.cli", "check", str(p),
             "--solver-cmd", cmd],
            capture_output=True, text=True, timeout=300)
        assert r.returncode == 0
