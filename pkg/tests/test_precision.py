"""Precision battery: acceptance/rejection pairs beyond the main corpus."""

import pytest

from duckcheck.service import CheckRequest, check_source

CASES = [
    # constructed types respect their parameters' variance
    ("typeerror", 'let xs :: {v | v :: List[Int]} = new List [Bool] (true, null)'),
    ("ok", 'type Cell[-A] { put: {v | v :: (x:A -> Int)} }\n'
           'let c = new Cell [Top] (fun x -> 0)\n'
           'let d :: {v | v :: Cell[Int]} = c'),
    ("typeerror", 'type Cell[-A] { put: {v | v :: (x:A -> Int)} }\n'
                  'let c = new Cell [Int] (fun (x :: Int) -> 0)\n'
                  'let d :: {v | v :: Cell[Top]} = c'),
    # checking a function against a goal constrains the body by the
    # goal's domain, and the annotation must cover it
    ("typeerror", 'let f :: x:Int -> Int = fun (x :: Bool) -> 0'),
    # polymorphic identity: only the variable itself has the bound type
    ("ok", 'let id :: forall A. {v | v :: (x:A -> A)} = fun x -> x'),
    ("typeerror", 'let id :: forall A. {v | v :: (x:A -> A)} = fun x -> 0'),
    ("ok", 'let id :: forall A. {v | v :: (x:A -> A)} = fun x -> x\n'
           'let r :: Int = id [Int] 5'),
    ("typeerror", 'let id :: forall A. {v | v :: (x:A -> A)} = fun x -> x\n'
                  'let r :: Bool = id [Int] 5'),
    # shadowing renames apart
    ("ok", 'let x = 1 let x = true let r :: Bool = x'),
    # equality is defined on all values and lands in the boolean-flag shape
    ("ok", 'let b :: Bool = {} = {}'),
    # singletons of every base sort
    ("ok", 'let s :: {v | v = "a"} = "a"'),
    ("typeerror", 'let s :: {v | v = "a"} = "b"'),
    ("ok", 'let n :: {v | v = 0 - 5} = 0 - 5'),
    # linear arithmetic flows through the increment
    ("ok", 'let f (x :: {v | Int(v) /\\ v = 3}) :: {v | v = 4} = x + 1'),
    ("typeerror", 'let f (x :: {v | Int(v) /\\ v = 3}) :: {v | v = 5} = x + 1'),
    # field reads need non-null evidence
    ("ok", 'let first (l :: {v | not (v = null) /\\ v :: List[Int]}) :: Int = l["hd"]'),
    ("typeerror", 'let first (l :: {v | v :: List[Int]}) :: Int = l["hd"]'),
    # dictionary field facts compose
    ("ok", 'let swap (d :: {v | Fld(v, "a", Int) /\\ Fld(v, "b", Int)}) :: Int '
           '= d["a"] + d["b"]'),
    # the conditional guard must be boolean
    ("typeerror", 'let r :: Int = if 3 then 1 else 2'),
    # primitives are first-class constants, and tag results are strings
    ("ok", 'let t = tag let r :: {v | v = "Int"} = t 3'),
    ("ok", 'let t = tag let r :: Str = t 3'),
]


@pytest.mark.parametrize("expected,source", CASES)
def test_precision(expected, source):
    res = check_source(CheckRequest(source=source))
    assert res.status == expected, (source, [d.message for d in res.diagnostics])
