import json
import shutil
import subprocess
import sys
from decimal import Decimal

import numpy as np
import pytest

from flagcalc.cli import main
from flagcalc.cli.config import (EXIT_BUDGET, EXIT_CONFIG, EXIT_CONSTRAINT, EXIT_OK, execute,
                                 run_config)
from flagcalc.cli.dsl import (DSLStructureError, DSLSyntaxError, parse_forest, parse_tree,
                              print_tree, tree_from_json, tree_to_json)
from flagcalc.flagtree import Leaf

from helpers import BI_PARAM_EXPR


def _random_tree_text(rng, N, depth, counter):
    """A random expression; ``depth`` bounds the nesting of D/J."""
    if depth == 0 or rng.random() < 0.3:
        counter[0] += 1
        return f"f{counter[0]}"
    kids = [_random_tree_text(rng, N, depth - 1, counter) for _ in range(int(rng.integers(2, 4)))]
    orders = ",".join(str(Decimal(int(rng.integers(0, 300))) / 100) for _ in range(N))
    op = "J" if rng.random() < 0.2 else "D"
    return f"{op}[{orders}](" + "*".join(kids) + ")"


def _corpus(size=200):
    rng = np.random.default_rng(2024)
    out = []
    while len(out) < size:
        N = int(rng.integers(1, 4))
        depth = 4 if len(out) % 4 == 0 else int(rng.integers(1, 4))
        text = _random_tree_text(rng, N, depth, [0])
        if text.startswith(("D", "J")):
            out.append((text, N))
    return out


def _depth(v):
    return 0 if isinstance(v, Leaf) else 1 + max(_depth(c) for c in v.children)


def test_round_trip_corpus():
    corpus = _corpus()
    assert len(corpus) == 200
    deep = 0
    for text, N in corpus:
        tree = parse_tree(text, N)
        printed = print_tree(tree)
        again = parse_tree(printed, N)
        assert print_tree(again) == printed
        assert tree_to_json(again) == tree_to_json(tree)
        assert tree_from_json(json.loads(json.dumps(tree_to_json(tree)))).n == tree.n
        deep += _depth(tree.root) >= 4
    assert deep >= 20


def test_canonical_examples():
    tree = parse_tree(BI_PARAM_EXPR)
    assert tree.n == 5 and tree.parameters == 2
    assert print_tree(tree) == "D[0.5,1](D[0.3,0.2](f1*f2)*f3*D[0.7,0.1](f4*f5))"
    t = parse_tree("D[1](f1*f2)")
    assert t.n == 2 and _depth(t.root) == 1
    spaced = parse_tree("  D [ 0.5 , 1.0 ] ( D[0.3,0.2]( f1 * f2 ) * f3*D[0.7,0.1](f4*f5) ) ")
    assert print_tree(spaced) == print_tree(tree)
    bare = parse_tree("D[1](f1*f2)*f3", 1)
    assert bare.root.orders == (Decimal(0),)
    j = parse_tree("J[2](f1*f2)")
    assert j.root.kind == "J"


@pytest.mark.parametrize("text,N,cls,offset,fragment", [
    ("D[0.5](f1*f1)", None, DSLStructureError, 10, "duplicate leaf f1"),
    ("D[0.5](f1*f3)", None, DSLStructureError, 13, "missing f2"),
    ("D[0.5,1](f1*f2)", 1, DSLStructureError, 0, "expected 1"),
    ("D[0.5](f1)", None, DSLStructureError, 0, "at least two"),
    ("D[-1](f1*f2)", None, DSLSyntaxError, 2, "nonnegative decimal"),
    ("D[1](f1*f2", None, DSLSyntaxError, 10, "expected ')'"),
    ("D[1](f1*g2)", None, DSLSyntaxError, 8, "leaf or D"),
    ("D[1](f1*f2))", None, DSLSyntaxError, 11, "unexpected"),
    ("f1", None, DSLStructureError, 0, "single leaf"),
    ("f1*f2", None, DSLStructureError, 0, "parameter count"),
    ("D[1](fé*f2)", None, DSLSyntaxError, 6, "leaf index"),
    ("D[1](f1*f2)*é", 1, DSLSyntaxError, 12, "found 'é'"),
])
def test_errors_carry_byte_offsets(text, N, cls, offset, fragment):
    with pytest.raises(cls) as info:
        parse_tree(text, N)
    assert info.value.offset == offset
    assert fragment in str(info.value)


def test_forest():
    forest = parse_forest(["D[0.5](D[0.3](f1*f2)*f3)", "D[0.2](f1*D[0.4](f2*f3))"])
    assert forest.parameters == 2 and forest.n == 3


# ---------------------------------------------------------------------------
# configs and exit codes

def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if not isinstance(cfg, str) else cfg)
    return path


def test_terms_config(tmp_path, capsys):
    cfg = {"tree": BI_PARAM_EXPR, "exponents": 5, "experiment": "terms"}
    path = _write(tmp_path, "terms.json", cfg)
    assert run_config(path) == EXIT_OK
    out = tmp_path / "terms-out"
    rows = (out / "terms.csv").read_text().split("\n")
    assert rows[0] == "index,term,latex"
    assert len([r for r in rows[1:] if r]) == 144
    assert json.loads((out / "summary.json").read_text())["terms"] == 144
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[-145] == "PASS"
    assert all(line.startswith("\\|") for line in lines[-144:])


def test_constraint_failure_exit(tmp_path, capsys):
    cfg = {"tree": "D[0.5](f1*f2)", "exponents": [1, 1], "experiment": "check"}
    assert run_config(_write(tmp_path, "bad.json", cfg)) == EXIT_CONSTRAINT
    out = capsys.readouterr().out
    assert "FAIL" in out
    report = json.loads((tmp_path / "bad-out" / "check.json").read_text())
    assert report["passed"] is False and report["violations"]


def test_config_errors(tmp_path):
    assert run_config(_write(tmp_path, "broken.json", "{not json")) == EXIT_CONFIG
    assert run_config(tmp_path / "absent.json") == EXIT_CONFIG
    assert run_config(_write(tmp_path, "dup.json", {"tree": "D[1](f1*f1)", "exponents": 4})) == EXIT_CONFIG
    assert run_config(_write(tmp_path, "name.json", {"tree": "D[1](f1*f2)", "exponents": 4,
                                                      "experiment": "nope"})) == EXIT_CONFIG
    assert run_config(_write(tmp_path, "p.json", {"tree": "D[1](f1*f2)", "exponents": 0.5})) == EXIT_CONFIG


def test_budget_exit(tmp_path):
    cfg = {"tree": "D[1](f1*f2*f3)", "exponents": 4, "grid": 64, "budget": 100,
           "experiment": {"name": "leibniz", "trials": 1}}
    assert run_config(_write(tmp_path, "grid.json", cfg)) == EXIT_BUDGET
    cfg = {"symbol": {"name": "mikhlin_test", "beta": [1.0], "n": 3}, "exponents": 4, "grid": 64,
           "experiment": {"name": "leibniz", "trials": 1, "budget": 1000}}
    assert run_config(_write(tmp_path, "oracle.json", cfg)) == EXIT_BUDGET


def test_reruns_are_byte_identical(tmp_path):
    cfg = {"tree": "D[0.5](D[0.3](f1*f2)*f3)", "exponents": 4, "grid": 16,
           "experiment": {"name": "leibniz", "trials": 12, "seed": 7}}
    path = _write(tmp_path, "ratio.json", cfg)
    assert run_config(path, out=tmp_path / "a") == EXIT_OK
    assert run_config(path, out=tmp_path / "b") == EXIT_OK
    a = (tmp_path / "a" / "ratios.csv").read_bytes()
    assert a == (tmp_path / "b" / "ratios.csv").read_bytes()
    assert b"\r" not in a and a.startswith(b"trial,seed,lhs,rhs,ratio\n")
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert len(summary["config_hash"]) == 64
    assert {"max", "p50", "p95"} <= set(summary)
    assert run_config(path, out=tmp_path / "c", seed=8) == EXIT_OK
    assert (tmp_path / "c" / "ratios.csv").read_bytes() != a


def test_other_experiments(tmp_path):
    base = {"tree": "D[0.5,0.5](f1*f2)", "exponents": 4, "grid": [16, 16]}
    assert execute({**base, "experiment": {"name": "scaling", "profile": "block",
                                           "scales": [1, 1]}}, out=tmp_path / "s") == EXIT_OK
    assert (tmp_path / "s" / "scaling.csv").read_text().startswith("m,lhs_factor")
    assert execute({**base, "experiment": "eval"}, out=tmp_path / "e") == EXIT_OK
    assert (tmp_path / "e" / "output.bin").stat().st_size == 12 + 32 * 32 * 8
    smooth = {"symbol": {"name": "fractional_integral", "nu": [0.5], "n": 2}, "exponents": 2,
              "grid": 16, "experiment": {"name": "smoothing", "smoothing": 0.25, "trials": 5}}
    assert execute(smooth, out=tmp_path / "m") == EXIT_OK
    lemma = {"experiment": {"name": "lemma", "alpha": 0.5, "grid": [32], "trials": 1}}
    assert execute(lemma, out=tmp_path / "l") == EXIT_OK
    assert len((tmp_path / "l" / "lemma.csv").read_text().strip().split("\n")) == 5
    decay = {"experiment": {"name": "decay", "symbol": "diagonal", "truncation": 32}}
    assert execute(decay, out=tmp_path / "d") == EXIT_OK
    assert len((tmp_path / "d" / "coefficients.csv").read_text().strip().split("\n")) == 66


# ---------------------------------------------------------------------------
# command line

def test_terms_command(capsys):
    assert main(["terms", "D[1](f1*f2)"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 2
    assert all("D^{1}" in line for line in lines)


def test_check_command(capsys):
    # "1,1" is one input with two parameters: a shape error, not a constraint failure
    assert main(["check", "D[0.5](f1*f2)", "--exponents", "1,1"]) == EXIT_CONFIG
    capsys.readouterr()
    assert main(["check", "D[0.5](f1*f2)", "--exponents", "1;1"]) == EXIT_CONSTRAINT
    out = capsys.readouterr().out
    assert out.strip().endswith("FAIL")
    assert main(["check", "D[0.5](f1*f2)", "--exponents", "1;1", "--latex"]) == EXIT_CONSTRAINT
    assert "\\frac{1}{p_{1}^{1}}" in capsys.readouterr().out
    assert main(["check", "D[0.5](f1*f2)", "--exponents", "4"]) == EXIT_OK


def test_verify_and_decay_commands(tmp_path, capsys):
    assert main(["verify", "D[1](f1*f2)", "--exponents", "2", "--trials", "3", "--grid", "16",
                 "--seed", "5", "--out", str(tmp_path / "v")]) == EXIT_OK
    rows = (tmp_path / "v" / "ratios.csv").read_text().strip().split("\n")
    assert len(rows) == 4 and rows[1].split(",")[1] == "5"
    assert main(["decay", "--symbol", "diagonal", "--truncation", "16", "--out",
                 str(tmp_path / "d")]) == EXIT_OK
    assert main(["lemma", "--alpha", "0.5", "--grid", "32", "--trials", "1"]) == EXIT_OK
    assert main(["verify", "D[1](f1*f1)", "--exponents", "2"]) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        main(["verify", "--seed", "-1"])


@pytest.mark.skipif(shutil.which("flagcalc") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["flagcalc", "terms", "D[1](f1*f2)"], capture_output=True, text=True)
    assert res.returncode == 0 and len(res.stdout.strip().split("\n")) == 2
    res = subprocess.run([sys.executable, "-m", "flagcalc.cli", "check", "D[0.5](f1*f2)",
                          "--exponents", "1;1"], capture_output=True, text=True)
    assert res.returncode == 2
