import csv
import json

import pytest

from liereduce.cli import main

A41 = ["--ode", "y'''' = F(y''')", "--unknown", "F/1",
       "--sym", "X = d/dy", "--sym", "Y = x*d/dy", "--sym", "Z = x^2*d/dy", "--sym", "U = d/dx"]


def test_classify(capsys):
    code = main(["classify", "--ode", "y''' = -y''^3*f(y')", "--unknown", "f/1", "--sym", "d/dy", "--sym", "d/dx"])
    assert code == 0
    assert "Type I, family IB" in capsys.readouterr().out


def test_non_symmetry_exits_one(capsys):
    assert main(["reduce", "--ode", "y''' = y", "--sym", "x*d/dy"]) == 1
    assert "error" in capsys.readouterr().err


def test_parse_error_exits_two(capsys):
    assert main(["reduce", "--ode", "y''' = 2 x", "--sym", "d/dy"]) == 2
    assert "input error" in capsys.readouterr().err


def test_problem_file(tmp_path, capsys):
    f = tmp_path / "a41.txt"
    f.write_text("unknown F/1\node y'''' = F(y''')\nsym Z = x^2*d/dy\nsym X = d/dy\n")
    assert main(["reduce", "--input", str(f)]) == 0
    assert "y'''" in capsys.readouterr().out


def test_chain_trace_is_stable(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["chain", *A41, "--order", "Z,Y,X", "-o", str(a)]) == 0
    assert main(["chain", *A41, "--order", "Z,Y,X", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["terminal"]["order"] == 1 and len(doc["steps"]) == 3


def test_verify_writes_figures_and_csv(tmp_path, capsys):
    trace = tmp_path / "t.json"
    assert main(["chain", *A41, "--order", "Z,Y,X", "--no-detect", "-o", str(trace)]) == 0
    figs = tmp_path / "figs"
    code = main(["verify", str(trace), "--instantiate", "F(s) = s", "--interval", "1", "2",
                 "--figures", str(figs)])
    assert code == 0
    rows = list(csv.DictReader((figs / "summary.csv").open()))
    assert len(rows) == 4 and all(r["result"] == "PASS" for r in rows)
    assert len(list(figs.glob("*.png"))) == 4


def test_verify_needs_instantiation(tmp_path):
    trace = tmp_path / "t.json"
    main(["chain", *A41, "--order", "Z,Y,X", "--no-detect", "-o", str(trace)])
    assert main(["verify", str(trace)]) == 2


def test_paths_inline_table(capsys):
    table = "basis X, Y, Z, U; [Y,U] = X; [Z,U] = Y"
    assert main(["paths", "--table", table, "--json"]) == 0
    paths = json.loads(capsys.readouterr().out)
    assert len(paths) == 10
    marked = [p["reducers"] for p in paths if p["marked"]]
    assert marked == [["Z", "X", "Y"], ["Z", "Y", "X"]]


@pytest.mark.slow
def test_derive_families(capsys):
    assert main(["derive-families", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc) == 16
    assert sorted(d["family"] for d in doc if "rejected" in d) == ["IA", "IIA", "IIB", "IIIA", "IVA"]
