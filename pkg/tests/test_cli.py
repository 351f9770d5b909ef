import json

import pytest

from amli.cli import format_table, main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_format_table_csv_and_md():
    rows = [dict(a=1, b=0.5, c=float("nan")), dict(a=2, b=-0.0, c=True)]
    csv = format_table(rows, ("a", "b", "c"), "csv", header=["h"], footer=["f"])
    assert csv.splitlines() == ["# h", "a,b,c", "1,0.5,", "2,0,true", "# f"]
    md = format_table(rows, ("a", "b", "c"), "md", header=["h"])
    assert md.splitlines()[0] == "<!-- h -->" and md.splitlines()[1].startswith("| a")
    with pytest.raises(ValueError):
        format_table(rows, ("a",), "xml")


def test_solve_flags(capsys):
    code, out = run(capsys, "solve", "--dim", "2", "--inv-h", "8", "--cycle", "v", "--no-timing")
    assert code == 0
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines[0].startswith("dim,inv_h,alpha")
    assert len(lines) == 2
    fields = lines[1].split(",")
    assert fields[-1] == ""  # blanked timing
    assert fields[2] == "1" and fields[8] == "V"


def test_solve_is_deterministic_without_timing(capsys):
    argv = ("solve", "--dim", "3", "--levels", "1", "--alpha", "1,1e-3", "--rhs", "ones", "--no-timing")
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_solve_json_config_and_md(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"dim": 2, "inv_h": [8], "methods": [["nonlinear", "additive", 2]]}))
    out_file = tmp_path / "t.md"
    code, _ = run(capsys, "solve", "--config", str(path), "--format", "md", "--out", str(out_file))
    text = out_file.read_text()
    rows = [l for l in text.splitlines() if l.startswith("|")]
    assert code == 0 and len(rows) == 3
    assert [c.strip() for c in rows[2].strip("|").split("|")][6:9] == ["nonlinear", "additive", "W"]


def test_solve_reports_nonconvergence(capsys):
    code, out = run(capsys, "solve", "--inv-h", "16", "--max-it", "2", "--no-timing")
    assert code == 0
    assert "# not converged within 2 iterations" in out


def test_solve_bad_input_exit_code(capsys):
    assert main(["solve", "--inv-h", "12"]) == 2


def test_theory_tables(capsys):
    code, out = run(capsys, "theory", "--e", "1", "--lmax", "2")
    assert code == 0
    data = [l for l in out.splitlines() if not l.startswith("#")]
    assert data[0].startswith("e,level,a,b,r") and len(data) == 4
    assert data[1].startswith("1,0,8,-5,-0.625")
    code, out = run(capsys, "theory", "--table", "condition", "--e", "1")
    assert code == 0 and "cond_ilu_B11_global" in out


def test_verify_subset_json(capsys):
    code, out = run(capsys, "verify", "--only", "kernel_dimensions,chebyshev_equivalence", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["passed"] and len(data["checks"]) == 2


def test_verify_detects_perturbation(capsys):
    code, out = run(capsys, "verify", "--only", "recursion_equivalence_2d", "--perturb", "1e-6")
    assert code == 1 and out.startswith("FAIL")


def test_verify_unknown_check():
    with pytest.raises(SystemExit):
        main(["verify", "--only", "nonsense"])
