import json

import numpy as np
import pytest

from boxprop.cli import main
from boxprop.factorgraph import parse_fg, write_fg
from helpers import graph_from, random_tree_graph, triangle_graph


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def triangle_file(tmp_path):
    path = tmp_path / "example2.fg"
    path.write_text(write_fg(triangle_graph()))
    return str(path)


def test_gen_then_bound_end_to_end(tmp_path, capsys):
    fg = tmp_path / "g.fg"
    out = tmp_path / "b.txt"
    code, _, err = run(
        capsys, "gen", "grid", "--rows", "5", "--cols", "5", "--domain", "2",
        "--beta", "1.0", "--seed", "42", "--out", str(fg),
    )
    assert code == 0
    assert "# boxprop gen grid" in err
    g = parse_fg(fg.read_text())
    assert g.num_variables == 25

    code, _, _ = run(
        capsys, "bound", "--method", "sawtree", "--max-nodes", "500",
        "--in", str(fg), "--out", str(out),
    )
    assert code == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 25
    assert all(r["method"] == "sawtree" for r in records)
    assert all(len(r["lower"]) == 2 for r in records)


def test_bound_prints_example_two_box(triangle_file, capsys):
    code, out, err = run(
        capsys, "bound", "--method", "subtree", "--in", triangle_file, "--root", "0",
    )
    assert code == 0
    rec = json.loads(out.splitlines()[0])
    assert np.allclose(rec["lower"], [2 / 7, 2 / 7], atol=1e-12)
    assert np.allclose(rec["upper"], [5 / 7, 5 / 7], atol=1e-12)
    assert "# boxprop bound" in err


def test_validate_ok(triangle_file, capsys):
    code, out, _ = run(capsys, "validate", "--in", triangle_file)
    assert code == 0
    assert out.strip() == "ok"


def test_validate_reports_violations(tmp_path, capsys):
    g = graph_from(
        [
            ((0, 1), (2, 2), (1.0, 2.0, 0.0, 0.0)),
            ((0,), (2,), (1.0, 1.0)),
            ((1,), (2,), (1.0, 1.0)),
        ]
    )
    path = tmp_path / "bad.fg"
    path.write_text(write_fg(g))
    code, out, _ = run(capsys, "validate", "--in", str(path))
    assert code == 2
    assert "factor 0" in out


def test_bound_refuses_invalid_graph(tmp_path, capsys):
    g = graph_from([((0,), (2,), (1.0, 1.0)), ((1,), (2,), (1.0, 1.0))])
    path = tmp_path / "disc.fg"
    path.write_text(write_fg(g))
    code, _, err = run(capsys, "bound", "--method", "subtree", "--in", str(path))
    assert code == 2
    assert "disconnected" in err


def test_exact_brute_capacity_is_exit_2(tmp_path, capsys):
    rng = np.random.default_rng(1)
    g = random_tree_graph(rng, 30, max_domain=2)
    path = tmp_path / "big.fg"
    path.write_text(write_fg(g))
    code, _, err = run(capsys, "exact", "--engine", "brute", "--in", str(path))
    assert code == 2
    assert "error:" in err


def test_exact_varelim_on_triangle(triangle_file, capsys):
    code, out, _ = run(capsys, "exact", "--engine", "varelim", "--in", triangle_file)
    assert code == 0
    rec = json.loads(out.splitlines()[0])
    assert np.allclose(rec["marginal"], [0.5, 0.5], atol=1e-12)


def test_bp_smoke(triangle_file, capsys):
    code, out, _ = run(capsys, "bp", "--in", triangle_file)
    assert code == 0
    header = json.loads(out.splitlines()[0])
    assert header["converged"] is True


def test_compare_writes_files(triangle_file, tmp_path, capsys):
    summary = tmp_path / "summary.csv"
    details = tmp_path / "details.jsonl"
    profiles = tmp_path / "profiles.csv"
    code, _, _ = run(
        capsys, "compare", "--in", triangle_file, "--bp",
        "--summary-out", str(summary), "--details-out", str(details),
        "--profiles-out", str(profiles),
    )
    assert code == 0
    lines = summary.read_text().splitlines()
    assert lines[0] == "variable,method,gap,time_ms"
    assert len(lines) == 1 + 3 * 3  # bp, sawtree, subtree rows for 3 variables
    detail = [json.loads(l) for l in details.read_text().splitlines()]
    assert len(detail) == 6
    assert profiles.read_text().splitlines()[0] == "method,rank,gap"


def test_compare_prints_summary_to_stdout(triangle_file, capsys):
    code, out, _ = run(capsys, "compare", "--in", triangle_file, "--methods", "subtree")
    assert code == 0
    assert out.splitlines()[0] == "variable,method,gap,time_ms"


def test_usage_errors_exit_1(capsys, tmp_path):
    code, _, _ = run(capsys, "bound", "--method", "bogus", "--in", "nope.fg")
    assert code == 1
    code, _, _ = run(capsys, "frobnicate")
    assert code == 1
    code, _, _ = run(capsys, "bound", "--method", "subtree", "--in", str(tmp_path / "missing.fg"))
    assert code == 1  # unreadable path is a usage-level failure


def test_malformed_file_exit_2(tmp_path, capsys):
    path = tmp_path / "broken.fg"
    path.write_text("not a number\n")
    code, _, err = run(capsys, "validate", "--in", str(path))
    assert code == 2
    assert "line 1" in err


def test_help_exits_zero(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0
    assert "bound" in out and "compare" in out
