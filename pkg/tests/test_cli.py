import json
import subprocess
import sys

import pytest

from topoinfer.cli import main
from topoinfer.graph import NetworkGraph
from topoinfer.interference import InterferenceMatrix, interference_matrix
from topoinfer.topologies import three_router_tree, ladder_grid, ring_network


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def small_tree(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text(three_router_tree().to_text())
    f = tmp_path / "f.csv"
    assert run("fmatrix", "-g", g, "-o", f) == 0
    return g, f


def test_generate_is_valid_and_seeded(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert run("generate", "--n", 12, "--seed", 5, "-o", a) == 0
    assert run("generate", "--n", 12, "--seed", 5, "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()
    NetworkGraph.from_text(a.read_text()).validate()


def test_fmatrix_matches_library(small_tree):
    _, f = small_tree
    assert InterferenceMatrix.from_csv(f.read_text()) == interference_matrix(three_router_tree())


@pytest.mark.parametrize("algo", ["tree", "general"])
def test_recover_round_trip(small_tree, tmp_path, algo):
    _, f = small_tree
    out, diag = tmp_path / "r.txt", tmp_path / "d.json"
    assert run("recover", "--algo", algo, "-f", f, "-o", out, "--diagnostics", diag) == 0
    rec = NetworkGraph.from_text(out.read_text())
    assert interference_matrix(rec).hamming(interference_matrix(three_router_tree())) == 0
    assert isinstance(json.loads(diag.read_text()), dict)


def test_recover_domain_error_exit_code(tmp_path, capsys):
    f = tmp_path / "f.csv"
    f.write_text(interference_matrix(ring_network([1, 3, 5, 2, 4, 6])).to_csv())
    assert run("recover", "--algo", "tree", "-f", f) == 1
    assert "NotATree" in capsys.readouterr().err


def test_usage_error_exit_code(small_tree):
    _, f = small_tree
    with pytest.raises(SystemExit) as exc:
        run("recover", "--algo", "magic", "-f", f)
    assert exc.value.code == 2


def test_missing_file_exit_code(tmp_path):
    assert run("fmatrix", "-g", tmp_path / "missing.txt") == 1


def test_bounds_report(small_tree, tmp_path, capsys):
    g, f = small_tree
    cover = tmp_path / "c.json"
    assert run("bounds", "-f", f, "--exact", "-g", g, "--cover", cover) == 0
    out = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines())
    assert out["clique_cover"] == "18" and out["clique_cover_exact"] == "yes"
    assert out["lower_bound"] == "9"
    assert out["unique_intersection"] == "holds"
    assert json.loads(cover.read_text())["size"] == 18


def test_ilp_export_encode_and_verify(tmp_path, capsys):
    g = tmp_path / "grid.txt"
    g.write_text(ladder_grid().to_text())
    f, lp, sol = tmp_path / "f.csv", tmp_path / "m.lp", tmp_path / "sol.txt"
    assert run("fmatrix", "-g", g, "-o", f) == 0
    assert run("ilp-export", "-f", f, "--nodes", 12, "-o", lp, "--encode", g, "--solution-out", sol) == 0
    assert lp.read_text().startswith("\\")
    capsys.readouterr()
    assert run("verify", "-f", f, "-s", sol) == 0
    assert capsys.readouterr().out.startswith("feasible: yes")


def test_verify_infeasible_exit_code(small_tree, tmp_path, capsys):
    _, f = small_tree
    other = tmp_path / "other.txt"
    other.write_text(ring_network([1, 2, 3, 4, 5, 6, 7]).to_text())
    assert run("verify", "-f", f, "-g", other) == 1
    assert "feasible: no" in capsys.readouterr().out


def test_ilp_solve(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("overlay 3 underlay 1\n1 4\n2 4\n3 4\n")
    f, out, sol = tmp_path / "f.csv", tmp_path / "o.txt", tmp_path / "s.txt"
    assert run("fmatrix", "-g", g, "-o", f) == 0
    assert run("ilp-solve", "-f", f, "-o", out, "--solution-out", sol) == 0
    assert "optimum_edges: 3" in capsys.readouterr().out
    assert run("verify", "-f", f, "-s", sol) == 0


def test_evaluate(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("n = 8, 10\ntrials = 3\nseed = 1\n")
    out, summary = tmp_path / "r.csv", tmp_path / "s.csv"
    assert run("evaluate", "-c", cfg, "-o", out, "--summary", summary, "--no-timing") == 0
    assert len(out.read_text().splitlines()) == 7
    assert len(summary.read_text().splitlines()) == 3


def test_export_dot(small_tree, tmp_path):
    g, _ = small_tree
    out = tmp_path / "g.dot"
    assert run("export-dot", "-g", g, "-o", out) == 0
    assert out.read_text().startswith("graph G {")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "topoinfer.cli", "generate", "--n", "8", "--seed", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("overlay ")
