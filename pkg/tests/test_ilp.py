import io

import numpy as np
import pytest

from topoinfer import bounds, errors, ilp
from topoinfer.graph import RecoveredGraph, build_network
from topoinfer.interference import interference_matrix
from topoinfer.topologies import three_router_tree, ladder_grid, random_minimal_tree, ring_network, star_network


def _expected_counts(f, n):
    """Variable and constraint counts derived from the model's index sets."""
    L, k = f.size, len(f.overlays)
    arcs = n * (n - 1)
    off = np.triu(f.off_diagonal(), 1)
    inter = int(off.sum())
    quiet = L * (L - 1) // 2 - inter
    variables = L * arcs + arcs // 2 + L * n + inter * arcs
    tags = {
        ilp.EDGE_OR: (arcs // 2) * (2 * L + 1),
        ilp.OVERLAY_DEGREE: k + k * (k - 1) // 2,
        ilp.FLOW: L * n,
        ilp.MTZ: L * arcs,
        ilp.NO_SHARE: quiet * arcs,
        ilp.MUST_SHARE: inter * (3 * arcs + 1),
    }
    return variables, tags


@pytest.mark.parametrize("g,n", [(star_network(3), None), (three_router_tree(), 9), (ladder_grid(), 12)])
def test_model_size(g, n):
    f = interference_matrix(g)
    model = ilp.build_ilp_model(f, node_budget=n)
    nvars, tags = _expected_counts(f, model.node_budget)
    assert len(model.variables) == nvars
    assert model.counts_by_tag() == tags


def test_default_budget_and_too_small():
    f = interference_matrix(star_network(3))
    assert ilp.build_ilp_model(f).node_budget == 6
    with pytest.raises(errors.BudgetTooSmall):
        ilp.build_ilp_model(f, node_budget=3)


def test_overlays_must_be_one_to_k():
    f = interference_matrix(star_network(3)).restrict([1, 3])
    with pytest.raises(ValueError):
        ilp.build_ilp_model(f)


def test_lp_round_trip():
    model = ilp.build_ilp_model(interference_matrix(star_network(3)))
    buf = io.StringIO()
    ilp.export_lp(model, buf)
    text = buf.getvalue()
    for section in ("Minimize", "Subject To", "Bounds", "Binary", "End"):
        assert section in text
    assert max(len(line) for line in text.splitlines()) <= 255
    assert ilp.parse_lp(text).signature() == model.signature()


def test_lp_file_export(tmp_path):
    model = ilp.build_ilp_model(interference_matrix(build_network(2, 1, [(1, 3), (2, 3)])))
    path = tmp_path / "m.lp"
    ilp.export_lp(model, str(path))
    assert ilp.parse_lp(path.read_text()).signature() == model.signature()


def test_parse_lp_handles_free_form_input():
    text = """\\ tiny
Minimize
 obj: x + 2 y
Subject To
 c1: x + y >= 1
 c2: - x
   + y <= 0.5
Bounds
 0 <= y <= 3
Binary
 x
End
"""
    m = ilp.parse_lp(text)
    assert m.objective == {"x": 1.0, "y": 2.0}
    assert m.variables["x"].kind == ilp.BINARY
    assert m.variables["y"].upper == 3.0
    assert not m.check({"x": 1, "y": 0.5})
    assert m.check({"x": 0, "y": 0.5})


def test_ground_truth_assignment_satisfies_model():
    for g in (star_network(3), three_router_tree(), ladder_grid()):
        f = interference_matrix(g)
        model = ilp.build_ilp_model(f, node_budget=len(g.nodes))
        values = ilp.assignment_from_solution(model, RecoveredGraph.from_routing(g))
        assert model.check(values) == []
        assert model.objective_value(values) == g.num_edges


def test_assignment_detects_a_bad_route():
    g = three_router_tree()
    f = interference_matrix(g)
    model = ilp.build_ilp_model(f, node_budget=10)
    rg = RecoveredGraph.from_routing(g)
    routes = dict(rg.routes)
    routes[(1, 2)] = (1, 8, 9, 8, 2)
    bad = model.check(ilp.assignment_from_solution(model, RecoveredGraph(g, routes)))
    assert bad


def test_solution_text_round_trip():
    g = star_network(3)
    f = interference_matrix(g)
    model = ilp.build_ilp_model(f)
    values = ilp.assignment_from_solution(model, RecoveredGraph.from_routing(g))
    back = ilp.read_solution(ilp.write_solution(values))
    rg = ilp.recovered_from_solution(f, back)
    assert bounds.verify_solution(f, rg).feasible
    assert rg.num_edges == 3


def test_read_solution_formats():
    text = "# status optimal\nx=1\ny 0\n1 z 1 0\nObjective value = 5\n"
    assert ilp.read_solution(text) == {"x": 1.0, "y": 0.0, "z": 1.0}


@pytest.mark.parametrize("g", [build_network(2, 1, [(1, 3), (2, 3)]), star_network(3),
                               build_network(4, 2, [(1, 5), (2, 5), (3, 6), (4, 6), (5, 6)])])
def test_exact_solver_recovers_small_trees(g):
    f = interference_matrix(g)
    rg = ilp.solve_exact_small(ilp.build_ilp_model(f))
    assert rg.num_edges == g.num_edges
    assert bounds.verify_solution(f, rg).feasible


def test_exact_solver_matches_tree_size_on_random_trees():
    rng = np.random.default_rng(21)
    for _ in range(10):
        g = random_minimal_tree(int(rng.integers(2, 5)), rng)
        f = interference_matrix(g)
        assert ilp.solve_exact_small(ilp.build_ilp_model(f)).num_edges == g.num_edges


def test_exact_solver_infeasible_with_one_router():
    f = interference_matrix(build_network(4, 2, [(1, 5), (2, 5), (3, 6), (4, 6), (5, 6)]))
    with pytest.raises(errors.Infeasible):
        ilp.solve_exact_small(ilp.build_ilp_model(f, node_budget=5))


def test_exact_solver_limits():
    f = interference_matrix(ladder_grid())
    with pytest.raises(ValueError):
        ilp.solve_exact_small(ilp.build_ilp_model(f, node_budget=12))
    small = interference_matrix(ring_network([1, 2, 3, 4]))
    with pytest.raises(errors.TimeBudgetExceeded) as exc:
        ilp.solve_exact_small(ilp.build_ilp_model(small), ilp.SolverLimits(time_budget=0.0))
    assert exc.value.best is None or bounds.verify_solution(small, exc.value.best).feasible


def test_four_ring_is_not_minimal():
    # with four hosts a ring is beaten by a smaller network with the same matrix
    g = ring_network([1, 2, 3, 4])
    f = interference_matrix(g)
    rg = ilp.solve_exact_small(ilp.build_ilp_model(f))
    assert rg.num_edges < g.num_edges
    assert bounds.verify_solution(f, rg).feasible
