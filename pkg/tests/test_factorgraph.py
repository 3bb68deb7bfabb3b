import numpy as np
import pytest

from boxprop.errors import FgFormatError
from boxprop.factorgraph import (
    Factor,
    FactorGraph,
    graphs_equal,
    markov_blanket,
    parse_fg,
    validate,
    write_fg,
)
from helpers import graph_from, random_connected_graph, triangle_graph

TRIANGLE_FG = """# three binary variables, three pairwise couplings
3

2
0 1
2 2
4
0 1.0
1 2.0
2 2.0
3 1.0

2
0 2
2 2
4
0 1.0
1 2.0
2 2.0
3 1.0

2
1 2
2 2
4
0 1.0
1 2.0
2 2.0
3 1.0
"""

SMALLEST_FG = "1\n\n1\n0\n2\n2\n0 1.0\n1 1.0\n"


def test_parse_triangle():
    g = parse_fg(TRIANGLE_FG)
    assert g.num_variables == 3
    assert g.num_factors == 3
    assert all(len(f.scope) == 2 for f in g.factors)
    assert np.array_equal(g.factors[0].table, [1.0, 2.0, 2.0, 1.0])
    assert graphs_equal(g, triangle_graph())


def test_parse_smallest_legal_input():
    g = parse_fg(SMALLEST_FG)
    assert g.num_variables == 1
    assert g.num_factors == 1
    assert np.array_equal(g.factors[0].table, [1.0, 1.0])


def test_parse_sparse_entries_default_to_zero():
    text = "1\n\n1\n0\n3\n1\n1 5.0\n"
    g = parse_fg(text)
    assert np.array_equal(g.factors[0].table, [0.0, 5.0, 0.0])


def test_roundtrip_random_graphs():
    rng = np.random.default_rng(101)
    for _ in range(50):
        g = random_connected_graph(rng)
        assert graphs_equal(g, parse_fg(write_fg(g)))


def test_roundtrip_triangle():
    g = triangle_graph()
    assert graphs_equal(g, parse_fg(write_fg(g)))


def test_write_smallest_layout():
    g = parse_fg(SMALLEST_FG)
    text = write_fg(g)
    lines = text.split("\n")
    assert len(lines) == 10
    assert lines[0] == "1"
    assert lines[1] == ""
    assert graphs_equal(parse_fg(text), g)


def test_write_lists_zero_entries():
    g = graph_from([((0,), (2,), (0.0, 5.0))])
    text = write_fg(g)
    assert "0 0.0" in text
    assert graphs_equal(parse_fg(text), g)


@pytest.mark.parametrize(
    "text,said",
    [
        ("x\n", "integer"),  # syntax error in the header
        ("1\n\n2\n0 0\n2 2\n0\n", "duplicate"),  # repeated variable in scope
        ("2\n\n1\n0\n2\n0\n\n1\n0\n3\n0\n", "inconsistent"),  # domain size clash
        ("1\n\n1\n0\n2\n1\n7 1.0\n", "out of range"),  # bad table index
        ("1\n\n1\n0\n2\n1\n0 -1.0\n", "nonnegative"),  # negative value
        ("1\n\n1\n5\n2\n0\n", "dense"),  # ids not dense
        ("1\n\n1\n0\n1\n0\n", ">= 2"),  # one-state variable
        ("2\n\n1\n0\n2\n0\n", "end of input"),  # truncated file
    ],
)
def test_parse_errors(text, said):
    with pytest.raises(FgFormatError) as err:
        parse_fg(text)
    assert said in str(err.value)
    assert err.value.lineno >= 1


def test_parse_error_reports_line_number():
    with pytest.raises(FgFormatError) as err:
        parse_fg("1\n\n1\n0\n2\n1\nbogus entry\n")
    assert err.value.lineno == 7


def test_validate_triangle_passes():
    assert validate(triangle_graph()) == []


def test_validate_positivity_zero_column():
    # Second column of the (0,1) factor is all zero: summing over variable 0
    # at assignment x_1 = 1 gives zero.
    g = graph_from(
        [
            ((0, 1), (2, 2), (1.0, 2.0, 0.0, 0.0)),
            ((0,), (2,), (1.0, 1.0)),
            ((1,), (2,), (1.0, 1.0)),
        ]
    )
    violations = validate(g)
    positivity = [v for v in violations if v.kind == "positivity"]
    assert positivity
    hit = [v for v in positivity if v.factor == 0 and v.variable == 0]
    assert hit and hit[0].assignment == (1,)


def test_validate_disconnected():
    g = graph_from([((0,), (2,), (1.0, 1.0)), ((1,), (2,), (1.0, 1.0))])
    kinds = {v.kind for v in validate(g)}
    assert "disconnected" in kinds


def test_markov_blanket_triangle():
    g = triangle_graph()
    assert markov_blanket(g, 0) == {1, 2}


def test_markov_blanket_isolated_unary():
    g = graph_from([((0,), (2,), (1.0, 1.0))])
    assert markov_blanket(g, 0) == set()


def test_markov_blanket_grid_interior():
    from boxprop.bench import GridSpec, gen_ising_grid

    g = gen_ising_grid(GridSpec(5, 5, 2, 1.0, 3))
    center = 2 * 5 + 2
    assert markov_blanket(g, center) == {center - 1, center + 1, center - 5, center + 5}


def test_bipartite_consistency():
    rng = np.random.default_rng(7)
    for g in [triangle_graph(), parse_fg(TRIANGLE_FG)] + [
        random_connected_graph(rng) for _ in range(10)
    ]:
        for f in g.factors:
            for v in f.scope:
                assert f.id in g.var_factors(v)
        for i in range(g.num_variables):
            for fid in g.var_factors(i):
                assert i in g.factors[fid].scope


def test_factor_construction_errors():
    with pytest.raises(ValueError):
        Factor(0, (0, 0), (2, 2), np.ones(4))  # duplicate scope
    with pytest.raises(ValueError):
        Factor(0, (0,), (2,), np.array([1.0, -1.0]))  # negative entry
    with pytest.raises(ValueError):
        Factor(0, (0,), (2,), np.ones(3))  # wrong length
    with pytest.raises(ValueError):
        Factor(0, (), (), np.ones(1))  # empty scope


def test_graph_construction_errors():
    f_ok = Factor(0, (0,), (2,), np.ones(2))
    with pytest.raises(ValueError):
        FactorGraph([])
    with pytest.raises(ValueError):
        FactorGraph([f_ok, Factor(1, (0,), (3,), np.ones(3))])  # size clash
    with pytest.raises(ValueError):
        FactorGraph([Factor(0, (1,), (2,), np.ones(2))])  # missing variable 0


def test_tables_are_immutable():
    g = triangle_graph()
    with pytest.raises(ValueError):
        g.factors[0].table[0] = 9.0
