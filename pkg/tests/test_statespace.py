import itertools

import pytest

from heatbath.errors import ScheduleSyntaxError, StateCapExceeded
from heatbath.statespace import (
    Colorings,
    Permutations,
    Potts,
    build_graph,
    canonical_start,
    enumerate_states,
    is_proper,
    parse_initial_state,
    parse_space_spec,
    read_graph_file,
    triangle_bijection,
    triangle_graph,
)


def test_build_graph_normalizes_edges():
    g = build_graph(3, [(2, 3), (3, 1), (2, 1)])
    assert g.edges == ((1, 2), (1, 3), (2, 3))
    assert g.neighbors(2) == (1, 3)
    assert g.degree(1) == 2


def test_build_graph_single_vertex():
    g = build_graph(1, [])
    assert g.vertex_count == 1
    assert g.edges == ()


@pytest.mark.parametrize(
    "edges,msg",
    [
        ([(1, 1)], "self-loop"),
        ([(1, 4)], "outside"),
        ([(0, 2)], "outside"),
        ([(1, 2), (2, 1)], "duplicate"),
    ],
)
def test_build_graph_rejects_bad_edges(edges, msg):
    with pytest.raises(ValueError, match=msg):
        build_graph(3, edges)


def test_enumerate_permutations():
    sp = enumerate_states(Permutations(4))
    assert sp.size == 24
    assert sp.states[0] == (1, 2, 3, 4)
    assert sp.states == tuple(sorted(sp.states))


def test_enumerate_triangle_colorings():
    # direct counting oracle: 4 * 3 * 2 proper colorings of a triangle
    sp = enumerate_states(Colorings(triangle_graph(), 4))
    assert sp.size == 24
    assert all(is_proper(triangle_graph(), s) for s in sp.states)
    assert sp.states == tuple(sorted(sp.states))


def test_enumerate_potts():
    sp = enumerate_states(Potts(triangle_graph(), 4))
    assert sp.size == 4**3


def test_enumeration_is_stable_and_indexed():
    a = enumerate_states(Colorings(triangle_graph(), 4))
    b = enumerate_states(Colorings(triangle_graph(), 4))
    assert a.states == b.states
    for i in range(a.size):
        assert a.index_of(a.state_of(i)) == i
    for s in a.states:
        assert a.state_of(a.index_of(s)) == s


def test_empty_coloring_space_is_allowed():
    sp = enumerate_states(Colorings(triangle_graph(), 2))
    assert sp.size == 0


def test_state_cap():
    with pytest.raises(StateCapExceeded):
        enumerate_states(Permutations(12), cap=1000)
    with pytest.raises(StateCapExceeded):
        enumerate_states(Potts(triangle_graph(), 4), cap=10)
    with pytest.raises(StateCapExceeded):
        enumerate_states(Colorings(triangle_graph(), 4), cap=10)


def test_triangle_bijection_examples():
    bij = triangle_bijection()
    assert bij.map_coloring((1, 2, 3)) == (1, 2, 3, 4)
    assert bij.map_coloring((2, 1, 3)) == (2, 1, 3, 4)
    # missing color computed by complement
    assert bij.map_coloring((4, 2, 3)) == (4, 2, 3, 1)


def test_triangle_bijection_is_a_bijection():
    bij = triangle_bijection()
    assert len(set(bij.coloring_to_perm)) == 24
    for cid in range(24):
        assert bij.perm_to_coloring[bij.coloring_to_perm[cid]] == cid
    for cid, coloring in enumerate(bij.coloring_space.states):
        pid = bij.coloring_to_perm[cid]
        assert bij.perm_space.states[pid] == bij.map_coloring(coloring)
        assert bij.map_permutation(bij.perm_space.states[pid]) == coloring


def test_parse_space_specs(tmp_path):
    assert parse_space_spec("perm:4").size == 24
    assert parse_space_spec("color:triangle:q=4").size == 24
    assert parse_space_spec("potts:triangle:q=4").size == 64
    path = tmp_path / "path2.graph"
    path.write_text("2\n1 2\n")
    sp = parse_space_spec(f"color:{path}:q=2")
    assert sp.size == 2
    assert sp.states == ((1, 2), (2, 1))


@pytest.mark.parametrize("bad", ["perm", "perm:x", "color:triangle", "weird:3", "color:triangle:q=x"])
def test_parse_space_spec_errors(bad):
    with pytest.raises(ScheduleSyntaxError):
        parse_space_spec(bad)


def test_read_graph_file_errors(tmp_path):
    empty = tmp_path / "empty.graph"
    empty.write_text("\n")
    with pytest.raises(ValueError):
        read_graph_file(str(empty))
    bad = tmp_path / "bad.graph"
    bad.write_text("2\n1 2 3\n")
    with pytest.raises(ValueError):
        read_graph_file(str(bad))


def test_initial_states():
    perm = parse_space_spec("perm:4")
    assert parse_initial_state(perm, "identity") == (1, 2, 3, 4)
    assert parse_initial_state(perm, "2,1,3,4") == (2, 1, 3, 4)
    with pytest.raises(ValueError):
        parse_initial_state(perm, "1,1,3,4")
    potts = parse_space_spec("potts:triangle:q=4")
    assert parse_initial_state(potts, "all:1") == (1, 1, 1)
    assert canonical_start(potts) == (1, 1, 1)
    assert canonical_start(perm) == (1, 2, 3, 4)
    col = parse_space_spec("color:triangle:q=4")
    assert canonical_start(col) == col.states[0] == (1, 2, 3)


def test_coloring_enumeration_matches_product_filter():
    # oracle: brute force over all assignments
    g = build_graph(4, [(1, 2), (2, 3), (3, 4), (1, 4)])
    sp = enumerate_states(Colorings(g, 3))
    expected = [
        s
        for s in itertools.product(range(1, 4), repeat=4)
        if all(s[u - 1] != s[v - 1] for u, v in g.edges)
    ]
    assert list(sp.states) == expected
