from __future__ import annotations

import io
import itertools
import math

import pytest
from hypothesis import given, strategies as st

from navsynth.navgraph import (
    GraphFormatError,
    NavGraph,
    Pose,
    UnknownViewpointError,
    Viewpoint,
    bearing_between,
    load_graph,
    serialize_graph,
    signed_heading_delta,
)


def test_load_two_nodes_one_edge():
    g = load_graph("V a 0 0 0 1\nV b 3 0 0 1\nE a b\n")
    assert len(g) == 2
    assert g.edges() == [("a", "b", 3.0)]


def test_duplicate_viewpoint_id_rejected():
    with pytest.raises(GraphFormatError, match="duplicate viewpoint id 'vp_1'"):
        load_graph("V vp_1 0 0 0 1\nV vp_1 1 0 0 1\n")


def test_hexa_adjacency_matches_hand_written_matrix(hexa_graph):
    # Hand-constructed oracle for the checked-in six-node fixture.
    ids = ["a", "b", "c", "d", "e", "f"]
    expected = {
        ("a", "b"): 3.0,
        ("b", "c"): 4.0,
        ("c", "d"): 3.0,
        ("a", "d"): 4.0,
        ("b", "e"): 3.0,
    }
    assert hexa_graph.ids() == tuple(ids)
    for u, v in itertools.combinations(ids, 2):
        want = expected.get((u, v)) or expected.get((v, u))
        got = hexa_graph.edge_weight(u, v)
        if want is None:
            assert got is None, (u, v)
        else:
            assert got == pytest.approx(want)


def test_excluded_viewpoints_dropped_with_incident_edges():
    g = load_graph("V a 0 0 0 1\nV b 1 0 0 0\nV c 2 0 0 1\nE a b\nE b c\n")
    assert len(g) == 2
    assert g.edges() == []
    with pytest.raises(UnknownViewpointError):
        g.neighbors("b")


@pytest.mark.parametrize(
    "text,match",
    [
        ("V a 0 0 1\n", "line 1"),
        ("V a 0 0 x 1\n", "bad coordinate"),
        ("V a 0 0 0 2\n", "included flag"),
        ("V a 0 0 0 1\nE a zz\n", "unknown id 'zz'"),
        ("V a 0 0 0 1\nE a a\n", "self-loop"),
        ("V a 0 0 0 1\nV b 1 0 0 1\nE a b\nE b a\n", "already declared on line 3"),
        ("X a\n", "unknown record kind"),
    ],
)
def test_format_errors_report_line_context(text, match):
    with pytest.raises(GraphFormatError, match=match):
        load_graph(text)


def test_neighbors_sorted_and_isolated(hexa_graph):
    assert hexa_graph.neighbors("b") == ["a", "c", "e"]
    assert hexa_graph.neighbors("f") == []


def test_neighbors_square_corner_brute_force(unit_square):
    # Oracle: scan the fixture's edge list directly.
    edges = [(a, b) for a, b, _ in unit_square.edges()]
    for corner in unit_square.ids():
        expected = sorted(
            {b for a, b in edges if a == corner} | {a for a, b in edges if b == corner}
        )
        assert unit_square.neighbors(corner) == expected
    assert unit_square.neighbors("p") == ["q", "s"]


def test_neighbors_unknown_id(hexa_graph):
    with pytest.raises(UnknownViewpointError, match="zz"):
        hexa_graph.neighbors("zz")


def test_geodesic_identity(hexa_graph):
    assert hexa_graph.geodesic_distance("a", "a") == 0.0


def _all_simple_path_lengths(graph, a, b):
    lengths = []

    def walk(node, seen, total):
        if node == b:
            lengths.append(total)
            return
        for nxt in graph.neighbors(node):
            if nxt not in seen:
                walk(nxt, seen | {nxt}, total + graph.edge_weight(node, nxt))

    walk(a, {a}, 0.0)
    return lengths


def test_geodesic_unit_square_opposite_corners(unit_square):
    # Oracle: enumerate every simple path on the fixture.
    assert min(_all_simple_path_lengths(unit_square, "p", "r")) == pytest.approx(2.0)
    assert unit_square.geodesic_distance("p", "r") == pytest.approx(2.0)


def test_geodesic_unreachable_marker(hexa_graph):
    assert hexa_graph.geodesic_distance("a", "f") is None
    assert hexa_graph.shortest_path("a", "f") is None


def test_geodesic_matches_exhaustive_oracle_everywhere(hexa_graph, unit_square):
    for graph in (hexa_graph, unit_square):
        for a in graph.ids():
            for b in graph.ids():
                got = graph.geodesic_distance(a, b)
                lengths = [0.0] if a == b else _all_simple_path_lengths(graph, a, b)
                if not lengths:
                    assert got is None
                else:
                    assert got == pytest.approx(min(lengths))


def test_geodesic_symmetry_and_triangle_inequality(hexa_graph, unit_square, star_graph):
    for graph in (hexa_graph, unit_square, star_graph):
        ids = graph.ids()
        dist = {(a, b): graph.geodesic_distance(a, b) for a in ids for b in ids}
        for a in ids:
            for b in ids:
                assert dist[(a, b)] == dist[(b, a)]
        for a, b, c in itertools.product(ids, repeat=3):
            ab, bc, ac = dist[(a, b)], dist[(b, c)], dist[(a, c)]
            if ab is not None and bc is not None:
                assert ac is not None
                assert ac <= ab + bc + 1e-12


def test_geodesic_equals_weight_for_adjacent(hexa_graph):
    for a, b, w in hexa_graph.edges():
        assert hexa_graph.geodesic_distance(a, b) == pytest.approx(w)


def test_serialize_round_trip(hexa_graph, fixtures_dir):
    text = serialize_graph(hexa_graph)
    reloaded = load_graph(text)
    assert serialize_graph(reloaded) == text
    assert reloaded.ids() == hexa_graph.ids()
    assert reloaded.edges() == hexa_graph.edges()


def test_serialize_canonical_order():
    g = load_graph("V z 1 0 0 1\nV a 0 0 0 1\nE z a\n")
    assert serialize_graph(g).splitlines() == [
        "V a 0.000000 0.000000 0.000000 1",
        "V z 1.000000 0.000000 0.000000 1",
        "E a z",
    ]


def test_bearing_along_x_axis():
    pose = bearing_between((0, 0, 0), (1, 0, 0))
    assert pose.heading == 0.0
    assert pose.elevation == 0.0


def test_bearing_purely_vertical_is_error():
    with pytest.raises(Exception, match="coincident"):
        bearing_between((0, 0, 0), (0, 0, 2))


def test_bearing_diagonal_closed_form():
    # atan2 oracle: 45 degrees planar, 45 degrees up.
    pose = bearing_between((0, 0, 0), (1, 1, math.sqrt(2)))
    assert pose.heading == pytest.approx(math.pi / 4)
    assert pose.elevation == pytest.approx(math.pi / 4)


@given(
    st.floats(-50, 50),
    st.floats(-50, 50),
    st.floats(-50, 50),
    st.floats(-50, 50),
)
def test_bearing_reverse_differs_by_pi(x1, y1, x2, y2):
    if math.hypot(x2 - x1, y2 - y1) < 1e-6:
        return
    fwd = bearing_between((x1, y1, 0.0), (x2, y2, 0.0))
    back = bearing_between((x2, y2, 0.0), (x1, y1, 0.0))
    diff = (fwd.heading - back.heading) % (2 * math.pi)
    assert diff == pytest.approx(math.pi, abs=1e-9)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_signed_heading_delta_range_and_consistency(target, current):
    d = signed_heading_delta(target, current)
    assert -math.pi < d <= math.pi
    assert math.isclose(
        math.cos(d), math.cos(target - current), abs_tol=1e-9
    ) and math.isclose(math.sin(d), math.sin(target - current), abs_tol=1e-9)


def test_pose_normalizes_heading():
    assert Pose(heading=2 * math.pi + 0.5).heading == pytest.approx(0.5)
    with pytest.raises(ValueError):
        Pose(heading=0.0, elevation=2.0)


def test_constructor_validates_positions():
    with pytest.raises(ValueError, match="non-finite"):
        Viewpoint(id="x", position=(0.0, math.inf, 0.0))


def test_zero_length_edge_rejected():
    with pytest.raises(GraphFormatError, match="zero-length"):
        load_graph("V a 0 0 0 1\nV b 0 0 0 1\nE a b\n")


def test_stream_and_string_sources_agree(fixtures_dir):
    text = (fixtures_dir / "hexa.graph").read_text(encoding="utf-8")
    with open(fixtures_dir / "hexa.graph", "r", encoding="utf-8") as fh:
        from_stream = load_graph(fh)
    from_text = load_graph(text)
    assert serialize_graph(from_stream) == serialize_graph(from_text)
