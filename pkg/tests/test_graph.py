import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import resonet as rn
from resonet.graph import GraphSpecSemanticError, GraphSpecSyntaxError

from conftest import make_graph


def test_two_edge_fixture_counts(two_edge):
    g = two_edge.graph
    assert g.n_edges == 2
    assert g.n_leads == 2
    assert len(g.vertices) == 2
    assert g.edges[0].base_length == pytest.approx(1.0068)
    assert two_edge.sweep == rn.Sweep(-0.2, 0.2, 41)
    assert two_edge.beta == pytest.approx(0.009)


def test_five_edge_fixture_counts(five_edge):
    g = five_edge.graph
    assert g.n_edges == 5
    assert g.n_leads == 2
    assert len(g.vertices) == 4
    assert all(e.base_length == pytest.approx(1.0025) for e in g.edges)


def test_dangling_endpoint_rejected():
    text = "vertex 0\nvertex 1\nedge 3 0 9 length 1.0\nlead 1 0\n"
    with pytest.raises(GraphSpecSemanticError, match="unknown vertex 9"):
        rn.parse_graph_spec(text)


def test_syntax_error_carries_line_number():
    text = "vertex 0\nvertex 1\nedge 3 0 1 size 1.0\nlead 1 0\n"
    with pytest.raises(GraphSpecSyntaxError) as err:
        rn.parse_graph_spec(text)
    assert err.value.line_no == 3


@pytest.mark.parametrize(
    "bad_line, match",
    [
        ("edge 3 0 1 length -2.0", "nonpositive"),
        ("edge 4 0 1 length 1.0\nedge 4 0 1 length 1.0", "duplicate"),
        ("lead 3 0\nedge 3 0 1 length 1.0", "duplicate"),
        ("vertex 5", "contiguous"),
    ],
)
def test_semantic_errors(bad_line, match):
    text = f"vertex 0\nvertex 1\nedge 9 0 1 length 1.0\n{bad_line}\n"
    with pytest.raises(GraphSpecSemanticError, match=match):
        rn.parse_graph_spec(text)


def test_disconnected_rejected():
    text = (
        "vertex 0\nvertex 1\nvertex 2\nvertex 3\n"
        "edge 3 0 1 length 1.0\nedge 4 2 3 length 1.0\nlead 1 0\n"
    )
    with pytest.raises(GraphSpecSemanticError, match="not connected"):
        rn.parse_graph_spec(text)


def test_sweep_positivity_guard():
    text = "vertex 0\nvertex 1\nedge 3 0 1 length 1.0 slope -2\nlead 1 0\nsweep t -0.2 0.6 5\n"
    with pytest.raises(GraphSpecSemanticError, match="positivity"):
        rn.parse_graph_spec(text)


def test_length_at_examples():
    e = rn.InternalEdge(3, 0, 1, 1.0, slope=-1.0)
    assert rn.length_at(e, 0.1) == pytest.approx(0.9)
    fixed = rn.InternalEdge(4, 0, 1, 1.0068, slope=0.0)
    for t in (-0.3, 0.0, 0.7):
        assert rn.length_at(fixed, t) == pytest.approx(1.0068)
    grow = rn.InternalEdge(5, 0, 1, 1.0025, slope=1.0)
    assert rn.length_at(grow, -0.05) == pytest.approx(0.952375)
    with pytest.raises(ValueError, match="not positive"):
        rn.length_at(e, 1.5)


def test_a_dot_examples(two_edge, five_edge):
    assert rn.a_dot(two_edge.graph, 3) == pytest.approx(1.0)
    assert rn.a_dot(two_edge.graph, 4) == pytest.approx(0.0)
    rates = [rn.a_dot(five_edge.graph, j) for j in (3, 4, 5, 6)]
    assert rates == pytest.approx([1.0, -1.0, 1.0, -1.0])
    # the fifth family grows with t, so its shrink rate is -1 as well
    assert rn.a_dot(five_edge.graph, 7) == pytest.approx(-1.0)
    with pytest.raises(KeyError):
        rn.a_dot(two_edge.graph, 99)


def test_perturbation_vector_matches_edge_rates(five_edge):
    arr = five_edge.perturbation.as_array(five_edge.graph)
    assert arr == pytest.approx([1.0, -1.0, 1.0, -1.0, -1.0])


def test_optical_length():
    assert rn.optical_length(1.0, 2.06) == pytest.approx(math.sqrt(2.06))
    assert rn.optical_length(0.37, 1.0) == pytest.approx(0.37)
    # inverse of the two-edge fixture's optical length
    assert rn.optical_length(0.7015, 2.06) == pytest.approx(1.0068, abs=1e-4)
    with pytest.raises(ValueError):
        rn.optical_length(-1.0, 2.06)
    with pytest.raises(ValueError):
        rn.optical_length(1.0, 0.5)


def test_cutoff_frequency():
    nu_c = rn.cutoff_frequency(0.0005, 0.0015, 2.06)
    assert nu_c == pytest.approx(33.2e9, rel=0.02)
    with pytest.raises(ValueError):
        rn.cutoff_frequency(0.0015, 0.0005, 2.06)
    with pytest.raises(ValueError):
        rn.cutoff_frequency(0.0005, 0.0005, 2.06)
    # vacuum scales the cutoff up by sqrt(epsilon)
    assert rn.cutoff_frequency(0.0005, 0.0015, 1.0) == pytest.approx(
        nu_c * math.sqrt(2.06)
    )


def test_round_trip_fixture(two_edge, five_edge):
    for spec in (two_edge, five_edge):
        again = rn.parse_graph_spec(rn.serialize_graph_spec(spec))
        assert again == spec


@st.composite
def graph_specs(draw):
    n_vertices = draw(st.integers(min_value=1, max_value=5))
    lengths = st.floats(min_value=0.1, max_value=9.0, allow_nan=False)
    edges = []
    for v in range(1, n_vertices):
        u = draw(st.integers(min_value=0, max_value=v - 1))
        edges.append((u, v, draw(lengths)))
    for _ in range(draw(st.integers(min_value=0, max_value=3))):
        a = draw(st.integers(min_value=0, max_value=n_vertices - 1))
        b = draw(st.integers(min_value=0, max_value=n_vertices - 1))
        edges.append((a, b, draw(lengths)))
    if n_vertices == 1 and not edges:
        edges.append((0, 0, draw(lengths)))
    slopes = draw(
        st.lists(
            st.sampled_from([-1.0, -0.5, 0.0, 0.5, 1.0]),
            min_size=len(edges),
            max_size=len(edges),
        )
    )
    n_leads = draw(st.integers(min_value=1, max_value=3))
    lead_vs = [
        draw(st.integers(min_value=0, max_value=n_vertices - 1)) for _ in range(n_leads)
    ]
    vertices = [rn.Vertex(i) for i in range(n_vertices)]
    edge_objs = [
        rn.InternalEdge(10 + j, t, h, length, slope)
        for j, ((t, h, length), slope) in enumerate(zip(edges, slopes))
    ]
    leads = [rn.Lead(j + 1, v) for j, v in enumerate(lead_vs)]
    graph = rn.MetricGraph.build(vertices, edge_objs, leads)
    return rn.ParsedSpec(
        graph=graph,
        perturbation=rn.PerturbationVector.from_graph(graph),
        sweep=None,
        beta=draw(st.sampled_from([0.0, 0.009])),
    )


@given(graph_specs())
@settings(max_examples=60, deadline=None)
def test_round_trip_random(spec):
    again = rn.parse_graph_spec(rn.serialize_graph_spec(spec))
    assert again == spec


@given(graph_specs())
@settings(max_examples=60, deadline=None)
def test_length_family_invariants(spec):
    for e in spec.graph.edges:
        assert e.length_at(0.0) == pytest.approx(e.base_length)
        assert e.a_dot == -e.slope


def _brute_force_connected(n, pairs):
    reach = np.eye(n, dtype=bool)
    for a, b in pairs:
        reach[a, b] = reach[b, a] = True
    for _ in range(n):
        reach = reach | (reach @ reach)
    return bool(reach[0].all())


def test_connectivity_matches_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(1, 11))
        n_edges = int(rng.integers(0, 2 * n + 1))
        pairs = [
            (int(rng.integers(0, n)), int(rng.integers(0, n))) for _ in range(n_edges)
        ]
        vertices = [rn.Vertex(i) for i in range(n)]
        edges = [rn.InternalEdge(10 + j, a, b, 1.0) for j, (a, b) in enumerate(pairs)]
        graph = rn.MetricGraph(
            tuple(vertices),
            tuple(edges),
            (),
            rn.graph._build_incidence(vertices, edges, ()),
        )
        assert graph.is_connected() == _brute_force_connected(n, pairs)


def test_incidence_checked_both_ways(two_edge):
    g = two_edge.graph
    assert sum(len(row) for row in g.incidence) == 2 * g.n_edges + g.n_leads
    g.validate()
    tampered = rn.MetricGraph(
        g.vertices, g.edges, g.leads, (g.incidence[1], g.incidence[0])
    )
    with pytest.raises(GraphSpecSemanticError, match="incidence"):
        tampered.validate()
