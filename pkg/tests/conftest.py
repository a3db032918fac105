import numpy as np
import pytest

import resonet as rn

TWO_EDGE_L0 = 1.0068
FIVE_EDGE_L0 = 1.0025
PHI = float(np.arccos(-1.0 / 3.0))  # k * l0 of the five-edge embedded eigenvalue


@pytest.fixture(scope="session")
def two_edge():
    return rn.load_graph_spec(rn.fixture_path("two_edge.graph"))


@pytest.fixture(scope="session")
def five_edge():
    return rn.load_graph_spec(rn.fixture_path("five_edge.graph"))


def make_graph(n_vertices, edge_list, lead_vertices):
    """Build a MetricGraph from (tail, head, length) triples and lead vertices."""
    vertices = [rn.Vertex(i) for i in range(n_vertices)]
    edges = [
        rn.InternalEdge(100 + j, t, h, length)
        for j, (t, h, length) in enumerate(edge_list)
    ]
    leads = [rn.Lead(j + 1, v) for j, v in enumerate(lead_vertices)]
    return rn.MetricGraph.build(vertices, edges, leads)


def random_graph(rng, max_vertices=6, max_extra_edges=3, max_leads=3):
    """Random connected multigraph with at least one lead."""
    nv = int(rng.integers(1, max_vertices + 1))
    edges = []
    for v in range(1, nv):
        u = int(rng.integers(0, v))
        edges.append((u, v, float(rng.uniform(0.4, 2.5))))
    for _ in range(int(rng.integers(0, max_extra_edges + 1))):
        a = int(rng.integers(0, nv))
        b = int(rng.integers(0, nv))
        edges.append((a, b, float(rng.uniform(0.4, 2.5))))
    if not edges:  # single vertex: give it a loop half the time
        if rng.random() < 0.5:
            edges.append((0, 0, float(rng.uniform(0.4, 2.5))))
    n_leads = int(rng.integers(1, max_leads + 1))
    lead_vertices = [int(rng.integers(0, nv)) for _ in range(n_leads)]
    return make_graph(nv, edges, lead_vertices)
