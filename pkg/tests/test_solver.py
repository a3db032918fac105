import numpy as np
import pytest

import resonet as rn
from resonet.graph import C_VACUUM
from resonet.solver import RCOND_SINGULAR, SolverError

from conftest import FIVE_EDGE_L0, TWO_EDGE_L0, make_graph, random_graph


def test_system_sizes(two_edge, five_edge):
    sys2 = rn.assemble(two_edge.graph, 0.0, 3.0 + 0j)
    assert sys2.matrix.shape == (6, 6)
    sys5 = rn.assemble(five_edge.graph, 0.0, 3.0 + 0j)
    assert sys5.matrix.shape == (12, 12)


def test_k_zero_rejected(two_edge):
    with pytest.raises(SolverError, match="k = 0"):
        rn.assemble(two_edge.graph, 0.0, 0.0)


@pytest.mark.parametrize("t,k", [(0.0, 4.7), (0.13, 6.1), (-0.08, 2.2)])
def test_solved_field_satisfies_vertex_conditions(two_edge, five_edge, t, k):
    for spec in (two_edge, five_edge):
        for s in range(spec.graph.n_leads):
            field = rn.solve_wavefield(spec.graph, t, complex(k), s)
            system = rn.assemble(spec.graph, t, complex(k))
            assert system.residual(field) < 1e-10


def test_unitarity_and_symmetry_on_fixtures(two_edge, five_edge):
    for spec in (two_edge, five_edge):
        for k in np.linspace(0.7, 9.0, 25):
            r = rn.scattering_matrix(spec.graph, 0.07, complex(k))
            if r.flagged:
                continue
            m = r.s_matrix
            assert np.abs(m @ m.conj().T - np.eye(len(m))).max() < 1e-10
            assert np.abs(m - m.T).max() < 1e-10
            assert abs(r.abs_det_s - 1.0) < 1e-10


def test_random_graph_unitarity():
    rng = np.random.default_rng(7)
    for _ in range(60):
        graph = random_graph(rng)
        k = float(rng.uniform(0.5, 25.0))
        r = rn.scattering_matrix(graph, 0.0, complex(k))
        if r.flagged:
            continue
        m = r.s_matrix
        assert np.abs(m @ m.conj().T - np.eye(len(m))).max() < 1e-10
        assert np.abs(m - m.T).max() < 1e-10


def test_two_edge_appendix_scattering_values(two_edge):
    # at the embedded eigenvalue the driven system is singular; the
    # well-defined values live in the holomorphic limit (fermi module)
    k0 = 2 * np.pi / TWO_EDGE_L0
    gef = rn.generalized_eigenfunction(two_edge.graph, k0, 0)
    assert abs(gef.scattering_row[0] - 0.0) < 1e-8
    assert abs(gef.scattering_row[1] - 1.0) < 1e-8


def test_scattering_flagged_at_embedded_eigenvalue(two_edge):
    k0 = 2 * np.pi / TWO_EDGE_L0
    r = rn.scattering_matrix(two_edge.graph, 0.0, complex(k0))
    assert r.flagged
    assert r.rcond < RCOND_SINGULAR
    assert np.all(np.isfinite(r.s_matrix))


def test_lead_permutation_equivariance():
    edges = [(0, 1, 0.9), (1, 2, 1.4), (0, 2, 0.7)]
    g_a = make_graph(3, edges, [0, 1, 2])
    vertices = [rn.Vertex(i) for i in range(3)]
    edge_objs = [
        rn.InternalEdge(100 + j, t, h, length) for j, (t, h, length) in enumerate(edges)
    ]
    # lead ids reversed: lead order (sorted by id) becomes vertex 2, 1, 0
    leads = [rn.Lead(3, 0), rn.Lead(2, 1), rn.Lead(1, 2)]
    g_b = rn.MetricGraph.build(vertices, edge_objs, leads)
    k = 3.3 + 0j
    s_a = rn.scattering_matrix(g_a, 0.0, k).s_matrix
    s_b = rn.scattering_matrix(g_b, 0.0, k).s_matrix
    perm = np.array([2, 1, 0])
    assert np.abs(s_b - s_a[np.ix_(perm, perm)]).max() < 1e-12


def test_dispersion_examples():
    assert rn.dispersion_k(2.0e8, 0.0) == pytest.approx(2 * np.pi * 2.0e8 / C_VACUUM)
    k = rn.dispersion_k(0.2978e9, 0.009)
    assert k.real == pytest.approx(2 * np.pi * 0.2978e9 / C_VACUUM, rel=1e-12)
    assert k.real == pytest.approx(6.2407, abs=1e-3)
    assert k.imag == pytest.approx(0.009 * np.sqrt(k.real), rel=1e-12)
    assert k.imag == pytest.approx(0.02248, abs=2e-5)
    with pytest.raises(ValueError):
        rn.dispersion_k(-1.0, 0.0)
    ims = [rn.dispersion_k(nu, 0.009).imag for nu in np.linspace(1e8, 5e8, 40)]
    assert np.all(np.diff(ims) > 0)


def test_trace_lossless_is_unimodular(two_edge):
    trace = rn.trace_detS(two_edge.graph, 0.0, 0.28e9, 0.32e9, 101, beta=0.0)
    good = ~trace.flagged
    assert np.abs(trace.abs_det_s[good] - 1.0).max() < 1e-10


def test_trace_two_edge_doublet_dip(two_edge):
    # the doublet window 0.314-0.347 GHz is reached when the variable edge
    # shortens to 0.8 of its base length
    trace = rn.trace_detS(two_edge.graph, 0.2, 0.30e9, 0.36e9, 601, beta=0.009)
    window = (trace.nu >= 0.314e9) & (trace.nu <= 0.347e9)
    assert trace.abs_det_s[window].min() < 0.9
    # the mirrored t sits near 0.2706 GHz instead
    trace_m = rn.trace_detS(two_edge.graph, -0.2, 0.25e9, 0.30e9, 601, beta=0.009)
    assert trace_m.abs_det_s.min() < 0.9
    assert trace_m.nu[np.argmin(trace_m.abs_det_s)] == pytest.approx(0.2706e9, rel=2e-3)


def test_trace_five_edge_triplet(five_edge):
    trace = rn.trace_detS(five_edge.graph, -0.05, 0.06e9, 0.12e9, 1501, beta=0.009)
    zeros = rn.find_zeros_in_box(
        five_edge.graph,
        -0.05,
        rn.Rectangle(2 * np.pi * 0.074e9 / C_VACUUM, 2 * np.pi * 0.116e9 / C_VACUUM, -0.6, 0.0),
        beta=0.009,
    )
    assert len(zeros) == 3
    # each resonance carves a visible dip near its own frequency
    for z in zeros:
        width = max(abs(z.g), 2e5)
        near = np.abs(trace.nu - z.nu) < 3 * width
        assert trace.abs_det_s[near].min() < 0.97 * np.median(trace.abs_det_s)


def test_trace_workers_match_serial(two_edge):
    a = rn.trace_detS(two_edge.graph, 0.1, 0.28e9, 0.33e9, 64, beta=0.009, workers=1)
    b = rn.trace_detS(two_edge.graph, 0.1, 0.28e9, 0.33e9, 64, beta=0.009, workers=4)
    assert np.array_equal(a.det_s, b.det_s)


def test_trace_csv_round_trip(two_edge):
    trace = rn.trace_detS(two_edge.graph, 0.2, 0.31e9, 0.35e9, 21, beta=0.009)
    text = rn.trace_to_csv(trace, manifest='{"cmd":"sweep"}')
    assert text.splitlines()[0] == '# manifest: {"cmd":"sweep"}'
    assert text.splitlines()[1] == "nu_Hz,re_detS,im_detS,abs_detS"
    nu, mag = rn.trace_from_csv(text)
    assert np.array_equal(nu, trace.nu)
    assert np.array_equal(mag, trace.abs_det_s)


@pytest.mark.parametrize(
    "mangle, row",
    [
        (lambda lines: lines[:3] + ["1e9,0.5,0.5"] + lines[4:], 4),
        (lambda lines: lines[:4] + ["not,a,number,row"] + lines[5:], 5),
    ],
)
def test_trace_csv_malformed_row(two_edge, mangle, row):
    trace = rn.trace_detS(two_edge.graph, 0.0, 0.31e9, 0.35e9, 12, beta=0.009)
    lines = rn.trace_to_csv(trace, manifest="x").splitlines()
    with pytest.raises(ValueError, match=f"row {row}"):
        rn.trace_from_csv("\n".join(mangle(lines)))


def test_trace_input_guards(two_edge):
    with pytest.raises(ValueError):
        rn.trace_detS(two_edge.graph, 0.0, -1.0, 1e9, 10)
    with pytest.raises(ValueError):
        rn.trace_detS(two_edge.graph, 0.0, 2e9, 1e9, 10)
    with pytest.raises(SolverError, match="lead"):
        loop = make_graph(2, [(0, 1, 1.0), (0, 1, 1.2)], [])
        rn.scattering_matrix(loop, 0.0, 1.0 + 0j)
