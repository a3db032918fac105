"""Decay rate of a perturbed embedded eigenvalue (graph Fermi golden rule).

An eigenvalue k^2 embedded in the continuous spectrum has an eigenfunction
that vanishes identically on every lead.  When the edge lengths are
perturbed with rates a_dot, the eigenvalue turns into a resonance whose
leading decay is the curvature Im d^2k/dt^2 = -sum_s |F_s|^2, with one
amplitude F_s per lead built from the eigenfunction u and the generalized
(scattering) eigenfunction e^s at the same k:

    F_s = -[ k <a_dot u, e^s> + (1/k) sum_v sum_{edges j at v} (1/4) a_dot_j
             (3 dnu u_j(v) conj(e^s(v)) - u(v) conj(dnu e^s_j(v))) ]

The second slot of the volume inner product is conjugated, and the overall
sign is fixed so the two-edge closed forms come out with their conventional
signs; both choices drop out of |F_s|^2.  At the embedded k the driven
scattering problem is singular, so e^s is obtained as the holomorphic limit
of solutions at k(1 +- delta), Richardson-extrapolated to delta -> 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import MetricGraph, PerturbationVector
from .solver import SecularSystem, WaveField, assemble
from .tracker import refine_zero

#: relative k offsets used for the holomorphic limit
LIMIT_DELTAS = (1e-3, 5e-4, 2.5e-4)
#: reciprocal condition number above which a direct solve is trusted
DIRECT_RCOND = 1e-8
#: allowed relative disagreement between the two one-sided limits
SIDE_TOL = 1e-6
#: simplicity threshold: second singular value must exceed this times ||A||
SIMPLE_TOL = 1e-6


class FermiError(Exception):
    """Embedded-eigenvalue or holomorphic-limit failure."""


def edge_overlap(k: float, length: float, a1, b1, a2, b2) -> complex:
    """Closed-form integral of (a1 sin + b1 cos) conj(a2 sin + b2 cos) on [0, length].

    Both factors share the same real wavenumber k, so products reduce to
    sin^2, cos^2 and sin*cos primitives; no quadrature is involved.
    """
    a2 = np.conj(a2)
    b2 = np.conj(b2)
    i_ss = length / 2.0 - np.sin(2.0 * k * length) / (4.0 * k)
    i_cc = length / 2.0 + np.sin(2.0 * k * length) / (4.0 * k)
    i_sc = np.sin(k * length) ** 2 / (2.0 * k)
    return a1 * a2 * i_ss + b1 * b2 * i_cc + (a1 * b2 + b1 * a2) * i_sc


def _field_norm2(k: float, lengths, coeffs) -> float:
    total = 0.0
    for length, (a, b) in zip(lengths, coeffs):
        total += edge_overlap(k, length, a, b, a, b).real
    return total


@dataclass
class EmbeddedEigenpair:
    """Real eigenvalue k with an eigenfunction vanishing on all leads."""

    k: float
    field: WaveField
    system: SecularSystem
    norm_check: float  # L^2 norm over internal edges after normalization
    sigma_smallest: float
    sigma_second: float
    residual: float


def embedded_eigenpair(graph: MetricGraph, k_guess: float) -> EmbeddedEigenpair:
    """Embedded eigenpair of the unperturbed (t = 0) graph near ``k_guess``.

    The secular zero is Newton-refined and must land on the real axis; the
    eigenfunction is the null vector of the homogeneous system with all
    lead amplitudes constrained to zero, normalized in L^2 over the
    internal edges.  Simplicity is required: a second near-zero singular
    value of the constrained system rejects the eigenvalue.
    """
    res = refine_zero(graph, 0.0, complex(k_guess))
    if not res.converged:
        raise FermiError(f"no secular zero found near k = {k_guess:g}")
    if abs(res.k_secular.imag) > 1e-8 * abs(res.k_secular):
        raise FermiError(
            f"zero near k = {k_guess:g} is complex ({res.k_secular:g}); "
            "not an embedded eigenvalue"
        )
    k = float(res.k_secular.real)
    system = assemble(graph, 0.0, k)
    n = graph.n_edges
    # dropping the lead columns leaves a real-valued system; its null vector
    # is an eigenfunction that vanishes on every lead
    restricted = system.matrix[:, : 2 * n].real
    _u, sing, vt = np.linalg.svd(restricted)
    sigma_smallest = float(sing[-1])
    sigma_second = float(sing[-2]) if len(sing) >= 2 else np.inf
    norm_a = float(sing[0])
    if sigma_smallest > 1e-8 * norm_a:
        raise FermiError(
            f"no lead-vanishing eigenfunction at k = {k:g} "
            f"(smallest singular value {sigma_smallest:.2e})"
        )
    if sigma_second <= SIMPLE_TOL * norm_a:
        raise FermiError(
            f"eigenvalue at k = {k:g} is not simple "
            f"(two singular values below threshold: {sigma_smallest:.2e}, "
            f"{sigma_second:.2e})"
        )
    vec = vt[-1]
    # canonical gauge: first coefficient of leading size is positive
    # (argmax alone would tie-break near-equal magnitudes on rounding noise)
    pivot = int(np.argmax(np.abs(vec) > 0.5 * np.abs(vec).max()))
    if vec[pivot] < 0:
        vec = -vec
    coeffs = vec.reshape(n, 2).astype(complex)
    norm2 = _field_norm2(k, system.lengths, coeffs)
    coeffs /= np.sqrt(norm2)
    m = graph.n_leads
    field = WaveField(
        k=complex(k),
        edge_coeffs=coeffs,
        lead_in=np.zeros(m, dtype=complex),
        lead_out=np.zeros(m, dtype=complex),
    )
    return EmbeddedEigenpair(
        k=k,
        field=field,
        system=system,
        norm_check=_field_norm2(k, system.lengths, coeffs),
        sigma_smallest=sigma_smallest,
        sigma_second=sigma_second,
        residual=system.residual(field),
    )


@dataclass
class GeneralizedEigenfunction:
    """Scattering solution with unit incoming wave on lead ``s`` at real k."""

    s: int
    k: float
    field: WaveField
    scattering_row: np.ndarray  # s_js amplitudes, j over leads
    side_disagreement: float
    method: str  # "direct" or "limit"


def _solve_driven(graph: MetricGraph, k: float, s: int) -> np.ndarray:
    system = assemble(graph, 0.0, k)
    return np.linalg.solve(system.matrix, system.rhs(s))


def _richardson(values: list[np.ndarray], node_ratio: float = 2.0) -> np.ndarray:
    """Neville extrapolation to 0 for nodes decreasing by ``node_ratio``."""
    table = [np.asarray(v, dtype=complex) for v in values]
    stage = 0
    while len(table) > 1:
        stage += 1
        r = node_ratio**stage
        table = [
            (r * table[i + 1] - table[i]) / (r - 1.0) for i in range(len(table) - 1)
        ]
    return table[0]


def generalized_eigenfunction(
    graph: MetricGraph, k: float, s: int
) -> GeneralizedEigenfunction:
    """Generalized eigenfunction e^s at real k, through spectral points.

    Away from the spectrum this is a plain driven solve.  At (or near) an
    embedded eigenvalue the system is singular with a removable limit: the
    solution is computed at k(1 +- delta) for three deltas on each side and
    Richardson-extrapolated; the two one-sided limits must agree to
    ``SIDE_TOL`` relative, otherwise the singularity is not removable.
    """
    if graph.n_leads == 0:
        raise FermiError("graph has no leads")
    system = assemble(graph, 0.0, k)
    sing = np.linalg.svd(system.matrix, compute_uv=False)
    rcond = float(sing[-1] / sing[0])
    m = graph.n_leads
    n = graph.n_edges
    if rcond > DIRECT_RCOND:
        x = np.linalg.solve(system.matrix, system.rhs(s))
        disagreement = 0.0
        method = "direct"
    else:
        plus = [_solve_driven(graph, k * (1 + d), s) for d in LIMIT_DELTAS]
        minus = [_solve_driven(graph, k * (1 - d), s) for d in LIMIT_DELTAS]
        lim_plus = _richardson(plus)
        lim_minus = _richardson(minus)
        scale = max(np.abs(lim_plus).max(), np.abs(lim_minus).max(), 1e-300)
        disagreement = float(np.abs(lim_plus - lim_minus).max() / scale)
        if disagreement > SIDE_TOL:
            raise FermiError(
                f"one-sided limits at k = {k:g}, lead {s} disagree by "
                f"{disagreement:.2e}: non-removable singularity"
            )
        # symmetric average cancels odd orders; extrapolate the even series,
        # whose nodes delta^2 shrink by factor 4
        sym = [0.5 * (p + q) for p, q in zip(plus, minus)]
        x = _richardson(sym, node_ratio=4.0)
        method = "limit"
    lead_in = np.zeros(m, dtype=complex)
    lead_in[s] = 1.0
    field = WaveField(
        k=complex(k),
        edge_coeffs=x[: 2 * n].reshape(n, 2).copy(),
        lead_in=lead_in,
        lead_out=x[2 * n :].copy(),
    )
    return GeneralizedEigenfunction(
        s=s,
        k=k,
        field=field,
        scattering_row=field.lead_out.copy(),
        side_disagreement=disagreement,
        method=method,
    )


def _rates_array(graph: MetricGraph, a_dot) -> np.ndarray:
    if a_dot is None:
        return PerturbationVector.from_graph(graph).as_array(graph)
    if isinstance(a_dot, PerturbationVector):
        return a_dot.as_array(graph)
    if isinstance(a_dot, dict):
        return np.array([a_dot.get(e.id, 0.0) for e in graph.edges])
    return np.asarray(a_dot, dtype=float)


def _vertex_values(graph, system, field, j, end):
    """(value, normal derivative into the vertex) of a field on edge j."""
    k = field.k
    length = system.lengths[j]
    a, b = field.edge_coeffs[j]
    if end == 0:
        value = b
        dnu = -k * a
    else:
        s_l, c_l = np.sin(k * length), np.cos(k * length)
        value = a * s_l + b * c_l
        dnu = k * (a * c_l - b * s_l)
    return value, dnu


def _common_vertex_value(graph, system, field, v):
    """Field value at vertex v, read off the first incident edge or lead."""
    inc = graph.incidence[v][0]
    if inc.kind == "edge":
        value, _ = _vertex_values(graph, system, field, inc.index, inc.end)
        return value
    return field.lead_in[inc.index] + field.lead_out[inc.index]


def volume_term(
    graph: MetricGraph,
    pair: EmbeddedEigenpair,
    gef: GeneralizedEigenfunction,
    a_dot=None,
) -> complex:
    """Bulk part of F_s: k times the rate-weighted overlap of u with e^s."""
    if abs(gef.k - pair.k) > 1e-9 * abs(pair.k):
        raise FermiError("eigenpair and generalized eigenfunction at different k")
    rates = _rates_array(graph, a_dot)
    k = pair.k
    total = 0.0 + 0.0j
    for j in range(graph.n_edges):
        if rates[j] == 0.0:
            continue
        ua, ub = pair.field.edge_coeffs[j]
        ea, eb = gef.field.edge_coeffs[j]
        total += rates[j] * edge_overlap(k, pair.system.lengths[j], ua, ub, ea, eb)
    return -k * total


def vertex_term(
    graph: MetricGraph,
    pair: EmbeddedEigenpair,
    gef: GeneralizedEigenfunction,
    a_dot=None,
) -> complex:
    """Boundary part of F_s, evaluated exactly from the field coefficients."""
    if abs(gef.k - pair.k) > 1e-9 * abs(pair.k):
        raise FermiError("eigenpair and generalized eigenfunction at different k")
    rates = _rates_array(graph, a_dot)
    k = pair.k
    total = 0.0 + 0.0j
    for v in range(len(graph.vertices)):
        u_v = _common_vertex_value(graph, pair.system, pair.field, v)
        e_v = _common_vertex_value(graph, pair.system, gef.field, v)
        for inc in graph.incidence[v]:
            if inc.kind != "edge" or rates[inc.index] == 0.0:
                continue
            _, u_dnu = _vertex_values(graph, pair.system, pair.field, inc.index, inc.end)
            _, e_dnu = _vertex_values(graph, pair.system, gef.field, inc.index, inc.end)
            total += (
                0.25
                * rates[inc.index]
                * (3.0 * u_dnu * np.conj(e_v) - u_v * np.conj(e_dnu))
            )
    return -total / k


@dataclass
class FermiResult:
    """Per-lead decay amplitudes and the resulting curvature of Im k."""

    k: float
    f_values: np.ndarray  # per lead
    volume_terms: np.ndarray
    vertex_terms: np.ndarray
    pair: EmbeddedEigenpair

    @property
    def im_k_ddot(self) -> float:
        return -float(np.sum(np.abs(self.f_values) ** 2))

    @property
    def a_quadratic(self) -> float:
        """Predicted coefficient of t^2 in Im k near t = 0."""
        return 0.5 * self.im_k_ddot


def fermi_rate(graph: MetricGraph, k_embedded: float, a_dot=None) -> FermiResult:
    """Decay-rate curvature Im d^2k/dt^2 = -sum_s |F_s|^2 at an embedded eigenvalue.

    ``a_dot`` defaults to the rates implied by the graph's length families;
    any mapping edge id -> rate (or explicit array in edge order) can be
    substituted to probe the quadratic form.
    """
    pair = embedded_eigenpair(graph, k_embedded)
    m = graph.n_leads
    vols = np.zeros(m, dtype=complex)
    verts = np.zeros(m, dtype=complex)
    for s in range(m):
        gef = generalized_eigenfunction(graph, pair.k, s)
        vols[s] = volume_term(graph, pair, gef, a_dot)
        verts[s] = vertex_term(graph, pair, gef, a_dot)
    return FermiResult(
        k=pair.k,
        f_values=vols + verts,
        volume_terms=vols,
        vertex_terms=verts,
        pair=pair,
    )


def fermi_report_text(result: FermiResult) -> str:
    """Plain-text report: per-lead split, curvature, and quadratic prediction."""
    lines = [
        f"embedded eigenvalue: k = {result.k:.9g} m^-1",
        f"eigenfunction norm check: {result.pair.norm_check:.12g}",
    ]
    for s, (f, vol, vert) in enumerate(
        zip(result.f_values, result.volume_terms, result.vertex_terms)
    ):
        lines.append(
            f"lead {s}: |F| = {abs(f):.9g}   volume = {vol:.6g}   vertex = {vert:.6g}"
        )
    lines.append(f"Im k_ddot = {result.im_k_ddot:.9g} m^-1")
    lines.append(f"a_quadratic = {result.a_quadratic:.9g} m^-1 (Im k ~ a t^2)")
    return "\n".join(lines) + "\n"
