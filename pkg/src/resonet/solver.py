"""Wave problem on a metric graph at complex wavenumber k.

On internal edge j the field is  alpha_j sin(kx) + beta_j cos(kx); on lead s
it is  in_s exp(-ikx) + out_s exp(+ikx)  with x = 0 at the attach vertex.
Vertex conditions are standard (Kirchhoff) coupling: the field value agrees
across all incident edges, and the sum of derivatives taken into the vertex
vanishes.  Collecting one continuity chain plus one derivative row per
vertex gives a square system of size 2N + M in the unknowns
(alpha_j, beta_j, out_s); the incoming amplitudes drive the right-hand side.

Conventions fixed here and relied on elsewhere:

* row order: vertices ascending, continuity rows before the derivative row;
* the derivative row is divided by k so matrix entries stay O(1) across
  sweeps (this rescales the determinant but moves no zeros, since k != 0);
* the secular determinant is det of the driven-side matrix with zero drive;
  its complex zeros with outgoing-only behavior are the resonances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import C_VACUUM, MetricGraph

#: reciprocal condition number below which a solve is flagged as singular
RCOND_SINGULAR = 1e-12


class SolverError(Exception):
    """Numerical failure in the wave solver."""


@dataclass
class WaveField:
    """Solution coefficients at one (t, k): per-edge (alpha, beta), per-lead in/out."""

    k: complex
    edge_coeffs: np.ndarray  # (N, 2) complex
    lead_in: np.ndarray  # (M,) complex
    lead_out: np.ndarray  # (M,) complex

    def edge_value(self, system: "SecularSystem", j: int, x: float) -> complex:
        a, b = self.edge_coeffs[j]
        return a * np.sin(self.k * x) + b * np.cos(self.k * x)


@dataclass
class SecularSystem:
    """Assembled vertex-condition system A x = -B @ in at one (graph, t, k).

    ``matrix`` multiplies the unknown vector (alpha_0, beta_0, ..., out_0,
    ...); ``drive`` multiplies the incoming amplitudes.  ``lengths`` are the
    edge lengths at the assembly's t.
    """

    graph: MetricGraph
    t: float
    k: complex
    lengths: np.ndarray
    matrix: np.ndarray
    drive: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def rhs(self, s: int) -> np.ndarray:
        """Right-hand side for unit incoming amplitude on lead s."""
        return -self.drive[:, s]

    def unpack(self, x: np.ndarray, lead_in: np.ndarray | None = None) -> WaveField:
        n = self.graph.n_edges
        m = self.graph.n_leads
        if lead_in is None:
            lead_in = np.zeros(m, dtype=complex)
        return WaveField(
            k=self.k,
            edge_coeffs=x[: 2 * n].reshape(n, 2).copy(),
            lead_in=np.asarray(lead_in, dtype=complex),
            lead_out=x[2 * n :].copy(),
        )

    def residual(self, field: WaveField) -> float:
        """Relative residual of the vertex conditions under ``field``."""
        x = np.concatenate([field.edge_coeffs.reshape(-1), field.lead_out])
        r = self.matrix @ x + self.drive @ field.lead_in
        scale = max(np.abs(self.matrix).max(), 1.0) * max(np.abs(x).max(), 1.0)
        return float(np.abs(r).max() / scale)


def assemble(graph: MetricGraph, t: float, k: complex) -> SecularSystem:
    """Build the vertex-condition system at sweep parameter t and wavenumber k."""
    if k == 0:
        raise SolverError("k = 0: the sin/cos edge basis degenerates")
    n = graph.n_edges
    m = graph.n_leads
    size = 2 * n + m
    lengths = graph.lengths_at(t)
    a = np.zeros((size, size), dtype=complex)
    b = np.zeros((size, m), dtype=complex)

    sin_kl = np.sin(k * lengths)
    cos_kl = np.cos(k * lengths)

    def add_value(row, inc, sign):
        if inc.kind == "edge":
            j = inc.index
            if inc.end == 0:
                a[row, 2 * j + 1] += sign
            else:
                a[row, 2 * j] += sign * sin_kl[j]
                a[row, 2 * j + 1] += sign * cos_kl[j]
        else:
            a[row, 2 * n + inc.index] += sign
            b[row, inc.index] += sign

    def add_normal_derivative(row, inc):
        # derivative into the vertex, divided by k
        if inc.kind == "edge":
            j = inc.index
            if inc.end == 0:
                a[row, 2 * j] += -1.0
            else:
                a[row, 2 * j] += cos_kl[j]
                a[row, 2 * j + 1] += -sin_kl[j]
        else:
            a[row, 2 * n + inc.index] += -1j
            b[row, inc.index] += 1j

    row = 0
    for v in range(len(graph.vertices)):
        incident = graph.incidence[v]
        for first, second in zip(incident, incident[1:]):
            add_value(row, first, 1.0)
            add_value(row, second, -1.0)
            row += 1
        for inc in incident:
            add_normal_derivative(row, inc)
        row += 1
    assert row == size
    return SecularSystem(graph, t, k, lengths, a, b)


def secular_det(graph: MetricGraph, t: float, k: complex) -> complex:
    """Determinant of the homogeneous (no-drive) vertex-condition system."""
    return complex(np.linalg.det(assemble(graph, t, k).matrix))


@dataclass
class ScatterResult:
    """Scattering matrix and determinants at one (graph, t, k)."""

    k: complex
    s_matrix: np.ndarray  # (M, M)
    det_s: complex
    secular: complex
    rcond: float
    flagged: bool  # near-singular system; values from least squares

    @property
    def abs_det_s(self) -> float:
        return abs(self.det_s)


def scattering_matrix(graph: MetricGraph, t: float, k: complex) -> ScatterResult:
    """S(k): column s holds outgoing amplitudes for unit drive on lead s.

    A near-singular system (reciprocal condition below ``RCOND_SINGULAR``,
    i.e. k at a resonance) is not an error: the result is computed by least
    squares and flagged.  Resonance searches exploit exactly this flag.
    """
    if graph.n_leads == 0:
        raise SolverError("scattering requires at least one lead")
    system = assemble(graph, t, k)
    a = system.matrix
    n = graph.n_edges
    sing = np.linalg.svd(a, compute_uv=False)
    rcond = float(sing[-1] / sing[0]) if sing[0] > 0 else 0.0
    flagged = rcond < RCOND_SINGULAR
    rhs = -system.drive
    if flagged:
        x = np.linalg.lstsq(a, rhs, rcond=None)[0]
    else:
        x = np.linalg.solve(a, rhs)
    s = x[2 * n :, :]
    sign, logdet = np.linalg.slogdet(a)
    secular = complex(sign * np.exp(logdet))
    return ScatterResult(
        k=k,
        s_matrix=s,
        det_s=complex(np.linalg.det(s)),
        secular=secular,
        rcond=rcond,
        flagged=flagged,
    )


def solve_wavefield(graph: MetricGraph, t: float, k: complex, s: int) -> WaveField:
    """Full coefficient set for unit incoming amplitude on lead ``s``."""
    system = assemble(graph, t, k)
    x = np.linalg.solve(system.matrix, system.rhs(s))
    lead_in = np.zeros(graph.n_leads, dtype=complex)
    lead_in[s] = 1.0
    return system.unpack(x, lead_in)


def dispersion_k(nu: float, beta: float) -> complex:
    """Map frequency to the complex wavenumber of a lossy cable.

    Re k = 2 pi nu / c;  Im k = beta * sqrt(2 pi nu / c).  beta = 0 gives
    the exact lossless 2 pi nu / c.
    """
    if nu <= 0:
        raise ValueError(f"frequency must be positive, got {nu:g}")
    re = 2.0 * np.pi * nu / C_VACUUM
    if beta == 0.0:
        return complex(re, 0.0)
    return complex(re, beta * np.sqrt(re))


@dataclass
class SweepTrace:
    """|det S| versus frequency on a uniform grid."""

    nu: np.ndarray
    det_s: np.ndarray
    flagged: np.ndarray
    t: float
    beta: float

    @property
    def abs_det_s(self) -> np.ndarray:
        return np.abs(self.det_s)

    def rows(self):
        mags = np.abs(self.det_s)  # scalar abs() can differ by 1 ulp
        for nu, d, m in zip(self.nu, self.det_s, mags):
            yield nu, d.real, d.imag, m


def trace_detS(
    graph: MetricGraph,
    t: float,
    nu_min: float,
    nu_max: float,
    steps: int,
    beta: float = 0.0,
    workers: int = 1,
) -> SweepTrace:
    """Sweep det S over ``steps`` frequencies in [nu_min, nu_max].

    Ill-conditioned grid points are flagged, not fatal.  With workers > 1
    the grid is evaluated concurrently; output order is by grid index
    regardless of scheduling.
    """
    if not 0 < nu_min < nu_max:
        raise ValueError("need 0 < nu_min < nu_max")
    if steps < 2:
        raise ValueError("need at least 2 sweep points")
    nus = np.linspace(nu_min, nu_max, steps)

    def one(nu: float):
        r = scattering_matrix(graph, t, dispersion_k(nu, beta))
        return r.det_s, r.flagged

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, nus))
    else:
        results = [one(nu) for nu in nus]

    det = np.array([r[0] for r in results], dtype=complex)
    flags = np.array([r[1] for r in results], dtype=bool)
    return SweepTrace(nu=nus, det_s=det, flagged=flags, t=t, beta=beta)


def trace_to_csv(trace: SweepTrace, manifest: str = "") -> str:
    """CSV text for a sweep trace: full double precision, optional manifest header."""
    lines = []
    if manifest:
        lines.append(f"# manifest: {manifest}")
    lines.append("nu_Hz,re_detS,im_detS,abs_detS")
    for nu, re, im, mod in trace.rows():
        lines.append(f"{nu:.17g},{re:.17g},{im:.17g},{mod:.17g}")
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse a sweep CSV back into (nu, |det S|) arrays.

    Raises ValueError naming the 1-based row number of the first bad row.
    """
    nus: list[float] = []
    mags: list[float] = []
    header_seen = False
    for row_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line.split(",")[0] != "nu_Hz":
                raise ValueError(f"row {row_no}: expected header starting with nu_Hz")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"row {row_no}: expected 4 columns, got {len(parts)}")
        try:
            nus.append(float(parts[0]))
            mags.append(float(parts[3]))
        except ValueError:
            raise ValueError(f"row {row_no}: non-numeric field") from None
    if not header_seen:
        raise ValueError("row 1: missing header")
    return np.array(nus), np.array(mags)
