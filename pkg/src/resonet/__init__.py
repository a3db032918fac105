"""Open metric-graph wave networks with Kirchhoff coupling.

The package simulates microwave-network style scattering on metric graphs:
secular systems and scattering matrices at complex wavenumber, resonance
location and continuation along edge-length sweeps, decay-rate curvature of
perturbed embedded eigenvalues, and multi-Lorentzian fitting of |det S|
frequency traces.
"""

from .graph import (
    C_VACUUM,
    GraphSpecError,
    GraphSpecSemanticError,
    GraphSpecSyntaxError,
    InternalEdge,
    Lead,
    MetricGraph,
    ParsedSpec,
    PerturbationVector,
    Sweep,
    Vertex,
    a_dot,
    cutoff_frequency,
    length_at,
    load_graph_spec,
    optical_length,
    parse_graph_spec,
    serialize_graph_spec,
)
from .solver import (
    ScatterResult,
    SecularSystem,
    SolverError,
    SweepTrace,
    WaveField,
    assemble,
    dispersion_k,
    scattering_matrix,
    secular_det,
    solve_wavefield,
    trace_detS,
    trace_from_csv,
    trace_to_csv,
)
from .tracker import (
    ContourError,
    QuadraticFit,
    Rectangle,
    Resonance,
    TrackerError,
    Trajectory,
    TrajectoryError,
    absorbed_position,
    count_zeros,
    find_zeros_in_box,
    fit_quadratic,
    refine_zero,
    seed_from_frequency,
    topological_seed,
    trace_trajectory,
    trajectory_to_csv,
)
from .fermi import (
    EmbeddedEigenpair,
    FermiError,
    FermiResult,
    GeneralizedEigenfunction,
    embedded_eigenpair,
    fermi_rate,
    fermi_report_text,
    generalized_eigenfunction,
    vertex_term,
    volume_term,
)
from .lineshape import (
    FitOutcome,
    LineshapeError,
    LineshapeModel,
    add_noise,
    eval_lineshape,
    fit_lineshape,
    fit_report_csv,
    seed_initial_guess,
)

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path to a bundled graph file, e.g. ``fixture_path("two_edge.graph")``."""
    from importlib.resources import files

    return files("resonet") / "fixtures" / name
