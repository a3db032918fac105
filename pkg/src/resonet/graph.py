"""Metric-graph data model and the line-oriented graph file format.

A network is a finite metric graph: vertices joined by internal edges of
positive length, plus semi-infinite leads attached to vertices.  Internal
edge lengths may depend on a sweep parameter ``t`` through the affine family

    length(t) = base_length * (1 + slope * t)

whose logarithmic shrink rate at t = 0 is ``a_dot = -slope``.

Graph files are UTF-8 text, one record per line, ``#`` starts a comment:

    vertex <id>
    edge <id> <tail> <head> length <meters> [slope <c>]
    lead <id> <vertex>
    sweep t <min> <max> <steps>
    absorption beta <value>          # cable loss coefficient, m^-1/2

Vertex ids must be contiguous from 0.  Edge and lead ids share one
namespace and must be unique.  The loader validates endpoint references,
positivity of every length over the declared sweep range, and connectivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

#: speed of light in vacuum, m/s
C_VACUUM = 299792458.0


class GraphSpecError(Exception):
    """Base class for graph-file problems."""


class GraphSpecSyntaxError(GraphSpecError):
    """Malformed line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class GraphSpecSemanticError(GraphSpecError):
    """Structurally invalid graph; names the violated invariant."""


class Incidence(NamedTuple):
    """One edge-or-lead attachment at a vertex.

    ``kind`` is ``"edge"`` or ``"lead"``, ``index`` the position in the
    graph's edge/lead tuple, ``end`` 0 at the tail (x = 0) and 1 at the
    head (x = length) for edges, None for leads.
    """

    kind: str
    index: int
    end: int | None


@dataclass(frozen=True)
class Vertex:
    id: int


@dataclass(frozen=True)
class InternalEdge:
    """Finite edge parametrized by x in (0, length); x = 0 at ``tail``."""

    id: int
    tail: int
    head: int
    base_length: float
    slope: float = 0.0

    def length_at(self, t: float) -> float:
        """Edge length at sweep parameter t.  Raises if not positive."""
        value = self.base_length * (1.0 + self.slope * t)
        if value <= 0.0:
            raise ValueError(
                f"edge {self.id}: length {value:g} m not positive at t={t:g}"
            )
        return value

    @property
    def a_dot(self) -> float:
        """Shrink rate -d(log length)/dt at t = 0; equals -slope."""
        return -self.slope


@dataclass(frozen=True)
class Lead:
    """Semi-infinite edge, x in (0, inf), x = 0 at ``attach_vertex``."""

    id: int
    attach_vertex: int


@dataclass(frozen=True)
class Sweep:
    """Declared t range: ``steps`` evenly spaced points including ends."""

    t_min: float
    t_max: float
    steps: int

    def grid(self):
        import numpy as np

        return np.linspace(self.t_min, self.t_max, self.steps)


@dataclass(frozen=True)
class MetricGraph:
    """Immutable vertex/edge/lead structure with per-vertex incidence.

    Construct through :meth:`build`, which validates all structural
    invariants and fills the incidence table.  Edges and leads are stored
    sorted by id; solver matrices index them by tuple position.
    """

    vertices: tuple[Vertex, ...]
    edges: tuple[InternalEdge, ...]
    leads: tuple[Lead, ...]
    incidence: tuple[tuple[Incidence, ...], ...] = field(repr=False)

    @classmethod
    def build(
        cls,
        vertices: Iterable[Vertex],
        edges: Iterable[InternalEdge],
        leads: Iterable[Lead],
    ) -> "MetricGraph":
        vertices = tuple(sorted(vertices, key=lambda v: v.id))
        edges = tuple(sorted(edges, key=lambda e: e.id))
        leads = tuple(sorted(leads, key=lambda l: l.id))
        _check_ids(vertices, edges, leads)
        n = len(vertices)
        for e in edges:
            for v in (e.tail, e.head):
                if not 0 <= v < n:
                    raise GraphSpecSemanticError(
                        f"edge {e.id} references unknown vertex {v}"
                    )
        for l in leads:
            if not 0 <= l.attach_vertex < n:
                raise GraphSpecSemanticError(
                    f"lead {l.id} references unknown vertex {l.attach_vertex}"
                )
        incidence = _build_incidence(vertices, edges, leads)
        graph = cls(vertices, edges, leads, incidence)
        graph.validate()
        return graph

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_leads(self) -> int:
        return len(self.leads)

    def edge_by_id(self, edge_id: int) -> InternalEdge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(f"unknown edge id {edge_id}")

    def lengths_at(self, t: float):
        """Array of edge lengths at sweep parameter t, in edge order."""
        import numpy as np

        return np.array([e.length_at(t) for e in self.edges])

    def degree(self, vertex_id: int) -> int:
        return len(self.incidence[vertex_id])

    def is_connected(self) -> bool:
        """Breadth-first reachability of every vertex through internal edges."""
        if not self.vertices:
            return False
        seen = {0}
        queue = [0]
        adj: dict[int, list[int]] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            adj[e.tail].append(e.head)
            adj[e.head].append(e.tail)
        while queue:
            v = queue.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == len(self.vertices)

    def validate(self) -> None:
        """Re-check every structural invariant; raises on violation."""
        ids = [v.id for v in self.vertices]
        if ids != list(range(len(ids))):
            raise GraphSpecSemanticError(
                f"vertex ids must be contiguous from 0, got {ids}"
            )
        for e in self.edges:
            for v in (e.tail, e.head):
                if not 0 <= v < len(self.vertices):
                    raise GraphSpecSemanticError(
                        f"edge {e.id} references unknown vertex {v}"
                    )
            if e.base_length <= 0:
                raise GraphSpecSemanticError(
                    f"edge {e.id} has nonpositive length {e.base_length:g}"
                )
            if not math.isfinite(e.a_dot):
                raise GraphSpecSemanticError(f"edge {e.id} has non-finite rate")
        for l in self.leads:
            if not 0 <= l.attach_vertex < len(self.vertices):
                raise GraphSpecSemanticError(
                    f"lead {l.id} references unknown vertex {l.attach_vertex}"
                )
        # incidence consistent with endpoint data, checked both ways
        if self.incidence != _build_incidence(self.vertices, self.edges, self.leads):
            raise GraphSpecSemanticError("incidence table inconsistent with edges")
        total = sum(len(row) for row in self.incidence)
        if total != 2 * self.n_edges + self.n_leads:
            raise GraphSpecSemanticError("incidence count != 2N + M")
        if not self.is_connected():
            raise GraphSpecSemanticError("graph is not connected")


def _check_ids(vertices, edges, leads) -> None:
    seen_v: set[int] = set()
    for v in vertices:
        if v.id in seen_v:
            raise GraphSpecSemanticError(f"duplicate vertex id {v.id}")
        seen_v.add(v.id)
    seen: set[int] = set()
    for item in list(edges) + list(leads):
        if item.id in seen:
            raise GraphSpecSemanticError(f"duplicate edge/lead id {item.id}")
        seen.add(item.id)


def _build_incidence(vertices, edges, leads):
    rows: list[list[Incidence]] = [[] for _ in vertices]
    for j, e in enumerate(edges):
        rows[e.tail].append(Incidence("edge", j, 0))
        rows[e.head].append(Incidence("edge", j, 1))
    for s, l in enumerate(leads):
        rows[l.attach_vertex].append(Incidence("lead", s, None))
    return tuple(tuple(row) for row in rows)


@dataclass(frozen=True)
class PerturbationVector:
    """Edge-id -> shrink rate ``a_dot`` at t = 0, taken from length families."""

    rates: dict[int, float]

    @classmethod
    def from_graph(cls, graph: MetricGraph) -> "PerturbationVector":
        return cls({e.id: e.a_dot for e in graph.edges})

    def as_array(self, graph: MetricGraph):
        """Rates in the graph's edge order."""
        import numpy as np

        return np.array([self.rates.get(e.id, 0.0) for e in graph.edges])


@dataclass(frozen=True)
class ParsedSpec:
    """Everything a graph file declares."""

    graph: MetricGraph
    perturbation: PerturbationVector
    sweep: Sweep | None
    beta: float


def length_at(edge: InternalEdge, t: float) -> float:
    """Length of ``edge`` at sweep parameter t (meters)."""
    return edge.length_at(t)


def a_dot(graph: MetricGraph, edge_id: int) -> float:
    """Shrink rate of one edge's length family at t = 0."""
    return graph.edge_by_id(edge_id).a_dot


def optical_length(geometric_length: float, epsilon: float) -> float:
    """Optical (wave-propagation) length of a cable of given geometric length.

    ``epsilon`` is the dielectric constant of the filling; the optical
    length is geometric_length * sqrt(epsilon).
    """
    if geometric_length <= 0:
        raise ValueError(f"geometric length must be positive, got {geometric_length:g}")
    if epsilon < 1.0:
        raise ValueError(f"dielectric constant must be >= 1, got {epsilon:g}")
    return geometric_length * math.sqrt(epsilon)


def cutoff_frequency(r1: float, r2: float, epsilon: float) -> float:
    """Cutoff of the first non-TEM coax mode, c / (pi (r1 + r2) sqrt(eps)).

    ``r1`` and ``r2`` are the inner and outer conductor radii in meters.
    Sweeps must stay below this frequency for the single-mode model to hold.
    """
    if not 0 < r1 < r2:
        raise ValueError(f"need 0 < r1 < r2, got r1={r1:g}, r2={r2:g}")
    if epsilon < 1.0:
        raise ValueError(f"dielectric constant must be >= 1, got {epsilon:g}")
    return C_VACUUM / (math.pi * (r1 + r2) * math.sqrt(epsilon))


def parse_graph_spec(text: str) -> ParsedSpec:
    """Parse a graph file; returns the validated structure.

    Raises :class:`GraphSpecSyntaxError` with a line number for malformed
    lines and :class:`GraphSpecSemanticError` for violated invariants
    (duplicate ids, dangling endpoints, nonpositive lengths, lengths that
    become nonpositive inside the declared sweep range, disconnection).
    """
    vertices: list[Vertex] = []
    edges: list[InternalEdge] = []
    leads: list[Lead] = []
    sweep: Sweep | None = None
    beta: float | None = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kw = tok[0]
        try:
            if kw == "vertex":
                if len(tok) != 2:
                    raise ValueError("expected: vertex <id>")
                vertices.append(Vertex(int(tok[1])))
            elif kw == "edge":
                if len(tok) not in (6, 8) or tok[4] != "length":
                    raise ValueError(
                        "expected: edge <id> <tail> <head> length <m> [slope <c>]"
                    )
                slope = 0.0
                if len(tok) == 8:
                    if tok[6] != "slope":
                        raise ValueError("expected 'slope' keyword")
                    slope = float(tok[7])
                edges.append(
                    InternalEdge(int(tok[1]), int(tok[2]), int(tok[3]), float(tok[5]), slope)
                )
            elif kw == "lead":
                if len(tok) != 3:
                    raise ValueError("expected: lead <id> <vertex>")
                leads.append(Lead(int(tok[1]), int(tok[2])))
            elif kw == "sweep":
                if len(tok) != 5 or tok[1] != "t":
                    raise ValueError("expected: sweep t <min> <max> <steps>")
                if sweep is not None:
                    raise ValueError("duplicate sweep line")
                sweep = Sweep(float(tok[2]), float(tok[3]), int(tok[4]))
            elif kw == "absorption":
                if len(tok) != 3 or tok[1] != "beta":
                    raise ValueError("expected: absorption beta <value>")
                if beta is not None:
                    raise ValueError("duplicate absorption line")
                beta = float(tok[2])
            else:
                raise ValueError(f"unknown keyword {kw!r}")
        except GraphSpecError:
            raise
        except ValueError as exc:
            raise GraphSpecSyntaxError(line_no, str(exc)) from None

    graph = MetricGraph.build(vertices, edges, leads)
    if sweep is not None:
        if sweep.steps < 2:
            raise GraphSpecSemanticError("sweep needs at least 2 steps")
        if sweep.t_min >= sweep.t_max:
            raise GraphSpecSemanticError("sweep requires t_min < t_max")
        for e in graph.edges:
            # affine law: positivity at both endpoints covers the whole range
            for t in (sweep.t_min, sweep.t_max):
                try:
                    e.length_at(t)
                except ValueError as exc:
                    raise GraphSpecSemanticError(
                        f"sweep range violates positivity: {exc}"
                    ) from None
    if beta is not None and beta < 0:
        raise GraphSpecSemanticError(f"absorption beta must be >= 0, got {beta:g}")
    return ParsedSpec(
        graph=graph,
        perturbation=PerturbationVector.from_graph(graph),
        sweep=sweep,
        beta=beta if beta is not None else 0.0,
    )


def serialize_graph_spec(spec: ParsedSpec) -> str:
    """Canonical text form; reparses to a structurally equal spec."""
    out: list[str] = []
    for v in spec.graph.vertices:
        out.append(f"vertex {v.id}")
    for e in spec.graph.edges:
        line = f"edge {e.id} {e.tail} {e.head} length {e.base_length!r}"
        if e.slope != 0.0:
            line += f" slope {e.slope!r}"
        out.append(line)
    for l in spec.graph.leads:
        out.append(f"lead {l.id} {l.attach_vertex}")
    if spec.sweep is not None:
        s = spec.sweep
        out.append(f"sweep t {s.t_min!r} {s.t_max!r} {s.steps}")
    if spec.beta != 0.0:
        out.append(f"absorption beta {spec.beta!r}")
    return "\n".join(out) + "\n"


def load_graph_spec(path) -> ParsedSpec:
    """Read and parse a graph file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph_spec(fh.read())
