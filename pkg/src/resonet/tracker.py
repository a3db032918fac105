"""Locate secular-determinant zeros and follow them along a length sweep.

Resonances are complex zeros of the secular determinant.  They are refined
by Newton iteration (derivative by central difference) and counted inside
rectangles by the argument principle with adaptive contour sampling.

Cable absorption enters only as a reporting offset: the zero kappa of the
secular determinant does not depend on beta, but the resonance seen in a
frequency sweep of a lossy network sits where the dispersion map
z + i beta sqrt(z) equals kappa.  ``Resonance.k`` stores that shifted
position (equal to kappa when beta = 0) so trajectories and quadratic fits
line up with what line-shape fitting of |det S| extracts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import C_VACUUM, MetricGraph
from .solver import assemble

NEWTON_MAX_ITER = 50
NEWTON_STEP_FACTOR = 1e-7  # central-difference step, relative to |k|
RESIDUAL_TOL = 1e-10  # relative to the local secular scale


class TrackerError(Exception):
    """Zero search failure."""


class ContourError(TrackerError):
    """Winding-number computation could not be completed."""


class TrajectoryError(TrackerError):
    """Continuation failed; carries the partial trajectory."""

    def __init__(self, message: str, partial: "Trajectory"):
        super().__init__(message)
        self.partial = partial


def _secdet(graph: MetricGraph, t: float, k: complex) -> complex:
    return complex(np.linalg.det(assemble(graph, t, k).matrix))


def absorbed_position(kappa: complex, beta: float) -> complex:
    """Frequency-plane resonance position for a secular zero ``kappa``.

    Solves z + i beta sqrt(z) = kappa for z on the physical branch
    (Re sqrt(z) > 0); for beta = 0 this is kappa itself.  The imaginary
    part comes out shifted by about -beta sqrt(Re kappa).
    """
    if beta == 0.0:
        return kappa
    w = (-1j * beta + np.sqrt(4.0 * kappa - beta * beta)) / 2.0
    return complex(w * w)


def seed_from_frequency(nu: float, beta: float = 0.0) -> complex:
    """Secular-plane starting guess for a resonance seen near frequency nu."""
    z = 2.0 * np.pi * nu / C_VACUUM
    return complex(z, beta * np.sqrt(z))


@dataclass
class Resonance:
    """One refined resonance.

    ``k`` is the reported complex wavenumber including the absorption
    offset; ``k_secular`` is the underlying zero of the secular
    determinant.  ``residual`` is |secular det| at ``k_secular`` relative
    to the local secular scale.
    """

    k: complex
    k_secular: complex
    t: float
    beta: float
    residual: float
    iterations: int
    converged: bool

    @property
    def nu(self) -> float:
        return C_VACUUM * self.k.real / (2.0 * np.pi)

    @property
    def g(self) -> float:
        return C_VACUUM * self.k.imag / (2.0 * np.pi)


def _secular_scale(graph: MetricGraph, t: float, k: complex) -> float:
    """Typical |secular det| magnitude near k, away from the zero itself."""
    r = max(abs(k), 1.0)
    probes = [k + 0.05 * r, k - 0.05 * r, k + 0.05j * r, k - 0.05j * r]
    vals = [abs(_secdet(graph, t, p)) for p in probes]
    return max(np.median(vals), 1e-300)


def refine_zero(
    graph: MetricGraph,
    t: float,
    k0: complex,
    beta: float = 0.0,
) -> Resonance:
    """Newton-refine a secular-determinant zero from the guess ``k0``.

    The iteration runs in the secular (lossless) plane; ``beta`` only sets
    the reported position.  A diverging iteration returns its best iterate
    with ``converged = False``.
    """
    k = complex(k0)
    best_k, best_f = k, abs(_secdet(graph, t, k))
    scale = _secular_scale(graph, t, k0)
    iterations = 0
    converged = False
    for iterations in range(1, NEWTON_MAX_ITER + 1):
        f = _secdet(graph, t, k)
        if abs(f) < RESIDUAL_TOL * scale:
            converged = True
            break
        h = abs(k) * NEWTON_STEP_FACTOR
        fp = (_secdet(graph, t, k + h) - _secdet(graph, t, k - h)) / (2.0 * h)
        if fp == 0:
            break
        step = -f / fp
        k = k + step
        fk = abs(_secdet(graph, t, k))
        if fk < best_f:
            best_k, best_f = k, fk
        if abs(step) < 1e-14 * max(abs(k), 1.0):
            converged = best_f < 1e-6 * scale
            break
    k = best_k
    return Resonance(
        k=absorbed_position(k, beta),
        k_secular=k,
        t=t,
        beta=beta,
        residual=best_f / scale,
        iterations=iterations,
        converged=converged,
    )


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box in the complex-k plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def inflate(self, factor: float) -> "Rectangle":
        cr = 0.5 * (self.re_min + self.re_max)
        ci = 0.5 * (self.im_min + self.im_max)
        hr = 0.5 * (self.re_max - self.re_min) * factor
        hi = 0.5 * (self.im_max - self.im_min) * factor
        return Rectangle(cr - hr, cr + hr, ci - hi, ci + hi)

    def contains(self, k: complex) -> bool:
        return (
            self.re_min <= k.real <= self.re_max
            and self.im_min <= k.imag <= self.im_max
        )

    def corners(self) -> list[complex]:
        return [
            complex(self.re_min, self.im_min),
            complex(self.re_max, self.im_min),
            complex(self.re_max, self.im_max),
            complex(self.re_min, self.im_max),
        ]


class _ZeroOnContour(Exception):
    pass


def count_zeros(
    graph: MetricGraph,
    t: float,
    contour: Rectangle,
    samples_per_side: int = 48,
    max_depth: int = 36,
) -> int:
    """Zeros of the secular determinant inside ``contour`` (argument principle).

    Phase increments along the contour are accumulated on an adaptive
    sampling: any segment turning by more than pi/2 is bisected.  A sample
    landing on (numerically) a zero inflates the contour slightly and
    retries; a winding that refuses to come out near an integer raises
    :class:`ContourError`.
    """
    rect = contour
    for _attempt in range(6):
        pts: list[complex] = []
        corners = rect.corners() + [rect.corners()[0]]
        for a, b in zip(corners, corners[1:]):
            for i in range(samples_per_side):
                pts.append(a + (b - a) * i / samples_per_side)
        pts.append(pts[0])
        vals = [_secdet(graph, t, p) for p in pts]
        scale = float(np.median(np.abs(vals)))
        if scale == 0.0 or min(abs(v) for v in vals) < 1e-12 * scale:
            rect = rect.inflate(1.03)
            continue

        def segment(k1, k2, f1, f2, depth):
            d = np.angle(f2 / f1)
            if abs(d) <= 0.5 * np.pi:
                return d
            if depth <= 0:
                raise _ZeroOnContour
            km = 0.5 * (k1 + k2)
            fm = _secdet(graph, t, km)
            if abs(fm) < 1e-12 * scale:
                raise _ZeroOnContour
            return segment(k1, km, f1, fm, depth - 1) + segment(
                km, k2, fm, f2, depth - 1
            )

        try:
            total = 0.0
            for (k1, f1), (k2, f2) in zip(zip(pts, vals), zip(pts[1:], vals[1:])):
                total += segment(k1, k2, f1, f2, max_depth)
        except _ZeroOnContour:
            rect = rect.inflate(1.03)
            continue
        winding = total / (2.0 * np.pi)
        nearest = round(winding)
        if abs(winding - nearest) > 0.05:
            raise ContourError(
                f"non-integer winding {winding:.4f} after refinement"
            )
        return int(nearest)
    raise ContourError("secular determinant vanishes on every attempted contour")


def find_zeros_in_box(
    graph: MetricGraph,
    t: float,
    box: Rectangle,
    grid: tuple[int, int] = (12, 8),
    beta: float = 0.0,
) -> list[Resonance]:
    """Distinct refined zeros inside ``box``, found by seeding a dense grid."""
    res: list[Resonance] = []
    tol = 1e-7 * max(abs(box.re_max), 1.0)
    for re in np.linspace(box.re_min, box.re_max, grid[0]):
        for im in np.linspace(box.im_min, box.im_max, grid[1]):
            cand = refine_zero(graph, t, complex(re, im), beta=beta)
            if not cand.converged or not box.contains(cand.k_secular):
                continue
            if any(abs(cand.k_secular - r.k_secular) < tol for r in res):
                continue
            res.append(cand)
    res.sort(key=lambda r: r.k_secular.real)
    return res


def topological_seed(
    graph: MetricGraph,
    box: Rectangle,
    beta: float = 0.0,
) -> Resonance:
    """Resonance in ``box`` at t = 0 whose lossless limit is closest to real.

    Topological resonances originate from embedded (real) eigenvalues, so
    among several candidates the one with the smallest |Im k_secular| wins.
    """
    zeros = find_zeros_in_box(graph, 0.0, box, beta=beta)
    if not zeros:
        raise TrackerError("no secular zero found in the seed box")
    return min(zeros, key=lambda r: abs(r.k_secular.imag))


@dataclass
class QuadraticFit:
    """Least-squares fit of Im k against (t^2, 1)."""

    a: float
    b: float
    stderr_a: float
    stderr_b: float
    covariance: np.ndarray
    window: int


@dataclass
class Trajectory:
    """Resonance positions along a t grid, ordered by t."""

    points: list[Resonance] = field(default_factory=list)

    def t_values(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    def k_values(self) -> np.ndarray:
        return np.array([p.k for p in self.points])

    def center_index(self) -> int:
        return int(np.argmin(np.abs(self.t_values())))


def trace_trajectory(
    graph: MetricGraph,
    t_grid,
    seed: Resonance,
    beta: float = 0.0,
) -> Trajectory:
    """Continue ``seed`` (refined, at t = 0) over ``t_grid``.

    Continuation walks outward from t = 0 in both directions, reusing the
    previous zero as the next Newton guess.  A continuation step whose |dk|
    exceeds ten times the median accepted step is treated as a branch jump:
    the t step is halved (up to four times) and walked through; if the
    guard still trips, the partial trajectory is raised.
    """
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    i0 = int(np.argmin(np.abs(t_grid)))
    if abs(t_grid[i0]) > 1e-9 * max(abs(t_grid[0]), abs(t_grid[-1]), 1e-12):
        raise TrackerError("t grid must contain 0")
    if not seed.converged:
        raise TrackerError("trajectory seed is not a refined resonance")

    points: dict[int, Resonance] = {i0: seed}
    steps: list[float] = []

    def advance(prev: Resonance, t_next: float) -> Resonance:
        guard = 10.0 * float(np.median(steps)) if len(steps) >= 3 else np.inf
        for halving in range(5):
            nsub = 2**halving
            current = prev
            ok = True
            for j in range(1, nsub + 1):
                t_sub = prev.t + (t_next - prev.t) * j / nsub
                cand = refine_zero(graph, t_sub, current.k_secular, beta=beta)
                if not cand.converged:
                    ok = False
                    break
                current = cand
            if not ok:
                continue
            jump = abs(current.k_secular - prev.k_secular)
            if jump <= max(guard, 1e-30) or not np.isfinite(guard):
                steps.append(jump)
                return current
        partial = Trajectory([points[i] for i in sorted(points)])
        raise TrajectoryError(
            f"branch-jump guard still violated at t={t_next:g} after 4 halvings",
            partial,
        )

    for idx in range(i0 + 1, len(t_grid)):
        points[idx] = advance(points[idx - 1], t_grid[idx])
    for idx in range(i0 - 1, -1, -1):
        points[idx] = advance(points[idx + 1], t_grid[idx])
    return Trajectory([points[i] for i in sorted(points)])


def fit_quadratic(trajectory: Trajectory, window: int) -> QuadraticFit:
    """Fit Im k = a t^2 + b over ``window`` central points of the trajectory.

    ``window`` must be odd, at least 3, and centered on the t = 0 point.
    Coefficients and their covariance come from the normal equations; the
    residuals are orthogonal to the design columns by construction.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    center = trajectory.center_index()
    half = window // 2
    lo, hi = center - half, center + half + 1
    if lo < 0 or hi > len(trajectory.points):
        raise ValueError(
            f"trajectory has too few points for window {window} around t=0"
        )
    pts = trajectory.points[lo:hi]
    t = np.array([p.t for p in pts])
    y = np.array([p.k.imag for p in pts])
    design = np.column_stack([t**2, np.ones_like(t)])
    gram = design.T @ design
    coef = np.linalg.solve(gram, design.T @ y)
    resid = y - design @ coef
    dof = len(pts) - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else float("nan")
    cov = sigma2 * np.linalg.inv(gram)
    return QuadraticFit(
        a=float(coef[0]),
        b=float(coef[1]),
        stderr_a=float(np.sqrt(abs(cov[0, 0]))),
        stderr_b=float(np.sqrt(abs(cov[1, 1]))),
        covariance=cov,
        window=window,
    )


def trajectory_to_csv(trajectory: Trajectory, manifest: str = "") -> str:
    """CSV text: t, complex k, frequency-domain twin, refinement residual."""
    lines = []
    if manifest:
        lines.append(f"# manifest: {manifest}")
    lines.append("t,re_k_per_m,im_k_per_m,nu_Hz,g_Hz,residual")
    for p in trajectory.points:
        lines.append(
            f"{p.t:.17g},{p.k.real:.17g},{p.k.imag:.17g},"
            f"{p.nu:.17g},{p.g:.17g},{p.residual:.3g}"
        )
    return "\n".join(lines) + "\n"


def fit_report_text(fit: QuadraticFit, a_theory: float | None = None) -> str:
    """Plain-text block for a quadratic fit, optionally with the predicted a."""
    lines = [
        "quadratic fit of Im k = a t^2 + b",
        f"window: {fit.window} central points",
        f"a = {fit.a:.6g} m^-1  (stderr {fit.stderr_a:.2g})",
        f"b = {fit.b:.6g} m^-1  (stderr {fit.stderr_b:.2g})",
    ]
    if a_theory is not None:
        lines.append(f"a_theory = {a_theory:.6g} m^-1 (half the decay-rate curvature)")
    return "\n".join(lines) + "\n"
