"""Multi-Lorentzian fitting of |det S| traces.

Nearly degenerate resonances are extracted from a frequency sweep the same
way the measurement pipeline does it: the modulus of a sum of two or three
complex Lorentzians with a linear complex baseline,

    f(nu) = sum_m  i nu A_m / (nu^2 - (nu_m + i g_m)^2)  + baseline(nu),

is fitted to |det S(nu)| by damped (Levenberg-Marquardt) least squares on
the modulus.  The order-2 baseline is B (nu - nu_1) + C; order 3 uses
B_1 (nu - nu_1) + B_2 (nu - nu_2) + C.  A_m and the B's are complex; the
modulus objective leaves one global phase free, which is fixed by keeping
C real.  The raw order-3 baseline parameters are degenerate with C, so fit
outcomes also expose the reduced (slope, intercept) baseline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

POLE_EPS = 1e-12
MAX_ITER = 500
COST_RTOL = 1e-10
STEP_TOL = 1e-12


class LineshapeError(Exception):
    """Seeding or fitting failure."""


class PoleProximityWarning(UserWarning):
    pass


@dataclass
class LineshapeModel:
    """Sum of ``order`` complex Lorentzians plus a linear complex baseline."""

    order: int
    amplitudes: np.ndarray  # complex, (order,)
    nu: np.ndarray  # Hz, (order,)
    g: np.ndarray  # Hz, (order,); negative for decaying resonances
    baselines: np.ndarray  # complex; (1,) for order 2, (2,) for order 3
    offset: complex  # C; the fitter keeps Im C = 0

    def __post_init__(self):
        if self.order not in (2, 3):
            raise ValueError("order must be 2 or 3")
        self.amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        self.nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        self.g = np.atleast_1d(np.asarray(self.g, dtype=float))
        self.baselines = np.atleast_1d(np.asarray(self.baselines, dtype=complex))
        expected_b = 1 if self.order == 2 else 2
        if (
            len(self.amplitudes) != self.order
            or len(self.nu) != self.order
            or len(self.g) != self.order
            or len(self.baselines) != expected_b
        ):
            raise ValueError("parameter lengths inconsistent with order")

    def effective_baseline(self) -> tuple[complex, complex]:
        """Reduced (slope, intercept): the identifiable part of the baseline."""
        slope = complex(np.sum(self.baselines))
        intercept = complex(
            self.offset - np.sum(self.baselines * self.nu[: len(self.baselines)])
        )
        return slope, intercept


def eval_lineshape(model: LineshapeModel, nu) -> tuple[np.ndarray, np.ndarray]:
    """Model values and their moduli at frequencies ``nu``.

    Evaluation within POLE_EPS * nu^2 of a pole of the rational part is
    flagged with a :class:`PoleProximityWarning`.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    if np.any(nu <= 0):
        raise ValueError("frequencies must be positive")
    total = np.zeros_like(nu, dtype=complex)
    for a_m, nu_m, g_m in zip(model.amplitudes, model.nu, model.g):
        denom = nu**2 - (nu_m + 1j * g_m) ** 2
        if np.any(np.abs(denom) < POLE_EPS * nu**2):
            warnings.warn(
                f"evaluation within {POLE_EPS:g} nu^2 of the pole at "
                f"{nu_m:g} + i {g_m:g}",
                PoleProximityWarning,
                stacklevel=2,
            )
        total += 1j * nu * a_m / denom
    for b, nu_ref in zip(model.baselines, model.nu[: len(model.baselines)]):
        total += b * (nu - nu_ref)
    total += model.offset
    return total, np.abs(total)


def add_noise(y: np.ndarray, sigma: float = 0.005, rng=None) -> np.ndarray:
    """Additive Gaussian noise on a modulus trace (synthetic experiments)."""
    rng = np.random.default_rng(rng)
    return y + rng.normal(0.0, sigma, size=len(y))


# -- parameter vector packing -------------------------------------------------

def _n_params(order: int) -> int:
    n_b = 1 if order == 2 else 2
    return 4 * order + 2 * n_b + 1


def _pack(model: LineshapeModel) -> np.ndarray:
    parts = []
    for a in model.amplitudes:
        parts += [a.real, a.imag]
    for nu_m, g_m in zip(model.nu, model.g):
        parts += [nu_m, g_m]
    for b in model.baselines:
        parts += [b.real, b.imag]
    parts.append(model.offset.real)
    return np.array(parts)


def _unpack(p: np.ndarray, order: int) -> LineshapeModel:
    n_b = 1 if order == 2 else 2
    amps = np.array([p[2 * m] + 1j * p[2 * m + 1] for m in range(order)])
    base = 2 * order
    nus = np.array([p[base + 2 * m] for m in range(order)])
    gs = np.array([p[base + 2 * m + 1] for m in range(order)])
    base += 2 * order
    bs = np.array([p[base + 2 * i] + 1j * p[base + 2 * i + 1] for i in range(n_b)])
    base += 2 * n_b
    return LineshapeModel(order, amps, nus, gs, bs, complex(p[base], 0.0))


def _scales(p0: np.ndarray, order: int, nu_span: float, y_scale: float) -> np.ndarray:
    n_b = 1 if order == 2 else 2
    s = np.empty_like(p0)
    a_floor = y_scale * 0.02 * nu_span
    for m in range(order):
        s[2 * m] = s[2 * m + 1] = a_floor
    base = 2 * order
    for m in range(order):
        s[base + 2 * m] = nu_span
        s[base + 2 * m + 1] = 0.01 * nu_span
    base += 2 * order
    for i in range(n_b):
        s[base + 2 * i] = s[base + 2 * i + 1] = y_scale / nu_span
    s[base + 2 * n_b] = y_scale
    return np.maximum(np.abs(p0), s)


# -- damped least squares ------------------------------------------------------

def _levenberg_marquardt(residual, q0, max_iter=MAX_ITER):
    """Minimize ||residual(q)||^2; accepted steps strictly decrease the cost.

    Returns (q, cost_history, jacobian, iterations, converged).  The
    Jacobian is recomputed by forward differences at each accepted point.
    """
    q = np.asarray(q0, dtype=float)
    r = residual(q)
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    converged = False
    iterations = 0

    def jacobian(q, r):
        j = np.empty((len(r), len(q)))
        for i in range(len(q)):
            h = 1e-7 * max(1.0, abs(q[i]))
            qp = q.copy()
            qp[i] += h
            j[:, i] = (residual(qp) - r) / h
        return j

    jac = jacobian(q, r)
    while iterations < max_iter and not converged:
        iterations += 1
        jtj = jac.T @ jac
        jtr = jac.T @ r
        stepped = False
        for _ in range(25):
            damped = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-30))
            try:
                delta = np.linalg.solve(damped, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_try = residual(q + delta)
            cost_try = float(r_try @ r_try)
            if cost_try < cost:
                rel_drop = (cost - cost_try) / max(cost, 1e-300)
                step_norm = float(np.linalg.norm(delta))
                q = q + delta
                r = r_try
                cost = cost_try
                history.append(cost)
                lam = max(lam / 3.0, 1e-14)
                jac = jacobian(q, r)
                stepped = True
                if rel_drop < COST_RTOL or step_norm < STEP_TOL * (
                    1.0 + float(np.linalg.norm(q))
                ):
                    converged = True
                break
            lam *= 10.0
            if lam > 1e14:
                break
        if not stepped:
            break
    return q, history, jac, iterations, converged


@dataclass
class FitOutcome:
    """Fitted model plus convergence and uncertainty diagnostics."""

    model: LineshapeModel
    rss: float
    stderr_nu: np.ndarray
    stderr_g: np.ndarray
    stderr: np.ndarray  # all parameters, packed order
    iterations: int
    converged: bool
    escaped: bool  # some fitted nu_m left the window
    cost_history: list[float] = field(repr=False, default_factory=list)

    @property
    def effective_baseline(self):
        return self.model.effective_baseline()


def seed_initial_guess(nu: np.ndarray, y: np.ndarray, order: int) -> LineshapeModel:
    """Starting model from dip positions, depths, and half-widths.

    The baseline is the chord through the window endpoints.  If fewer than
    ``order`` separate dips exist (merged resonances), seeds are spread
    evenly across the deepest dip's support instead.
    """
    nu = np.asarray(nu, dtype=float)
    y = np.asarray(y, dtype=float)
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    if len(nu) < 2 * order + 3:
        raise LineshapeError("too few samples to seed")
    chord = y[0] + (y[-1] - y[0]) * (nu - nu[0]) / (nu[-1] - nu[0])
    rel = y / np.maximum(chord, 1e-12)
    dippy = rel < 0.99
    if not np.any(dippy):
        raise LineshapeError("flat trace: no dip below 0.99 of the baseline")

    minima = [
        i
        for i in range(1, len(y) - 1)
        if y[i] <= y[i - 1] and y[i] <= y[i + 1] and dippy[i]
    ]
    minima.sort(key=lambda i: rel[i])
    chosen: list[int] = []
    min_sep = (nu[-1] - nu[0]) / (6.0 * order)
    for i in minima:
        if all(abs(nu[i] - nu[j]) >= min_sep for j in chosen):
            chosen.append(i)
        if len(chosen) == order:
            break

    if len(chosen) < order:
        # merged dips: spread seeds across the deepest dip's support
        deepest = minima[0]
        lo = deepest
        while lo > 0 and dippy[lo - 1]:
            lo -= 1
        hi = deepest
        while hi < len(y) - 1 and dippy[hi + 1]:
            hi += 1
        positions = np.linspace(nu[lo], nu[hi], order + 2)[1:-1]
        chosen = [int(np.argmin(np.abs(nu - p))) for p in positions]

    chosen.sort(key=lambda i: nu[i])
    spacing = nu[1] - nu[0]
    nus, gs, amps = [], [], []
    for i in chosen:
        depth = max(chord[i] - y[i], 0.01 * max(chord[i], 1e-12))
        half_level = y[i] + 0.5 * depth
        left = i
        while left > 0 and y[left] < half_level:
            left -= 1
        right = i
        while right < len(y) - 1 and y[right] < half_level:
            right += 1
        width = max(0.5 * (nu[right] - nu[left]), spacing)
        width = min(width, 0.25 * (nu[-1] - nu[0]))
        nus.append(nu[i])
        gs.append(-width)
        amps.append(-2.0 * width * depth)
    n_b = 1 if order == 2 else 2
    slope = (y[-1] - y[0]) / (nu[-1] - nu[0])
    baselines = np.zeros(n_b, dtype=complex)
    baselines[0] = slope
    offset = complex(chord[len(chord) // 2], 0.0)
    return LineshapeModel(
        order,
        np.asarray(amps, dtype=complex),
        np.asarray(nus),
        np.asarray(gs),
        baselines,
        offset,
    )


def _canonicalize(model: LineshapeModel) -> LineshapeModel:
    """Sort resonances by nu; map an all-upper-half solution to g < 0.

    The modulus objective is exactly invariant under conjugating every
    parameter and flipping all g signs, so a solution with g > 0 throughout
    is the mirror gauge of the physical one.
    """
    idx = np.argsort(model.nu)
    amps, nus, gs = model.amplitudes[idx], model.nu[idx], model.g[idx]
    baselines, offset = model.baselines.copy(), model.offset
    if np.all(gs > 0):
        gs = -gs
        amps = -np.conj(amps)
        baselines = np.conj(baselines)
        offset = np.conj(offset)
    return LineshapeModel(model.order, amps, nus, gs, baselines, offset)


def fit_lineshape(
    nu: np.ndarray,
    y: np.ndarray,
    order: int,
    window: tuple[float, float] | None = None,
    init: LineshapeModel | None = None,
) -> FitOutcome:
    """Fit |f(nu)| to the modulus data ``y`` inside ``window``.

    Needs at least ten samples per free parameter in the window and initial
    nu_m inside it.  The damping loop only ever accepts cost-decreasing
    steps; non-convergence after 500 iterations or resonance positions
    escaping the window are reported on the outcome, with the best iterate
    retained.
    """
    nu = np.asarray(nu, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        mask = (nu >= window[0]) & (nu <= window[1])
        nu, y = nu[mask], y[mask]
    if len(nu) == 0:
        raise LineshapeError("empty fit window")
    n_par = _n_params(order)
    if len(nu) < 10 * n_par:
        raise LineshapeError(
            f"window holds {len(nu)} samples; need >= {10 * n_par} for order {order}"
        )
    if init is None:
        init = seed_initial_guess(nu, y, order)
    if np.any(init.nu < nu[0]) or np.any(init.nu > nu[-1]):
        raise LineshapeError("initial resonance positions must lie inside the window")

    p0 = _pack(init)
    scales = _scales(p0, order, nu[-1] - nu[0], max(float(np.max(y)), 1e-12))

    def residual(q):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PoleProximityWarning)
            _, mod = eval_lineshape(_unpack(q * scales, order), nu)
        return mod - y

    q, history, jac, iterations, converged = _levenberg_marquardt(residual, p0 / scales)
    p = q * scales
    model = _canonicalize(_unpack(p, order))
    rss = history[-1]

    dof = max(len(nu) - n_par, 1)
    sigma2 = rss / dof
    jtj = jac.T @ jac
    try:
        cov_q = sigma2 * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov_q = sigma2 * np.linalg.pinv(jtj)
    stderr = np.sqrt(np.abs(np.diag(cov_q))) * scales
    base = 2 * order
    order_idx = np.argsort(_unpack(p, order).nu)
    stderr_nu = np.array([stderr[base + 2 * m] for m in order_idx])
    stderr_g = np.array([stderr[base + 2 * m + 1] for m in order_idx])
    escaped = bool(np.any(model.nu < nu[0]) or np.any(model.nu > nu[-1]))
    return FitOutcome(
        model=model,
        rss=float(rss),
        stderr_nu=stderr_nu,
        stderr_g=stderr_g,
        stderr=stderr,
        iterations=iterations,
        converged=converged,
        escaped=escaped,
        cost_history=history,
    )


def fit_report_csv(outcome: FitOutcome, manifest: str = "") -> str:
    """CSV report: one row per fitted resonance."""
    lines = []
    if manifest:
        lines.append(f"# manifest: {manifest}")
    lines.append("order,m,nu_Hz,g_Hz,abs_A,stderr_nu,stderr_g,rss,converged")
    m0 = outcome.model
    for m in range(m0.order):
        lines.append(
            f"{m0.order},{m + 1},{m0.nu[m]:.17g},{m0.g[m]:.17g},"
            f"{abs(m0.amplitudes[m]):.17g},{outcome.stderr_nu[m]:.6g},"
            f"{outcome.stderr_g[m]:.6g},{outcome.rss:.6g},{int(outcome.converged)}"
        )
    return "\n".join(lines) + "\n"
