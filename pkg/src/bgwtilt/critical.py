"""Locate the critical good tilt by following the solution curve from the origin.

The curve is the connected component at ``0`` of the positive solutions of
``G(b) = 0`` where, with ``p`` the coordinate carrying ``gamma_p = 1``,

    G_j(b) = b_j * phi_p(b)**gamma_j - b_p**gamma_j * phi_j(b),   j != p.

Along it the tilted spectral radius starts below 1 near the origin; the
critical tilt is where it reaches 1.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .pgf import (
    PGFOverflowError,
    check_assumptions,
    eval_pgf,
    eval_pgf_all,
    jacobian_pgf,
    mean_matrix,
    spectral_radius,
)
from .tilting import (
    ConditionSpec,
    TiltParams,
    apply_tilt,
    beta_from_b,
    curve_residual,
    is_good_tilting,
    tilt_params_from_b,
    tilted_mean_spectral_radius,
)

log = logging.getLogger(__name__)


class CriticalizationError(RuntimeError):
    """Base class; ``trace`` holds whatever was traced before the failure."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class AssumptionError(CriticalizationError):
    pass


class SeedError(CriticalizationError):
    pass


class CurveLostError(CriticalizationError):
    pass


class NoCrossingError(CriticalizationError):
    pass


@dataclass
class ContinuationOptions:
    eps: float = 1e-3
    eps_min: float = 1e-6
    min_step: float = 1e-8
    max_step: float = 0.1
    grow: float = 1.3
    easy_steps: int = 3
    easy_iterations: int = 3
    max_newton: int = 12
    corrector_tol: float = 1e-11
    max_points: int = 200_000
    domain_bound: float = 1e3
    rho_tol: float = 1e-9
    degeneracy_tol: float = 1e-10
    stop_at_crossing: bool = True
    check_assumptions: bool = True
    allow_escape_failure: bool = False


@dataclass(frozen=True)
class CurvePoint:
    b: tuple
    beta: float
    rho_tilde: float
    arclength: float
    jacobian_dets: tuple
    degenerate_flag: bool


@dataclass
class Trace:
    points: list = field(default_factory=list)
    tangents: list = field(default_factory=list)
    termination: str = ""
    crossings: list = field(default_factory=list)  # index i: crossing between points i and i+1
    chart_switches: int = 0

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


# -- G, H and their Jacobians ------------------------------------------------

def g_pair(model, gamma, i, j, b) -> float:
    """``G_{i,j}(b) = b_j**gamma_i phi_i**gamma_j - b_i**gamma_j phi_j**gamma_i``."""
    b = np.asarray(b, dtype=float)
    pi, pj = eval_pgf(model, i, b), eval_pgf(model, j, b)
    return b[j] ** gamma[i] * pi ** gamma[j] - b[i] ** gamma[j] * pj ** gamma[i]


def g_functions(model, condition: ConditionSpec, b) -> np.ndarray:
    """``(G_{p,j}(b))_{j != p}``; empty for a single type. Defined on all of R^K."""
    gamma = condition.require_reduced()
    p = condition.pivot
    b = np.asarray(b, dtype=float)
    phis = eval_pgf_all(model, b)
    return np.array([
        b[j] ** gamma[p] * phis[p] ** gamma[j] - b[p] ** gamma[j] * phis[j] ** gamma[p]
        for j in range(len(b)) if j != p
    ])


def g_jacobian(model, condition: ConditionSpec, b) -> np.ndarray:
    """Jacobian of :func:`g_functions`, shape ``(K-1, K)``."""
    gamma = condition.require_reduced()
    p = condition.pivot
    b = np.asarray(b, dtype=float)
    k = len(b)
    phis = eval_pgf_all(model, b)
    jac = jacobian_pgf(model, b)
    gp = gamma[p]
    rows = []
    for j in range(k):
        if j == p:
            continue
        gj = gamma[j]
        row = (
            b[j] ** gp * gj * phis[p] ** (gj - 1) * jac[p]
            - b[p] ** gj * gp * phis[j] ** (gp - 1) * jac[j]
        )
        row[j] += gp * b[j] ** (gp - 1) * phis[p] ** gj
        row[p] -= gj * b[p] ** (gj - 1) * phis[j] ** gp
        rows.append(row)
    return np.array(rows).reshape(k - 1, k)


@dataclass(frozen=True)
class ChartData:
    h: np.ndarray          # h[i, j] = H_{i,j}(b)
    charts: tuple          # charts[i] = I^(i)(b), rows/cols indexed by [K] minus {i}
    dets: np.ndarray

    def degenerate(self, tol: float = 1e-10) -> bool:
        k = len(self.dets)
        if k <= 1:
            return False
        scale = max(np.linalg.norm(c) for c in self.charts) ** (k - 1)
        return bool(np.max(np.abs(self.dets)) < tol * max(scale, np.finfo(float).tiny))


def h_functions_and_charts(model, condition: ConditionSpec, b) -> ChartData:
    """Values of ``H_{i,j}`` and the chart Jacobians ``I^(i)`` with determinants."""
    gamma = condition.require_reduced()
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise ValueError("H functions need positive coordinates")
    k = len(b)
    d = np.array([1.0 / g for g in gamma])
    phis = eval_pgf_all(model, b)
    jac = jacobian_pgf(model, b)
    h = np.zeros((k, k))
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(k):
            for j in range(k):
                h[i, j] = b[j] ** d[j] * phis[i] ** d[i] - b[i] ** d[i] * phis[j] ** d[j]

    def dh(i, j, m):
        v = b[j] ** d[j] * d[i] * phis[i] ** (d[i] - 1) * jac[i, m]
        v -= b[i] ** d[i] * d[j] * phis[j] ** (d[j] - 1) * jac[j, m]
        if m == j:
            v += d[j] * b[j] ** (d[j] - 1) * phis[i] ** d[i]
        if m == i:
            v -= d[i] * b[i] ** (d[i] - 1) * phis[j] ** d[j]
        return v

    charts, dets = [], []
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(k):
            idx = [j for j in range(k) if j != i]
            chart = np.array([[dh(i, j, m) for m in idx] for j in idx]).reshape(k - 1, k - 1)
            charts.append(chart)
            dets.append(np.linalg.det(chart) if k > 1 else 1.0)
    return ChartData(h, tuple(charts), np.array(dets))


# -- seeding -------------------------------------------------------------------

def taylor_seed(model, condition: ConditionSpec, eps: float) -> np.ndarray:
    """Leading-order curve point: ``b_j = phi_p(0)**(-gamma_j) phi_j(0) eps**gamma_j``."""
    gamma = condition.require_reduced()
    p = condition.pivot
    k = model.num_types
    zero = np.zeros(k)
    phi0 = eval_pgf_all(model, zero)
    b = np.array([phi0[p] ** (-gamma[j]) * phi0[j] * eps ** gamma[j] for j in range(k)])
    b[p] = eps
    return b


def _newton_fixed(model, condition, b, fixed, max_iter=50):
    """Newton on G over the coordinates other than ``fixed``."""
    k = len(b)
    free = [j for j in range(k) if j != fixed]
    x = np.array(b, dtype=float)
    for _ in range(max_iter):
        g = g_functions(model, condition, x)
        jac = g_jacobian(model, condition, x)[:, free]
        try:
            dx = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            return x, False
        x[free] += dx
        if np.linalg.norm(dx) <= 1e-15 * (1e-300 + np.linalg.norm(x[free])):
            break
    ok = bool(np.all(np.isfinite(x)))
    return x, ok


def seed_near_origin(model, condition: ConditionSpec, eps: float = 1e-3, eps_min: float = 1e-6,
                     tol: float = 1e-11) -> np.ndarray:
    """Curve point with pivot coordinate ``eps``: Taylor guess then Newton.

    Halves ``eps`` on failure down to ``eps_min``.
    """
    k = model.num_types
    p = condition.pivot
    e = eps
    while e >= eps_min:
        b = taylor_seed(model, condition, e)
        if k == 1:
            return b
        x, ok = _newton_fixed(model, condition, b, p)
        if ok and np.all(x > 0):
            if np.max(np.abs(curve_residual(model, condition, x))) <= tol:
                return x
        e /= 2
    raise SeedError(f"could not place a seed point for eps down to {eps_min:g}")


# -- continuation --------------------------------------------------------------

def _tangent(model, condition, x, prev=None):
    k = len(x)
    if k == 1:
        return np.ones(1)
    jac = g_jacobian(model, condition, x)
    _, _, vt = np.linalg.svd(jac)
    t = vt[-1]
    if prev is not None:
        if t @ prev < 0:
            t = -t
    elif t[condition.pivot] < 0:
        t = -t
    return t / np.linalg.norm(t)


def _correct(model, condition, base, t, s, opts, start=None):
    """Newton on ``[G(x); t.(x - base) - s] = 0``; returns ``(x, ok, iterations)``."""
    x = base + s * t if start is None else np.array(start, dtype=float)
    k = len(x)
    for it in range(1, opts.max_newton + 1):
        if k > 1:
            g = g_functions(model, condition, x)
            jac = g_jacobian(model, condition, x)
            f = np.concatenate([g, [t @ (x - base) - s]])
            a = np.vstack([jac, t])
            try:
                dx = np.linalg.solve(a, -f)
            except np.linalg.LinAlgError:
                return x, False, it
            x = x + dx
        else:
            x = base + s * t
        if not np.all(np.isfinite(x)) or np.any(x <= 0):
            return x, False, it
        if np.max(np.abs(curve_residual(model, condition, x))) <= opts.corrector_tol:
            return x, True, it
    return x, False, opts.max_newton


def _make_point(model, condition, x, arclength, opts):
    charts = h_functions_and_charts(model, condition, x)
    rho = tilted_mean_spectral_radius(model, condition, x)
    return CurvePoint(
        b=tuple(float(v) for v in x),
        beta=beta_from_b(model, condition, x),
        rho_tilde=rho,
        arclength=arclength,
        jacobian_dets=tuple(float(v) for v in charts.dets),
        degenerate_flag=charts.degenerate(opts.degeneracy_tol),
    )


def _chart_switch(model, condition, b, t, opts):
    """Natural-parameter step holding one coordinate fixed at a time."""
    order = np.argsort(-np.abs(t))
    for m in order:
        if abs(t[m]) < 1e-12:
            continue
        for h in (1e-2, 1e-3, 1e-4, 1e-5):
            guess = b + (h / abs(t[m])) * t
            x, ok = _newton_fixed(model, condition, guess, int(m))
            if not ok or np.any(x <= 0):
                continue
            if np.max(np.abs(curve_residual(model, condition, x))) > opts.corrector_tol:
                continue
            if (x - b) @ t <= 0:
                continue
            return x
    return None


def _preflight(model, condition, opts):
    condition.require_reduced()
    if not opts.check_assumptions:
        return
    report = check_assumptions(model, condition.gamma_matrix)
    if not report.empty_word.ok:
        raise AssumptionError(f"every type needs positive extinction mass: {report.empty_word.note}")
    esc = report.escape_verdict
    if esc.status == "fail" and not opts.allow_escape_failure:
        raise AssumptionError(f"escape condition fails: {esc.note}")
    if esc.status == "undetermined":
        warnings.warn("escape condition could not be decided; tracing anyway", RuntimeWarning)


def trace_curve(model, condition: ConditionSpec, opts: ContinuationOptions | None = None) -> Trace:
    """Pseudo-arclength predictor-corrector trace of the solution curve from the origin.

    Stops on a crossing of the tilted spectral radius through 1 (unless
    ``opts.stop_at_crossing`` is false), on leaving ``opts.domain_bound``, on a
    generating-function overflow, on a degenerate point, or on the point cap.
    """
    opts = opts or ContinuationOptions()
    _preflight(model, condition, opts)
    trace = Trace()
    x = seed_near_origin(model, condition, opts.eps, opts.eps_min)
    t = _tangent(model, condition, x)
    trace.points.append(_make_point(model, condition, x, float(np.linalg.norm(x)), opts))
    trace.tangents.append(t)
    ds = max(opts.min_step, min(opts.max_step, float(np.linalg.norm(x))))
    easy = 0
    while True:
        if len(trace.points) >= opts.max_points:
            trace.termination = "step_cap"
            break
        try:
            y, ok, iters = _correct(model, condition, x, t, ds, opts)
            t_new = _tangent(model, condition, y, t) if ok else None
            if ok and t_new @ t < 0.8:
                ok = False
            if not ok:
                ds /= 2
                easy = 0
                if ds >= opts.min_step:
                    continue
                y = _chart_switch(model, condition, x, t, opts)
                if y is None:
                    raise CurveLostError("corrector failed at minimal step and no chart worked", trace)
                trace.chart_switches += 1
                t_new = _tangent(model, condition, y, t)
                ds = opts.min_step
                iters = opts.max_newton
            point = _make_point(model, condition, y, trace.points[-1].arclength + float(np.linalg.norm(y - x)), opts)
        except PGFOverflowError:
            trace.termination = "overflow"
            break
        prev = trace.points[-1]
        trace.points.append(point)
        trace.tangents.append(t_new)
        x, t = y, t_new
        if iters <= opts.easy_iterations:
            easy += 1
            if easy >= opts.easy_steps:
                ds = min(ds * opts.grow, opts.max_step)
                easy = 0
        else:
            easy = 0
        if (prev.rho_tilde - 1.0) * (point.rho_tilde - 1.0) < 0 or (
            prev.rho_tilde < 1.0 and point.rho_tilde == 1.0
        ):
            trace.crossings.append(len(trace.points) - 2)
            if opts.stop_at_crossing:
                trace.termination = "crossing"
                break
        if point.degenerate_flag:
            trace.termination = "degenerate"
            break
        if max(point.b) > opts.domain_bound:
            trace.termination = "domain"
            break
    log.debug("trace finished: %s after %d points", trace.termination, len(trace.points))
    return trace


@dataclass
class CriticalResult:
    params: TiltParams
    b: tuple
    beta: float
    rho_tilde: float
    trace: Trace
    tilted_rho: float
    good: bool
    refinement_steps: int = 0

    @property
    def diagnostics(self) -> dict:
        return {
            "termination": self.trace.termination,
            "trace_points": len(self.trace.points),
            "crossings": len(self.trace.crossings),
            "chart_switches": self.trace.chart_switches,
            "rho_tilde": self.rho_tilde,
            "tilted_rho": self.tilted_rho,
            "good_tilting": self.good,
            "refinement_steps": self.refinement_steps,
        }


def _refine_crossing(model, condition, trace, i, opts):
    """Illinois (modified regula falsi) in the arclength parameter between points
    ``i`` and ``i+1``, re-correcting every trial point onto the curve."""
    base = np.array(trace.points[i].b)
    t = trace.tangents[i]
    nxt = np.array(trace.points[i + 1].b)
    s_lo, s_hi = 0.0, float(t @ (nxt - base))
    f_lo = trace.points[i].rho_tilde - 1.0
    f_hi = trace.points[i + 1].rho_tilde - 1.0
    x_lo, x_hi = base, nxt
    best = (abs(f_lo), x_lo) if abs(f_lo) < abs(f_hi) else (abs(f_hi), x_hi)
    side = 0
    steps = 0
    for steps in range(1, 201):
        if best[0] <= opts.rho_tol:
            break
        s = s_hi - f_hi * (s_hi - s_lo) / (f_hi - f_lo)
        if not s_lo < s < s_hi:
            s = 0.5 * (s_lo + s_hi)
        start = x_lo + (x_hi - x_lo) * ((s - s_lo) / (s_hi - s_lo))
        x, ok, _ = _correct(model, condition, base, t, s, opts, start=start)
        if not ok:
            x, ok, _ = _correct(model, condition, base, t, s, opts)
        if not ok:
            raise CurveLostError("corrector failed while refining the crossing", trace)
        f = tilted_mean_spectral_radius(model, condition, x) - 1.0
        if abs(f) < best[0]:
            best = (abs(f), x)
        if f < 0:
            s_lo, f_lo, x_lo = s, f, x
            if side == -1:
                f_hi /= 2
            side = -1
        else:
            s_hi, f_hi, x_hi = s, f, x
            if side == 1:
                f_lo /= 2
            side = 1
        if s_hi - s_lo <= 4 * np.finfo(float).eps * max(1.0, abs(s_hi)):
            break
    return best[1], steps


def find_critical_tilting(model, condition: ConditionSpec, opts: ContinuationOptions | None = None) -> CriticalResult:
    """Trace the curve, bracket ``rho~ = 1`` and refine it.

    Returns the critical parameters ``a = 1/phi(b*)``, ``b*`` and ``beta``
    together with the trace. Raises :class:`NoCrossingError` when the curve
    leaves the domain (or overflows) with the tilted spectral radius still
    below 1.
    """
    opts = opts or ContinuationOptions()
    trace = trace_curve(model, condition, opts)
    steps = 0
    if trace.crossings:
        i = trace.crossings[0]
        b_star, steps = _refine_crossing(model, condition, trace, i, opts)
    elif trace.termination == "degenerate":
        last = trace.points[-1]
        if last.rho_tilde < 1 - 1e-6:
            raise NoCrossingError(
                f"degenerate point with rho~={last.rho_tilde:.6g} < 1 (contradicts rho~ >= 1 there)", trace
            )
        if abs(last.rho_tilde - 1.0) > opts.rho_tol:
            raise NoCrossingError("degenerate point reached but no bracket for rho~ = 1 on the trace", trace)
        b_star = np.array(last.b)
    else:
        last = trace.points[-1]
        raise NoCrossingError(
            f"no crossing found within bound (termination={trace.termination}, "
            f"last rho~={last.rho_tilde:.6g}, max b={max(last.b):.6g}); consistent with a failed escape condition",
            trace,
        )
    rho = tilted_mean_spectral_radius(model, condition, b_star)
    params = tilt_params_from_b(model, tuple(float(v) for v in b_star), condition)
    tilted = apply_tilt(model, params)
    tilted_rho = spectral_radius(mean_matrix(tilted))
    good = bool(is_good_tilting(params, condition))
    return CriticalResult(params, tuple(float(v) for v in b_star), float(params.beta), rho, trace,
                          tilted_rho, good, steps)


def count_crossings(model, condition: ConditionSpec, opts: ContinuationOptions | None = None) -> tuple[int, Trace]:
    """Number of times the tilted spectral radius crosses 1 along the whole traced curve."""
    opts = opts or ContinuationOptions()
    opts = ContinuationOptions(**{**opts.__dict__, "stop_at_crossing": False})
    trace = trace_curve(model, condition, opts)
    return len(trace.crossings), trace


def is_critical(model, tol: float = 1e-10) -> bool:
    return abs(spectral_radius(mean_matrix(model)) - 1.0) <= tol


def criticalize(model, condition: ConditionSpec, opts: ContinuationOptions | None = None, check_tol: float = 1e-8):
    """Return ``(critical_model, result)``; ``result`` is ``None`` when the input is already critical.

    The tilted model's spectral radius is re-checked against ``check_tol``.
    """
    if is_critical(model):
        return model, None
    result = find_critical_tilting(model, condition, opts)
    tilted = apply_tilt(model, result.params)
    rho = spectral_radius(mean_matrix(tilted))
    if abs(rho - 1.0) > check_tol:
        raise NoCrossingError(f"tilted model has spectral radius {rho!r}, not 1", result.trace)
    return tilted, result


def identity_is_on_curve(model, condition) -> bool:
    k = model.num_types
    return bool(np.max(np.abs(curve_residual(model, condition, np.ones(k)))) <= 1e-12)


__all__ = [
    "AssumptionError",
    "ChartData",
    "ContinuationOptions",
    "CriticalResult",
    "CriticalizationError",
    "CurveLostError",
    "CurvePoint",
    "NoCrossingError",
    "SeedError",
    "Trace",
    "count_crossings",
    "criticalize",
    "is_critical",
    "find_critical_tilting",
    "g_functions",
    "g_jacobian",
    "g_pair",
    "h_functions_and_charts",
    "seed_near_origin",
    "taylor_seed",
    "trace_curve",
]
