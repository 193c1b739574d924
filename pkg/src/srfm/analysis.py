"""Data reduction: extrema and width estimate, doublet fitting, regression."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

# D1 estimator relating the self-broadened width to the max-min interval
WIDTH_PER_MM_INTERVAL = 0.87

EXPLORE_ITERATIONS = 40
SCAN_KEEP = 4
SCAN_SAMPLES = 400
SCAN_POSITIONS = 100
SCAN_PHASES = 6


class AnalysisError(ValueError):
    pass


@dataclass
class ExtremaReport:
    maxima: List[Tuple[float, float]]
    minima: List[Tuple[float, float]]
    zero_crossings: List[Tuple[float, float]]
    delta_mm: Optional[float] = None
    principal_max: Optional[Tuple[float, float]] = None
    principal_min: Optional[Tuple[float, float]] = None


@dataclass
class DoubletFit:
    """Two-component fit.  Component 1 is the one at lower grid coordinate."""

    splitting: float
    width: float
    center: float
    amplitudes: Tuple[float, float]
    phase: float
    residual_rms: float
    converged: bool
    iterations: int
    gradient_norm: float
    degenerate: bool = False
    trace: List[float] = field(default_factory=list, repr=False)

    def as_dict(self):
        return {
            "splitting_GHz": self.splitting,
            "width_GHz": self.width,
            "center_GHz": self.center,
            "amplitudes": list(self.amplitudes),
            "phase_rad": self.phase,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "degenerate": self.degenerate,
        }


@dataclass
class LinearFit:
    slope: float
    intercept: float
    slope_stderr: float
    points: List[Tuple[float, float]]
    through_origin: bool = True

    def as_dict(self):
        return {"slope": self.slope, "intercept_GHz": self.intercept,
                "slope_stderr": self.slope_stderr, "through_origin": self.through_origin,
                "points": [list(p) for p in self.points]}


# -- extrema ------------------------------------------------------------------

def _parabola_vertex(x, y):
    a, b, c = np.polyfit(x, y, 2)
    if a == 0:
        return float(x[1]), float(y[1])
    xv = -b / (2 * a)
    return float(xv), float(np.polyval((a, b, c), xv))


def find_extrema(signal, grid):
    """Interior extrema (3-point parabolic refinement) and zero crossings.

    Zero crossings are linearly interpolated and carry the local slope.  The
    principal pair is the global maximum and global minimum among the
    interior extrema; ``delta_mm`` is their separation.
    """
    y = np.asarray(signal, dtype=float)
    x = np.asarray(grid, dtype=float)
    if y.shape != x.shape or y.size < 5:
        raise AnalysisError("need matching signal and grid with at least 5 points")

    maxima, minima = [], []
    left, mid, right = y[:-2], y[1:-1], y[2:]
    for i in np.flatnonzero((mid > left) & (mid >= right)) + 1:
        maxima.append(_parabola_vertex(x[i - 1:i + 2], y[i - 1:i + 2]))
    for i in np.flatnonzero((mid < left) & (mid <= right)) + 1:
        minima.append(_parabola_vertex(x[i - 1:i + 2], y[i - 1:i + 2]))

    crossings = []
    s = np.sign(y)
    for i in np.flatnonzero(s[:-1] * s[1:] < 0):
        x0 = x[i] - y[i] * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
        crossings.append((float(x0), float((y[i + 1] - y[i]) / (x[i + 1] - x[i]))))
    # samples landing exactly on zero between opposite-signed neighbours
    for i in np.flatnonzero((s[1:-1] == 0) & (s[:-2] * s[2:] < 0)) + 1:
        crossings.append((float(x[i]), float((y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1]))))
    crossings.sort()

    report = ExtremaReport(maxima=maxima, minima=minima, zero_crossings=crossings)
    if maxima and minima:
        report.principal_max = max(maxima, key=lambda p: p[1])
        report.principal_min = min(minima, key=lambda p: p[1])
        report.delta_mm = abs(report.principal_max[0] - report.principal_min[0])
    return report


def resolved_lobes(signal, grid, rel_depth=0.1):
    """Positions of the dominant-sign lobes of an FM signal.

    Extrema sharing the sign of the largest excursion and reaching at least
    ``rel_depth`` of it.  A single line gives one lobe, a resolved doublet
    two, even when the lobes do not cross zero between them.
    """
    y = np.asarray(signal, dtype=float)
    report = find_extrema(y, grid)
    peak = y[np.argmax(np.abs(y))]
    pool = report.maxima if peak > 0 else report.minima
    return sorted(pos for pos, val in pool if val * np.sign(peak) >= rel_depth * abs(peak))


def width_from_mm(delta_mm):
    """Self-broadened width from the max-min interval, Gamma = 0.87 * delta_mm."""
    if not delta_mm > 0:
        raise AnalysisError("delta_mm must be positive")
    return WIDTH_PER_MM_INTERVAL * delta_mm


# -- doublet model ------------------------------------------------------------

def lorentzian_derivative(x, width, phase=0.0):
    """d/dx of Re[e^{i phase} w / (w + i x)].

    phase = 0 is the derivative of the absorptive profile w^2 / (x^2 + w^2);
    phase = pi/2 the derivative of the dispersive one.
    """
    z = width + 1j * np.asarray(x, dtype=float)
    return np.real(np.exp(1j * phase) * (-1j * width / z**2))


def doublet_model(x, amplitudes, center, splitting, width, phase=0.0):
    x = np.asarray(x, dtype=float)
    a1, a2 = amplitudes
    return (a1 * lorentzian_derivative(x - center + splitting / 2, width, phase)
            + a2 * lorentzian_derivative(x - center - splitting / 2, width, phase))


def _profile_terms(x, w, phase):
    z = w + 1j * x
    rot = np.exp(1j * phase)
    d1 = -1j * w / z**2
    value = np.real(rot * d1)
    d_x = np.real(rot * (-2 * w / z**3))
    d_w = np.real(rot * (x + 1j * w) / z**3)
    d_phase = -np.imag(rot * d1)
    return value, d_x, d_w, d_phase


def _residual_and_jacobian(p, x, y, fixed_phase):
    a1, a2, c, s, w = p[:5]
    phase = p[5] if fixed_phase is None else fixed_phase
    v1, x1, w1, f1 = _profile_terms(x - c + s / 2, w, phase)
    v2, x2, w2, f2 = _profile_terms(x - c - s / 2, w, phase)
    r = a1 * v1 + a2 * v2 - y
    cols = [v1, v2, -a1 * x1 - a2 * x2, 0.5 * (a1 * x1 - a2 * x2), a1 * w1 + a2 * w2]
    if fixed_phase is None:
        cols.append(a1 * f1 + a2 * f2)
    return r, np.column_stack(cols)


def _cost(p, x, y, fixed_phase):
    if not p[4] > 0:
        return np.inf
    phase = p[5] if fixed_phase is None else fixed_phase
    r = doublet_model(x, p[:2], p[2], p[3], p[4], phase) - y
    return 0.5 * float(r @ r)


def _linear_amplitudes(x, y, c, s, w, phase):
    basis = np.column_stack([lorentzian_derivative(x - c + s / 2, w, phase),
                             lorentzian_derivative(x - c - s / 2, w, phase)])
    amps, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return amps


def _gauss_newton(p, x, y, fixed_phase, step_tol, grad_tol, max_iter):
    cost = _cost(p, x, y, fixed_phase)
    trace = [cost]
    converged = False
    grad_norm = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        r, jac = _residual_and_jacobian(p, x, y, fixed_phase)
        grad_norm = float(np.linalg.norm(jac.T @ r))
        if grad_norm < grad_tol:
            converged = True
            break
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        t = 1.0
        while t > 1e-12:
            trial = p + t * step
            trial_cost = _cost(trial, x, y, fixed_phase)
            if trial_cost <= cost:
                break
            t *= 0.5
        else:
            # no descent along the Gauss-Newton direction: at a (local) minimum
            converged = True
            break
        rel_change = np.linalg.norm(t * step) / (np.linalg.norm(p) + 1e-300)
        p, cost = trial, trial_cost
        trace.append(cost)
        if rel_change < step_tol:
            r, jac = _residual_and_jacobian(p, x, y, fixed_phase)
            grad_norm = float(np.linalg.norm(jac.T @ r))
            converged = True
            break
    return p, cost, converged, iterations, grad_norm, trace


def _initial_guesses(x, y, fixed_phase):
    """Starts seeded from the zero crossings, plus the best points of a coarse scan.

    The outermost crossing pair gives centre and splitting, the crossing
    spread the width.  Crossings move with a dispersive admixture and merge
    for barely resolved doublets, so the best cells of an exhaustive
    two-position scan (:func:`_pair_scan`) are added as starts too.
    """
    zc = find_extrema(y, x).zero_crossings if y.size >= 5 else []
    dx = float(np.median(np.diff(x)))
    if len(zc) >= 2:
        positions = np.array([z[0] for z in zc])
        lo, hi = positions.min(), positions.max()
        c0, s0 = 0.5 * (lo + hi), hi - lo
        w0 = max(float(np.std(positions)), 3 * dx)
    else:
        c0 = float(x[np.argmax(np.abs(y))])
        s0 = w0 = (x[-1] - x[0]) / 20
    s0 = max(s0, 3 * dx)
    phases = [0.0] if fixed_phase is not None else [0.0, np.pi / 2, np.pi, -np.pi / 2]
    starts = [(c0, s0 * f, w0, ph) for f in (1.0, 0.5, 1.5) for ph in phases]

    starts.extend(_pair_scan(x, y, fixed_phase, dx))
    return starts


def _pair_scan(x, y, fixed_phase, dx):
    """Best (centre, splitting, width, phase) cells of a two-position scan.

    For each trial width and phase, single-component profiles are tabulated
    at candidate positions; with their Gram matrix M and projections v the
    least-squares gain of every position pair (i, j) is
    (M_jj v_i^2 - 2 M_ij v_i v_j + M_ii v_j^2) / (M_ii M_jj - M_ij^2).
    """
    stride = max(1, x.size // SCAN_SAMPLES)
    xs, ys = x[::stride], y[::stride]
    span = x[-1] - x[0]
    support = x[np.abs(y) >= 1e-2 * np.max(np.abs(y))]
    widths = np.geomspace(max(2 * dx, span / 400), span / 8, 8)
    if fixed_phase is not None:
        phases = [fixed_phase]
    else:
        phases = list(np.linspace(-np.pi / 2, np.pi / 2, SCAN_PHASES, endpoint=False))
    cells = []
    for w in widths:
        lo, hi = support.min() - 2 * w, support.max() + 2 * w
        positions = np.arange(lo, hi + w / 6, w / 3)
        if positions.size > SCAN_POSITIONS:
            positions = np.linspace(lo, hi, SCAN_POSITIONS)
        for ph in phases:
            basis = lorentzian_derivative(xs[:, None] - positions[None, :], w, ph)
            gram = basis.T @ basis
            proj = basis.T @ ys
            d = np.diag(gram)
            det = np.outer(d, d) - gram**2
            num = (d[None, :] * proj[:, None] ** 2 - 2 * gram * np.outer(proj, proj)
                   + d[:, None] * proj[None, :] ** 2)
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(det > 1e-12 * np.outer(d, d), num / det, -np.inf)
            gain = np.triu(gain, k=1)
            gain[np.tril_indices_from(gain)] = -np.inf
            i, j = np.unravel_index(np.argmax(gain), gain.shape)
            cells.append((float(gain[i, j]), (0.5 * (positions[i] + positions[j]),
                                              positions[j] - positions[i], float(w), float(ph))))
    cells.sort(key=lambda item: -item[0])
    return [cell for _, cell in cells[:SCAN_KEEP]]


def fit_doublet(signal, grid, init=None, phase=None, step_tol=1e-8, grad_tol=1e-10,
                max_iter=500):
    """Least-squares fit of two derivative-of-Lorentzian components.

    S(x) = A1 D(x - c + s/2) + A2 D(x - c - s/2) with D from
    :func:`lorentzian_derivative`, common half-width w and a common
    absorption/dispersion phase.  ``phase=None`` fits the phase; a number
    holds it fixed (0 gives purely absorptive components).  Minimised by
    damped Gauss-Newton with step halving.  Without ``init`` a fixed set of
    starts seeded from the zero crossings is tried and the best kept.

    ``init`` is a dict with any of ``center``, ``splitting``, ``width``,
    ``phase``, ``amplitudes``.  Reported ``width`` is the full width 2w.
    """
    y_raw = np.asarray(signal, dtype=float)
    x = np.asarray(grid, dtype=float)
    if x.shape != y_raw.shape or x.size < 7:
        raise AnalysisError("need matching signal and grid with at least 7 points")
    scale = float(np.max(np.abs(y_raw)))
    if scale == 0 or np.ptp(y_raw) == 0:
        return DoubletFit(splitting=0.0, width=float("nan"), center=float("nan"),
                          amplitudes=(0.0, 0.0), phase=0.0,
                          residual_rms=float(np.sqrt(np.mean(y_raw**2))),
                          converged=False, iterations=0, gradient_norm=float("nan"),
                          degenerate=True)
    y = y_raw / scale

    if init is not None:
        starts = [(init.get("center", 0.5 * (x[0] + x[-1])), init.get("splitting", (x[-1] - x[0]) / 10),
                   init.get("width", (x[-1] - x[0]) / 20),
                   init.get("phase", 0.0) if phase is None else phase)]
    else:
        starts = _initial_guesses(x, y, phase)

    # short exploratory runs from every start, then refine the best one
    explore = max_iter if len(starts) == 1 else min(max_iter, EXPLORE_ITERATIONS)
    best = None
    for c0, s0, w0, ph0 in starts:
        if phase is not None:
            ph0 = phase
        if init is not None and "amplitudes" in init:
            amps = np.asarray(init["amplitudes"], dtype=float) / scale
        else:
            amps = _linear_amplitudes(x, y, c0, s0, w0, ph0)
        p0 = [amps[0], amps[1], c0, s0, w0] + ([ph0] if phase is None else [])
        result = _gauss_newton(np.array(p0, dtype=float), x, y, phase, step_tol, grad_tol, explore)
        if best is None or result[1] < best[1]:
            best = result

    p, cost, converged, iterations, grad_norm, trace = best
    if not converged and iterations < max_iter:
        p, cost, converged, more, grad_norm, more_trace = _gauss_newton(
            p, x, y, phase, step_tol, grad_tol, max_iter - iterations)
        iterations += more
        trace = trace + more_trace[1:]
    a1, a2, c, s, w = (float(v) for v in p[:5])
    ph = float(p[5]) if phase is None else float(phase)

    if phase is None:
        # D(phase + pi) = -D(phase): fold the phase into (-pi/2, pi/2]
        turns = np.floor((ph + np.pi / 2) / np.pi)
        ph -= turns * np.pi
        if ph <= -np.pi / 2:
            ph += np.pi
            turns -= 1
        if int(turns) % 2:
            a1, a2 = -a1, -a2
    if s < 0:
        s, a1, a2 = -s, a2, a1
    w = abs(w)

    amp_max = max(abs(a1), abs(a2))
    one_sided = amp_max == 0 or min(abs(a1), abs(a2)) < 1e-6 * amp_max
    collapsed = s < 1e-3 * w
    splitting = 0.0 if one_sided else s
    return DoubletFit(
        splitting=splitting, width=2 * w, center=c,
        amplitudes=(a1 * scale, a2 * scale), phase=ph,
        residual_rms=float(np.sqrt(2 * cost / x.size)) * scale,
        converged=bool(converged), iterations=int(iterations), gradient_norm=grad_norm,
        degenerate=bool(one_sided or collapsed),
        trace=[float(t) * scale**2 for t in trace],
    )


def asymmetry(fit):
    """(|A1| - |A2|) / (|A1| + |A2|); zero for a balanced doublet."""
    a1, a2 = (abs(a) for a in fit.amplitudes)
    if a1 + a2 == 0:
        raise AnalysisError("asymmetry undefined: both amplitudes are zero")
    return (a1 - a2) / (a1 + a2)


# -- regression ---------------------------------------------------------------

def fit_linear(points: Sequence[Tuple[float, float]], through_origin=True):
    """Ordinary least squares of y on x, optionally through the origin."""
    pts = [(float(a), float(b)) for a, b in points]
    if len(pts) < 2:
        raise AnalysisError("linear fit needs at least two points")
    x, y = (np.array(v) for v in zip(*pts))
    if through_origin:
        sxx = float(x @ x)
        if sxx == 0:
            raise AnalysisError("rank-deficient input: all x are zero")
        slope = float(x @ y) / sxx
        resid = y - slope * x
        dof = len(x) - 1
        stderr = float(np.sqrt((resid @ resid) / dof / sxx))
        return LinearFit(slope=slope, intercept=0.0, slope_stderr=stderr, points=pts,
                         through_origin=True)
    if np.ptp(x) == 0:
        raise AnalysisError("rank-deficient input: all x are equal")
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = len(x) - 2
    if dof > 0:
        cov = (resid @ resid) / dof * np.linalg.inv(design.T @ design)
        stderr = float(np.sqrt(cov[0, 0]))
    else:
        stderr = float("nan")
    return LinearFit(slope=float(coef[0]), intercept=float(coef[1]), slope_stderr=stderr,
                     points=pts, through_origin=False)
