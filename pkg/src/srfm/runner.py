"""Scenario execution: spectra, Rabi sweeps and fits of external data, with file output."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .analysis import (AnalysisError, DoubletFit, ExtremaReport, LinearFit, asymmetry,
                       find_extrema, fit_doublet, fit_linear, width_from_mm)
from .config import ScenarioConfig
from .model import ConvergenceError, VaporState, generalized_rabi, steady_populations
from .reflection import (ComplexSpectrum, fm_spectrum_derivative, fm_spectrum_lockin,
                         reflection_spectrum)
from .units import TWO_PI

REPORT_SCHEMA = "srfm.report/1"
SPECTRUM_COLUMNS = ("detuning_GHz", "Re_chi", "Im_chi", "Re_n", "Im_n", "R", "FM_signal")
SWEEP_COLUMNS = ("omega_tilde_GHz", "splitting_GHz", "width_GHz", "asymmetry",
                 "rabi_GHz", "detuning_GHz", "fit_ok")
MIN_FIT_ROWS = 50


class InputDataError(ValueError):
    """Malformed external data; the message carries file and line."""


def _clean(value):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python numbers."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _fmt(x):
    return repr(float(x))


# -- single spectrum ----------------------------------------------------------

@dataclass
class SpectrumRun:
    config: ScenarioConfig
    vapor: VaporState
    rabi_GHz: float
    detuning_GHz: float
    spectrum: ComplexSpectrum
    extrema: ExtremaReport
    fm_extrema: ExtremaReport
    width_estimate: Optional[float]
    fit: Optional[DoubletFit]
    asymmetry: Optional[float]
    wall_time: float = 0.0

    def derived(self):
        v = self.vapor
        return {
            "rabi_GHz": self.rabi_GHz,
            "drive_detuning_GHz": self.detuning_GHz,
            "omega_tilde_GHz": generalized_rabi(self.rabi_GHz, self.detuning_GHz),
            "populations_per_cm3": {"n_a": v.n_a, "n_b": v.n_b, "n_c": v.n_c},
            "excitation_fraction": v.excitation_fraction,
            "gamma_self_GHz": v.gamma_self / TWO_PI,
            "lorentz_shift_GHz": v.lorentz_shift / TWO_PI,
            "collisional_shift_GHz": v.collisional_shift / TWO_PI,
            "linewidth_GHz": self.spectrum.linewidth_ghz,
            "solver_iterations": v.iterations,
            "solver_residual": v.residual,
        }

    def analysis(self):
        e = self.extrema
        out = {
            "delta_mm_GHz": e.delta_mm,
            "estimated_width_GHz": self.width_estimate,
            "principal_max": e.principal_max,
            "principal_min": e.principal_min,
            "fm_zero_crossings_GHz": [z[0] for z in self.fm_extrema.zero_crossings],
            "doublet_fit": None if self.fit is None else self.fit.as_dict(),
            "asymmetry": self.asymmetry,
        }
        return out

    def report(self):
        return _clean({
            "schema": REPORT_SCHEMA,
            "version": __version__,
            "kind": "spectrum",
            "scenario_id": self.config.scenario_id,
            "config": self.config.as_dict(),
            "derived": self.derived(),
            "analysis": self.analysis(),
            "wall_time_s": self.wall_time,
        })

    def columns(self):
        s = self.spectrum
        return {
            "detuning_GHz": s.grid, "Re_chi": s.chi.real, "Im_chi": s.chi.imag,
            "Re_n": s.n.real, "Im_n": s.n.imag, "R": s.reflectivity, "FM_signal": s.fm_signal,
        }


def _want_fit(config, rabi_ghz):
    if config.fit_doublet == "auto":
        return rabi_ghz > 0 and config.excitation_override is None
    return config.fit_doublet == "yes"


def simulate(config, rabi_ghz=None, power_w=None, detuning_ghz=None, fit=None):
    """Run one scenario (optionally at a different pump setting) in memory."""
    start = time.perf_counter()
    atom = config.atom()
    drive = config.drive(rabi_ghz, power_w, detuning_ghz)
    density = config.density_per_cm3
    vapor = steady_populations(atom, drive, density,
                               collisional_shift=TWO_PI * config.collisional_shift_GHz,
                               tol=config.solver_tol, max_iter=config.solver_max_iter,
                               damping=config.solver_damping)
    spectrum = reflection_spectrum(atom, vapor, drive, config.probe(), config.window())
    fm = config.fm()
    if config.fm_method == "lockin":
        spectrum.fm_signal = fm_spectrum_lockin(spectrum, fm)
    else:
        spectrum.fm_signal = fm_spectrum_derivative(spectrum, fm)

    # the max-min interval is read off the reflection spectrum itself; the FM
    # zero crossings mark the same points
    extrema = find_extrema(spectrum.reflectivity, spectrum.grid)
    fm_extrema = find_extrema(spectrum.fm_signal, spectrum.grid)
    width = width_from_mm(extrema.delta_mm) if extrema.delta_mm else None
    rabi = drive.resolved_rabi(atom) / TWO_PI
    doublet, asym = None, None
    if _want_fit(config, rabi) if fit is None else fit:
        doublet = fit_doublet(spectrum.fm_signal, spectrum.grid, phase=config.fit_phase_value(),
                              max_iter=config.fit_max_iter)
        if not doublet.degenerate:
            asym = asymmetry(doublet)
    return SpectrumRun(config=config, vapor=vapor, rabi_GHz=rabi,
                       detuning_GHz=drive.detuning / TWO_PI, spectrum=spectrum,
                       extrema=extrema, fm_extrema=fm_extrema, width_estimate=width,
                       fit=doublet, asymmetry=asym,
                       wall_time=time.perf_counter() - start)


# -- writers ------------------------------------------------------------------

def _table_csv(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def spectrum_csv(run):
    cols = run.columns()
    rows = zip(*(map(_fmt, cols[name]) for name in SPECTRUM_COLUMNS))
    return _table_csv(SPECTRUM_COLUMNS, rows)


def spectrum_json(run):
    cols = run.columns()
    return json.dumps({name: [float(v) for v in cols[name]] for name in SPECTRUM_COLUMNS})


def _write(out_dir, name, text):
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_report(out_dir, stem, report):
    return _write(out_dir, f"{stem}.report.json", json.dumps(report, indent=2) + "\n")


def run_spectrum(config, out_dir=None, fmt="csv"):
    """Compute a spectrum; write ``<id>.csv`` (or ``.json``) and ``<id>.report.json``.

    Nothing is written unless the whole computation succeeded.
    """
    run = simulate(config)
    if out_dir is not None:
        stem = config.scenario_id
        if fmt == "csv":
            _write(out_dir, f"{stem}.csv", spectrum_csv(run))
        else:
            _write(out_dir, f"{stem}.json", spectrum_json(run) + "\n")
        write_report(out_dir, stem, run.report())
    return run


# -- sweep --------------------------------------------------------------------

@dataclass
class SweepPoint:
    rabi_GHz: float
    detuning_GHz: float
    omega_tilde_GHz: float
    splitting_GHz: float = float("nan")
    width_GHz: float = float("nan")
    asymmetry: float = float("nan")
    fit_ok: bool = False
    error: Optional[str] = None
    fit: Optional[DoubletFit] = None

    def row(self):
        return [_fmt(self.omega_tilde_GHz), _fmt(self.splitting_GHz), _fmt(self.width_GHz),
                _fmt(self.asymmetry), _fmt(self.rabi_GHz), _fmt(self.detuning_GHz),
                str(int(self.fit_ok))]


@dataclass
class SweepRun:
    config: ScenarioConfig
    points: List[SweepPoint]
    linear_fit: LinearFit
    wall_time: float = 0.0

    def report(self):
        return _clean({
            "schema": REPORT_SCHEMA,
            "version": __version__,
            "kind": "sweep",
            "scenario_id": self.config.scenario_id,
            "config": self.config.as_dict(),
            "points": [{
                "rabi_GHz": p.rabi_GHz, "detuning_GHz": p.detuning_GHz,
                "omega_tilde_GHz": p.omega_tilde_GHz, "splitting_GHz": p.splitting_GHz,
                "width_GHz": p.width_GHz, "asymmetry": p.asymmetry, "fit_ok": p.fit_ok,
                "error": p.error, "doublet_fit": None if p.fit is None else p.fit.as_dict(),
            } for p in self.points],
            "linear_fit": self.linear_fit.as_dict(),
            "wall_time_s": self.wall_time,
        })


def _sweep_point(config, rabi, power, detuning):
    try:
        run = simulate(config, rabi_ghz=rabi, power_w=power, detuning_ghz=detuning, fit=True)
    except ConvergenceError as exc:
        atom = config.atom()
        rabi_val = config.drive(rabi, power, detuning).resolved_rabi(atom) / TWO_PI
        return SweepPoint(rabi_val, detuning, generalized_rabi(rabi_val, detuning), error=str(exc))
    point = SweepPoint(run.rabi_GHz, run.detuning_GHz,
                       generalized_rabi(run.rabi_GHz, run.detuning_GHz), fit=run.fit)
    fit = run.fit
    if fit.converged and not fit.degenerate:
        point.splitting_GHz, point.width_GHz = fit.splitting, fit.width
        point.asymmetry = run.asymmetry
        point.fit_ok = True
    else:
        point.error = "doublet fit did not converge" if not fit.converged else "degenerate doublet"
    return point


def sweep_csv(run):
    return _table_csv(SWEEP_COLUMNS, [p.row() for p in run.points])


def run_sweep(config, out_dir=None, fmt="csv", threads=1):
    """Splitting against generalized Rabi frequency over the configured sweep.

    Points are computed independently (optionally in a thread pool) and kept
    in configuration order.  Points whose fit failed are reported but left
    out of the regression; if fewer than two remain a ConvergenceError is
    raised and nothing is written.
    """
    if not config.is_sweep:
        raise AnalysisError("configuration defines no sweep axis")
    start = time.perf_counter()
    jobs = config.sweep_points()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda job: _sweep_point(config, *job), jobs))
    else:
        points = [_sweep_point(config, *job) for job in jobs]

    good = [(p.omega_tilde_GHz, p.splitting_GHz) for p in points if p.fit_ok]
    if len(good) < 2:
        raise ConvergenceError(f"only {len(good)} of {len(points)} sweep points produced a "
                               "usable doublet fit")
    linear = fit_linear(good, through_origin=config.through_origin)
    run = SweepRun(config=config, points=points, linear_fit=linear,
                   wall_time=time.perf_counter() - start)
    if out_dir is not None:
        stem = config.scenario_id
        if fmt == "csv":
            _write(out_dir, f"{stem}.csv", sweep_csv(run))
        else:
            _write(out_dir, f"{stem}.json", json.dumps(run.report()["points"]) + "\n")
        write_report(out_dir, stem, run.report())
    return run


# -- external data ------------------------------------------------------------

def read_two_column(path):
    """Read (detuning_GHz, signal) rows.

    An optional non-numeric header line is skipped.  If the header names
    ``FM_signal`` (a spectrum file written by :func:`run_spectrum`), that
    column and ``detuning_GHz`` are used instead of the first two.
    """
    path = Path(path)
    xs, ys = [], []
    ix, iy = 0, 1
    with path.open(newline="") as handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row) or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 2:
                raise InputDataError(f"{path}:{lineno}: expected two columns, got {len(row)}")
            try:
                x, y = float(row[ix]), float(row[iy])
            except IndexError:
                raise InputDataError(f"{path}:{lineno}: row is missing the signal column") from None
            except ValueError:
                if not xs and lineno == 1:
                    header = [cell.strip() for cell in row]
                    if "FM_signal" in header and "detuning_GHz" in header:
                        ix, iy = header.index("detuning_GHz"), header.index("FM_signal")
                    continue
                raise InputDataError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise InputDataError(f"{path}:{lineno}: non-finite value")
            xs.append(x)
            ys.append(y)
    if len(xs) < MIN_FIT_ROWS:
        raise InputDataError(f"{path}: need at least {MIN_FIT_ROWS} data rows, found {len(xs)}")
    x, y = np.array(xs), np.array(ys)
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    if np.any(np.diff(x) == 0):
        raise InputDataError(f"{path}: duplicate detuning values")
    return x, y


@dataclass
class FitRun:
    source: str
    fit: DoubletFit
    asymmetry: Optional[float]
    points: int
    options: dict = field(default_factory=dict)

    def report(self):
        return _clean({
            "schema": REPORT_SCHEMA,
            "version": __version__,
            "kind": "fit",
            "source": self.source,
            "points": self.points,
            "options": self.options,
            "doublet_fit": self.fit.as_dict(),
            "asymmetry": self.asymmetry,
            "residual_trace": self.fit.trace,
        })


def run_fit(path, out_dir=None, phase=None, init=None, max_iter=500):
    """Fit the two-component model to a two-column CSV of FM data."""
    x, y = read_two_column(path)
    fit = fit_doublet(y, x, init=init, phase=phase, max_iter=max_iter)
    asym = None if fit.degenerate else asymmetry(fit)
    run = FitRun(source=str(path), fit=fit, asymmetry=asym, points=int(x.size),
                 options={"phase": "free" if phase is None else phase, "init": init,
                          "max_iter": max_iter})
    if out_dir is not None:
        write_report(out_dir, Path(path).stem + ".fit", run.report())
    return run
