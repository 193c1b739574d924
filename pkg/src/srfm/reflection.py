"""Vapor/window reflectivity and simulated FM lock-in detection."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import coherence_rates, refractive_index, susceptibility
from .units import TWO_PI


@dataclass(frozen=True)
class WindowMedium:
    """Cell window.  Default index is sapphire near 770 nm."""

    n0: float = 1.76

    def __post_init__(self):
        if not self.n0 > 1:
            raise ValueError("window index n0 must exceed 1")


@dataclass(frozen=True)
class FmParams:
    """Frequency-modulation settings.

    ``mod_range`` is the peak-to-peak excursion in GHz; ``mod_rate`` (Hz) is
    recorded only, since the lock-in is treated as quasi-static.
    """

    mod_range: float = 0.1
    mod_rate: float = 400.0
    harmonic: int = 1
    cycle_samples: int = 64

    def __post_init__(self):
        if not self.mod_range > 0:
            raise ValueError("mod_range must be positive")
        if self.harmonic < 1:
            raise ValueError("harmonic must be a positive integer")
        if self.cycle_samples < 8:
            raise ValueError("cycle_samples must be at least 8")

    @property
    def amplitude(self):
        return self.mod_range / 2.0


@dataclass
class ComplexSpectrum:
    """Probe scan with its optical channels.

    ``grid`` is the bare probe detuning (omega_ab - omega_p)/2pi in GHz.
    ``evaluate`` maps arbitrary detunings (GHz) to reflectivity and is what
    the FM operations sample between grid points.
    """

    grid: np.ndarray
    chi: np.ndarray
    n: np.ndarray
    reflectivity: np.ndarray
    fm_signal: Optional[np.ndarray] = None
    linewidth_ghz: Optional[float] = None
    evaluate: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        size = len(self.grid)
        for name in ("chi", "n", "reflectivity"):
            if len(getattr(self, name)) != size:
                raise ValueError(f"channel {name} does not match the grid length")


def reflectivity(n_vapor, window):
    """Normal-incidence intensity reflectivity of the window/vapor interface."""
    n0 = window.n0 if isinstance(window, WindowMedium) else float(window)
    r = (n_vapor - n0) / (n_vapor + n0)
    return np.abs(r) ** 2


def reflection_spectrum(atom, vapor, drive, probe, window):
    """Susceptibility, index and reflectivity over the probe scan."""
    rabi = drive.resolved_rabi(atom)

    def channels(detuning):
        rates = coherence_rates(atom, vapor, detuning, drive.detuning, drive.detuning_reference)
        chi = susceptibility(atom, vapor, rates, rabi)
        n = refractive_index(chi)
        return chi, n, reflectivity(n, window)

    def evaluate(nu_ghz):
        return channels(TWO_PI * np.asarray(nu_ghz, dtype=float))[2]

    chi, n, refl = channels(probe.detuning_grid)
    linewidth = 2 * (atom.gamma_rad / 2 + atom.self_width_rate_fraction * vapor.gamma_self) / TWO_PI
    return ComplexSpectrum(grid=probe.grid_ghz.copy(), chi=chi, n=n, reflectivity=refl,
                           linewidth_ghz=linewidth, evaluate=evaluate)


def _require_evaluator(spectrum):
    if spectrum.evaluate is None:
        raise ValueError("spectrum carries no evaluator; build it with reflection_spectrum")
    return spectrum.evaluate


def fm_spectrum_derivative(spectrum, fm):
    """Small-modulation FM signal, (dR/dnu) * mod_range / 2.

    Central differences on points nu - h, nu, nu + h with
    h = min(grid step, mod_range / 4).
    """
    evaluate = _require_evaluator(spectrum)
    grid = np.asarray(spectrum.grid, dtype=float)
    step = float(np.min(np.diff(grid)))
    if spectrum.linewidth_ghz is not None and step > spectrum.linewidth_ghz / 10:
        warnings.warn(f"grid step {step:.3g} GHz is coarse against the "
                      f"{spectrum.linewidth_ghz:.3g} GHz linewidth", RuntimeWarning)
    h = min(step, fm.mod_range / 4)
    slope = (evaluate(grid + h) - evaluate(grid - h)) / (2 * h)
    return slope * fm.amplitude


def fm_spectrum_lockin(spectrum, fm):
    """Lock-in output at ``fm.harmonic`` for a sinusoidal frequency dither.

    S(nu) = (2/M) sum_j R(nu + a sin theta_j) sin(h theta_j), theta_j = 2 pi j / M,
    i.e. the trapezoidal rule for the Fourier sine coefficient over one cycle.
    """
    evaluate = _require_evaluator(spectrum)
    grid = np.asarray(spectrum.grid, dtype=float)
    theta = TWO_PI * np.arange(fm.cycle_samples) / fm.cycle_samples
    offsets = fm.amplitude * np.sin(theta)
    samples = evaluate(grid[:, None] + offsets[None, :])
    return 2.0 / fm.cycle_samples * samples @ np.sin(fm.harmonic * theta)
