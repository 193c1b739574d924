"""Driven dense-vapor model: Rabi frequencies, populations, widths, susceptibility.

Internal units: lengths in cm, densities in cm^-3, angular frequencies and
rates in rad/ns.  The three levels are a (probe upper level, D1), b (ground)
and c (drive upper level, D2).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .units import C_CGS, E_CGS, HBAR_CGS, TWO_PI, W_PER_CM2_TO_CGS

# calibration point: N = 4.9e17 cm^-3 gives a 28.4 GHz self-broadened width
CALIBRATION_DENSITY = 4.9e17
CALIBRATION_WIDTH_GHZ = 28.4

DENOMINATOR_FLOOR = 1e-30


class ConvergenceError(RuntimeError):
    """Raised when the population fixed point does not converge."""

    def __init__(self, message, last_iterate=None, residual=None, iterations=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations


class NumericalFloorWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class AtomSystem:
    """Species constants for the V-type three-level atom.

    ``line_strength_factor`` scales the probe line strength relative to a
    transition dipole fully aligned with the probe field (peak cross-section
    3 lambda^2 / 2pi).  For unpolarized potassium D1 (J=1/2 -> J'=1/2) the
    degeneracy-averaged peak cross-section is lambda^2 / 2pi, hence 1/3.

    ``self_width_rate_fraction`` is the part of the self-broadened full width
    that enters each coherence decay rate.  The quoted Gamma_self is a full
    width, so each coherence relaxes at Gamma_self / 2 on top of its
    radiative contribution.
    """

    lambda_probe: float = 770e-7
    lambda_drive: float = 766e-7
    gamma_rad: float = 1.0 / 26.72
    dipole_projection_factor: float = 1.0 / 3.0
    k_self: float = TWO_PI * CALIBRATION_WIDTH_GHZ / CALIBRATION_DENSITY
    rabi_intensity_coefficient: float = 8e7
    line_strength_factor: float = 1.0 / 3.0
    self_width_rate_fraction: float = 0.5

    def __post_init__(self):
        for name in ("lambda_probe", "lambda_drive", "gamma_rad", "k_self",
                     "rabi_intensity_coefficient", "line_strength_factor",
                     "self_width_rate_fraction"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"AtomSystem.{name} must be positive, got {value!r}")
        if not 0 < self.dipole_projection_factor <= 1:
            raise ValueError("AtomSystem.dipole_projection_factor must lie in (0, 1]")

    @classmethod
    def calibrated(cls, density=CALIBRATION_DENSITY, width_ghz=CALIBRATION_WIDTH_GHZ, **kwargs):
        """Atom whose k_self maps ``density`` onto a self width of ``width_ghz``."""
        return cls(k_self=TWO_PI * width_ghz / density, **kwargs)

    @property
    def probe_prefactor(self):
        """Susceptibility prefactor C (cm^3 rad/ns); chi ~ C * n / rate."""
        return (self.line_strength_factor * 3.0 * self.lambda_probe**3 * self.gamma_rad
                / (32.0 * np.pi**3))


@dataclass(frozen=True)
class VaporState:
    density_total: float
    n_a: float
    n_b: float
    n_c: float
    gamma_self: float
    lorentz_shift: float
    collisional_shift: float = 0.0
    iterations: int = 0
    residual: float = 0.0

    @classmethod
    def from_populations(cls, atom, n_a, n_b, n_c, collisional_shift=0.0, **diag):
        if min(n_a, n_b, n_c) < 0:
            raise ValueError("populations must be non-negative")
        return cls(
            density_total=n_a + n_b + n_c,
            n_a=float(n_a), n_b=float(n_b), n_c=float(n_c),
            gamma_self=self_width(atom, n_b),
            lorentz_shift=lorentz_shift(atom, n_b, n_a),
            collisional_shift=float(collisional_shift),
            **diag,
        )

    @property
    def excitation_fraction(self):
        return (self.n_a + self.n_c) / self.density_total


@dataclass(frozen=True)
class DriveField:
    """Pump field on the b <-> c transition.

    ``detuning`` is omega_cb - omega_pump.  With ``detuning_reference="bare"``
    it is measured from the unshifted transition, and the local-field and
    collisional shifts are added on top.  With ``"shifted"`` it is measured
    from the shifted resonance, which is how an experiment tuning the pump by
    the spectrum's symmetry would set it.

    ``rabi`` overrides the power/area route when given.
    """

    power: float = 0.0
    beam_area: float = 5e-4
    rabi: Optional[float] = None
    detuning: float = 0.0
    detuning_reference: str = "bare"
    population_decay: Optional[float] = None
    excitation_override: Optional[float] = None

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("DriveField.power must be >= 0")
        if not self.beam_area > 0:
            raise ValueError("DriveField.beam_area must be > 0")
        if self.rabi is not None and self.rabi < 0:
            raise ValueError("DriveField.rabi must be >= 0")
        if self.population_decay is not None and not self.population_decay > 0:
            raise ValueError("DriveField.population_decay must be > 0")
        if self.detuning_reference not in ("bare", "shifted"):
            raise ValueError("DriveField.detuning_reference must be 'bare' or 'shifted'")
        if self.excitation_override is not None and not 0 <= self.excitation_override <= 1:
            raise ValueError("DriveField.excitation_override must lie in [0, 1]")

    def resolved_rabi(self, atom):
        if self.rabi is not None:
            return float(self.rabi)
        return rabi_from_intensity(atom, intensity_from_power(self.power, self.beam_area))

    def resolved_population_decay(self, atom):
        return atom.gamma_rad if self.population_decay is None else float(self.population_decay)


@dataclass(frozen=True)
class ProbeField:
    """Weak probe on b <-> a.

    ``detuning_grid`` holds omega_ab - omega_probe (rad/ns).  ``rabi_probe``
    is kept for bookkeeping; the linear-response model does not use it.
    """

    detuning_grid: np.ndarray
    rabi_probe: float = 0.0

    def __post_init__(self):
        grid = np.asarray(self.detuning_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("probe grid needs at least two points")
        if not np.all(np.diff(grid) > 0):
            raise ValueError("probe grid must be strictly increasing")
        object.__setattr__(self, "detuning_grid", grid)

    @classmethod
    def from_span(cls, span_ghz, points, center_ghz=0.0, narrowest_feature_ghz=None, rabi_probe=0.0):
        """Uniform grid of ``points`` over ``span_ghz`` centred on ``center_ghz``.

        If ``narrowest_feature_ghz`` is given the spacing must not exceed a
        tenth of it.
        """
        if points < 2 or not span_ghz > 0:
            raise ValueError("need span > 0 and at least two points")
        nu = center_ghz + np.linspace(-span_ghz / 2, span_ghz / 2, int(points))
        step = span_ghz / (points - 1)
        if narrowest_feature_ghz is not None and step > narrowest_feature_ghz / 10:
            raise ValueError(
                f"grid step {step:.4g} GHz exceeds 1/10 of the narrowest feature "
                f"({narrowest_feature_ghz:.4g} GHz); use at least "
                f"{int(np.ceil(10 * span_ghz / narrowest_feature_ghz)) + 1} points")
        return cls(detuning_grid=TWO_PI * nu, rabi_probe=rabi_probe)

    @property
    def grid_ghz(self):
        return self.detuning_grid / TWO_PI


@dataclass(frozen=True)
class CoherenceRates:
    gamma_ab_t: float
    gamma_cb_t: float
    gamma_ca_t: float
    delta: np.ndarray
    delta_cb: float
    delta_ca: np.ndarray
    Gamma_ab: np.ndarray = field(repr=False)
    Gamma_cb: complex = field(repr=False)
    Gamma_ca: np.ndarray = field(repr=False)


# -- operations ---------------------------------------------------------------

def intensity_from_power(power, area):
    """Beam intensity in W/cm^2."""
    if not area > 0:
        raise ValueError("beam area must be positive")
    if power < 0:
        raise ValueError("power must be non-negative")
    return power / area


def rabi_from_intensity(atom, intensity):
    """Drive Rabi frequency (rad/ns) from intensity in W/cm^2."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    hz = atom.rabi_intensity_coefficient * np.sqrt(intensity)
    return TWO_PI * hz * 1e-9


def field_from_intensity(intensity):
    """Field amplitude (statV/cm) for intensity in W/cm^2, from I = c E^2 / 8 pi."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    return np.sqrt(8.0 * np.pi * intensity * W_PER_CM2_TO_CGS / C_CGS)


def rabi_from_field(atom, field_amplitude, dipole):
    """Rabi frequency (rad/ns) from field amplitude and full dipole moment.

    ``dipole`` is the transition dipole in e*cm; only its projection
    ``atom.dipole_projection_factor * dipole`` couples to the field.
    """
    if field_amplitude < 0:
        raise ValueError("field amplitude must be non-negative")
    projected = atom.dipole_projection_factor * dipole * E_CGS
    return field_amplitude * projected / HBAR_CGS * 1e-9


def dipole_matching_coefficient(atom):
    """Dipole (e*cm) for which the field route reproduces ``rabi_from_intensity``."""
    field_per_root_intensity = field_from_intensity(1.0)
    omega_per_root_intensity = TWO_PI * atom.rabi_intensity_coefficient
    return (omega_per_root_intensity * HBAR_CGS
            / (field_per_root_intensity * atom.dipole_projection_factor * E_CGS))


def generalized_rabi(rabi, detuning):
    return float(np.hypot(rabi, detuning))


def self_width(atom, n_b):
    """Self-broadened width Gamma_self = k n_b (rad/ns)."""
    if n_b < 0:
        raise ValueError("n_b must be non-negative")
    return atom.k_self * n_b


def lorentz_shift(atom, n_b, n_a):
    """Local-field shift (k/3)(n_b - n_a), positive for an unexcited vapor."""
    if n_b < 0 or n_a < 0:
        raise ValueError("populations must be non-negative")
    return atom.k_self / 3.0 * (n_b - n_a)


def _pump_shift(atom, n_b, drive, collisional_shift):
    if drive.detuning_reference == "shifted":
        return 0.0
    return lorentz_shift(atom, n_b, 0.0) + collisional_shift


def saturated_excitation(atom, drive, density, n_b, collisional_shift=0.0):
    """Steady-state c population of the driven b <-> c pair given n_b.

    Two-level saturation with coherence decay gamma_cb(n_b) and population
    decay Gamma_1; the pump detuning carries the n_b-dependent shift when it
    is referenced to the bare line.
    """
    rabi = drive.resolved_rabi(atom)
    g1 = drive.resolved_population_decay(atom)
    gcb = atom.gamma_rad / 2 + atom.self_width_rate_fraction * atom.k_self * n_b
    dcb = drive.detuning + _pump_shift(atom, n_b, drive, collisional_shift)
    sat = rabi**2 * gcb / g1
    return density * 0.5 * sat / (dcb**2 + gcb**2 + sat)


def steady_populations(atom, drive, density, collisional_shift=0.0, tol=1e-10,
                       max_iter=500, damping=0.5):
    """Self-consistent level populations for the driven vapor.

    n_a is neglected (weak probe).  The c population follows the two-level
    saturation law, whose width and shift depend on n_b; the loop
    ``n_b <- (1 - damping) n_b + damping (N - n_c(n_b))`` runs until the
    relative update falls below ``tol``.  ``drive.excitation_override``
    bypasses the loop and sets n_c = f N.
    """
    if not density > 0:
        raise ValueError("density must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")

    if drive.excitation_override is not None:
        n_c = drive.excitation_override * density
        return VaporState.from_populations(atom, 0.0, density - n_c, n_c, collisional_shift)

    if drive.resolved_rabi(atom) == 0.0:
        return VaporState.from_populations(atom, 0.0, density, 0.0, collisional_shift)

    n_b = density
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        n_c = saturated_excitation(atom, drive, density, n_b, collisional_shift)
        target = density - n_c
        residual = abs(target - n_b) / density
        if residual <= tol:
            n_b = target
            check = abs(saturated_excitation(atom, drive, density, n_b, collisional_shift) - n_c) / density
            return VaporState.from_populations(
                atom, 0.0, n_b, n_c, collisional_shift, iterations=iteration, residual=check)
        n_b = (1 - damping) * n_b + damping * target

    raise ConvergenceError(
        f"population fixed point did not converge in {max_iter} iterations "
        f"(residual {residual:.3e})",
        last_iterate=n_b, residual=residual, iterations=max_iter)


def coherence_rates(atom, vapor, probe_detuning, pump_detuning, pump_reference="bare"):
    """Complex coherence rates on the probe grid.

    ``probe_detuning`` is omega_ab - omega_probe (rad/ns, bare); the shifted
    probe detuning adds Delta_L + Delta_c.  The two-photon detuning is
    delta_ca = delta_cb - delta, so the shifts cancel in it.
    """
    shift = vapor.lorentz_shift + vapor.collisional_shift
    delta = np.asarray(probe_detuning, dtype=float) + shift
    delta_cb = float(pump_detuning) + (shift if pump_reference == "bare" else 0.0)
    delta_ca = delta_cb - delta

    broadening = atom.self_width_rate_fraction * vapor.gamma_self
    g_ab = atom.gamma_rad / 2 + broadening
    g_cb = atom.gamma_rad / 2 + broadening
    g_ca = atom.gamma_rad + broadening
    return CoherenceRates(
        gamma_ab_t=g_ab, gamma_cb_t=g_cb, gamma_ca_t=g_ca,
        delta=delta, delta_cb=delta_cb, delta_ca=delta_ca,
        Gamma_ab=g_ab + 1j * delta,
        Gamma_cb=g_cb + 1j * delta_cb,
        Gamma_ca=g_ca + 1j * delta_ca,
    )


def susceptibility(atom, vapor, rates, drive_rabi):
    """Linear probe susceptibility of the driven V system.

    chi = i C [(n_b - n_a) + W (n_c - n_b) / (Gcb* Gca*)] / [Gab + W / Gca*]

    with W = (Omega/2)^2, so that the dressed components sit Omega apart.
    The pump-side rates enter conjugated: the probe coherence couples to
    the a-c coherence, which rotates opposite to Gamma_ca as defined.  The
    sign makes Im chi > 0 for an absorbing vapor.
    """
    w = (drive_rabi / 2.0) ** 2
    g_cb = np.conj(rates.Gamma_cb)
    g_ca = np.conj(rates.Gamma_ca)
    numerator = (vapor.n_b - vapor.n_a) + w * (vapor.n_c - vapor.n_b) / (g_cb * g_ca)
    denominator = rates.Gamma_ab + w / g_ca

    small = np.abs(denominator) < DENOMINATOR_FLOOR
    if np.any(small):
        warnings.warn(f"susceptibility denominator below {DENOMINATOR_FLOOR:g} at "
                      f"{int(np.count_nonzero(small))} grid points", NumericalFloorWarning)
        denominator = np.where(small, DENOMINATOR_FLOOR, denominator)
    return 1j * atom.probe_prefactor * numerator / denominator


def two_level_susceptibility(atom, vapor, probe_detuning):
    """Undriven closed form i C (n_b - n_a) / (gamma_ab + i delta)."""
    rates = coherence_rates(atom, vapor, probe_detuning, 0.0)
    return 1j * atom.probe_prefactor * (vapor.n_b - vapor.n_a) / rates.Gamma_ab


def refractive_index(chi):
    """n = sqrt(1 + 4 pi chi) on the passive branch (Re n > 0, Im n >= 0).

    For a gain medium (Im chi < 0) the root with Re n > 0 is kept.
    """
    z = 1.0 + 4.0 * np.pi * np.asarray(chi, dtype=complex)
    n = np.sqrt(z)
    flip = (n.imag < 0) & (n.real <= 0)
    n = np.where(flip, -n, n)
    return n if np.ndim(chi) else complex(n)


def with_detuning(drive, detuning):
    return replace(drive, detuning=detuning)
