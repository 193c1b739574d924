import numpy as np
import pytest
from hypothesis import given, strategies as st

from srfm.analysis import find_extrema, resolved_lobes
from srfm.config import PRESETS, load_preset
from srfm.model import AtomSystem, DriveField, ProbeField, steady_populations
from srfm.reflection import (ComplexSpectrum, FmParams, WindowMedium, fm_spectrum_derivative,
                             fm_spectrum_lockin, reflection_spectrum, reflectivity)
from srfm.runner import simulate

SINGLE_SPECTRUM_PRESETS = [p for p in PRESETS if p != "fig3"]


def synthetic(evaluate, grid):
    grid = np.asarray(grid, dtype=float)
    r = evaluate(grid)
    return ComplexSpectrum(grid=grid, chi=np.zeros_like(grid, complex),
                           n=np.ones_like(grid, complex), reflectivity=r, evaluate=evaluate)


def test_reflectivity_examples():
    w = WindowMedium()
    assert reflectivity(1.76, w) == 0.0
    assert reflectivity(1.0, w) == pytest.approx((0.76 / 2.76) ** 2, rel=1e-12)
    assert reflectivity(1.0, w) == pytest.approx(0.0758, abs=1e-4)
    assert reflectivity(1e9j, w) == pytest.approx(1.0, abs=1e-8)


@given(st.floats(1e-3, 10), st.floats(0, 10))
def test_reflectivity_bounded(re, im):
    assert 0.0 <= reflectivity(complex(re, im), WindowMedium()) <= 1.0


def test_window_validation():
    with pytest.raises(ValueError):
        WindowMedium(0.9)
    with pytest.raises(ValueError):
        FmParams(cycle_samples=4)
    with pytest.raises(ValueError):
        FmParams(mod_range=0.0)


def test_spectrum_channel_lengths_checked():
    with pytest.raises(ValueError):
        ComplexSpectrum(grid=np.zeros(3), chi=np.zeros(2), n=np.zeros(3), reflectivity=np.zeros(3))


def test_lockin_linear_identity():
    grid = np.linspace(-5, 5, 41)
    spec = synthetic(lambda nu: 0.3 + 0.02 * nu, grid)
    fm = FmParams(mod_range=0.1)
    np.testing.assert_allclose(fm_spectrum_lockin(spec, fm), 0.02 * 0.05, rtol=1e-12)
    np.testing.assert_allclose(fm_spectrum_lockin(spec, FmParams(mod_range=0.1, harmonic=2)), 0.0,
                               atol=1e-15)


def test_constant_reflectivity_gives_zero():
    spec = synthetic(lambda nu: np.full(np.shape(nu), 0.1), np.linspace(-5, 5, 21))
    fm = FmParams()
    assert np.all(fm_spectrum_derivative(spec, fm) == 0)
    np.testing.assert_allclose(fm_spectrum_lockin(spec, fm), 0.0, atol=1e-15)


def test_single_peak_has_one_zero_crossing():
    spec = synthetic(lambda nu: 1 / (1 + np.asarray(nu) ** 2), np.linspace(-20, 20, 801))
    s = fm_spectrum_derivative(spec, FmParams())
    ext = find_extrema(s, spec.grid)
    assert len(ext.zero_crossings) == 1
    assert ext.principal_max[0] < ext.zero_crossings[0][0] < ext.principal_min[0]


def test_coarse_grid_warns():
    spec = synthetic(lambda nu: 1 / (1 + np.asarray(nu) ** 2), np.linspace(-20, 20, 41))
    spec.linewidth_ghz = 2.0
    with pytest.warns(RuntimeWarning, match="coarse"):
        fm_spectrum_derivative(spec, FmParams())


def test_missing_evaluator():
    spec = ComplexSpectrum(grid=np.zeros(3), chi=np.zeros(3), n=np.zeros(3), reflectivity=np.zeros(3))
    with pytest.raises(ValueError):
        fm_spectrum_lockin(spec, FmParams())


def test_far_tail_reaches_vacuum_baseline():
    atom = AtomSystem()
    v = steady_populations(atom, DriveField(), 4.9e17)
    probe = ProbeField.from_span(1e5, 201, center_ghz=1e6)
    spec = reflection_spectrum(atom, v, DriveField(), probe, WindowMedium())
    np.testing.assert_allclose(spec.reflectivity, (0.76 / 2.76) ** 2, rtol=1e-3)


def test_fm_baseline_decays_as_inverse_square():
    # Lorentzian wings of R fall off as 1/x, so the FM signal falls as 1/x^2;
    # check that law rather than an absolute floor
    run = simulate(load_preset("fig2a"))
    center = -run.vapor.lorentz_shift / (2 * np.pi)
    x = np.geomspace(300, 3000, 12)
    spec = synthetic(run.spectrum.evaluate, center + x)
    s = np.abs(fm_spectrum_derivative(spec, FmParams()))
    slope = np.polyfit(np.log(x), np.log(s), 1)[0]
    assert slope == pytest.approx(-2, abs=0.05)
    peak = np.max(np.abs(run.spectrum.fm_signal))
    assert s[-1] < 1e-3 * peak


@pytest.mark.parametrize("name", SINGLE_SPECTRUM_PRESETS)
def test_lockin_matches_derivative(name):
    spec = simulate(load_preset(name), fit=False).spectrum
    fm = FmParams(mod_range=0.1)
    lock = fm_spectrum_lockin(spec, fm)
    deriv = fm_spectrum_derivative(spec, fm)
    assert np.max(np.abs(lock - deriv)) / np.max(np.abs(deriv)) < 1e-2


@pytest.mark.parametrize("name", SINGLE_SPECTRUM_PRESETS)
def test_lockin_error_shrinks_quadratically(name):
    spec = simulate(load_preset(name), fit=False).spectrum

    def gap(mod_range):
        fm = FmParams(mod_range=mod_range)
        return np.max(np.abs(fm_spectrum_lockin(spec, fm) / fm.amplitude
                             - fm_spectrum_derivative(spec, FmParams(mod_range=1e-3)) / 5e-4))

    assert gap(0.1) / gap(0.05) == pytest.approx(4, rel=0.25)


@pytest.mark.parametrize("name", SINGLE_SPECTRUM_PRESETS)
def test_physical_branch_on_presets(name):
    spec = simulate(load_preset(name), fit=False).spectrum
    assert np.all(spec.n.imag >= 0)
    assert np.all(spec.n.real > 0)
    assert np.all((spec.reflectivity >= 0) & (spec.reflectivity <= 1))


def test_spectrum_deterministic():
    a = simulate(load_preset("fig4_d0"), fit=False).spectrum
    b = simulate(load_preset("fig4_d0"), fit=False).spectrum
    assert np.array_equal(a.reflectivity, b.reflectivity)
    assert np.array_equal(a.fm_signal, b.fm_signal)


def test_driven_fm_shows_two_lobes():
    spec = simulate(load_preset("fig4_d0"), fit=False).spectrum
    assert len(resolved_lobes(spec.fm_signal, spec.grid)) == 2
    undriven = simulate(load_preset("fig2a")).spectrum
    assert len(resolved_lobes(undriven.fm_signal, undriven.grid)) == 1
