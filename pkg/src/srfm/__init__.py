"""Selective-reflection FM spectroscopy of a dense, optically driven alkali vapor."""
__version__ = "0.1.0"

from .analysis import (AnalysisError, DoubletFit, ExtremaReport, LinearFit, asymmetry,
                       doublet_model, find_extrema, fit_doublet, fit_linear,
                       lorentzian_derivative, resolved_lobes, width_from_mm)
from .config import ConfigError, ScenarioConfig, load_config, load_preset
from .model import (AtomSystem, ConvergenceError, CoherenceRates, DriveField,
                    NumericalFloorWarning, ProbeField, VaporState, coherence_rates,
                    generalized_rabi, lorentz_shift, rabi_from_field, rabi_from_intensity,
                    refractive_index, self_width, steady_populations, susceptibility,
                    two_level_susceptibility)
from .reflection import (ComplexSpectrum, FmParams, WindowMedium, fm_spectrum_derivative,
                         fm_spectrum_lockin, reflection_spectrum, reflectivity)
from .runner import InputDataError, run_fit, run_spectrum, run_sweep, simulate

__all__ = [name for name in dir() if not name.startswith("_")]
