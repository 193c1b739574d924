"""Unit helpers.

Spectroscopic quantities are exchanged in ordinary frequency (GHz) and
handled internally as angular frequencies in rad/ns.  Since 1 GHz = 1/ns,
the conversion is a bare factor of 2*pi.
"""
import numpy as np

TWO_PI = 2.0 * np.pi

# CGS constants, derived from scipy's SI values
from scipy import constants as _si

HBAR_CGS = _si.hbar * 1e7              # erg s
C_CGS = _si.c * 1e2                    # cm / s
E_CGS = _si.e * _si.c * 10.0           # statC
W_PER_CM2_TO_CGS = 1e7                 # erg s^-1 cm^-2 per W cm^-2


def ghz_to_angular(nu_ghz):
    """Ordinary frequency in GHz -> angular frequency in rad/ns."""
    return TWO_PI * np.asarray(nu_ghz, dtype=float) if np.ndim(nu_ghz) else TWO_PI * float(nu_ghz)


def angular_to_ghz(omega):
    """Angular frequency in rad/ns -> ordinary frequency in GHz."""
    return np.asarray(omega, dtype=float) / TWO_PI if np.ndim(omega) else float(omega) / TWO_PI
