import numpy as np
import pytest

from oponoise import CavityConfig, ModeParams
from oponoise.phonon import NoiseCouplings


def reference_cavity(mu0=0.01, mu_ir=0.0015, eff=(0.65, 0.87, 0.87)):
    """Three-mode KTP cavity used throughout the tests.

    Pump input coupler reflectivity 70% (gamma0 = 0.15), infrared output
    coupler reflectivity 96% (gamma = 0.02), FSR 5.1 GHz, 12 mm crystal,
    8.13 mm Rayleigh length.
    """
    modes = (
        ModeParams(0, 532e-9, 0.15, mu0, 1.788, eff[0]),
        ModeParams(1, 1064e-9, 0.02, mu_ir, 1.75, eff[1]),
        ModeParams(2, 1064e-9, 0.02, mu_ir, 1.78, eff[2]),
    )
    return CavityConfig(
        modes=modes,
        free_spectral_range=5.1e9,
        crystal_length=12e-3,
        rayleigh_length=8.13e-3,
        waists=(27.8e-6, 39.3e-6, 39.3e-6),
    )


@pytest.fixture
def cavity():
    return reference_cavity()


@pytest.fixture
def lossless_cavity():
    return reference_cavity(mu0=0.0, mu_ir=0.0)


def measured_couplings():
    """Phase-noise coupling matrix measured for the reference cavity (1/W)."""
    return NoiseCouplings(
        np.array(
            [
                [0.53, 0.14, 0.15],
                [0.14, 0.15, 0.087],
                [0.15, 0.087, 0.14],
            ]
        )
    )


@pytest.fixture
def eta_measured():
    return measured_couplings()


#: threshold power of the reference oscillator, watts
THRESHOLD_W = 0.070

#: dimensionless analysis frequency, 21 MHz on the 5.1 GHz FSR
OMEGA_21MHZ = 2.0 * np.pi * 21e6 / 5.1e9
