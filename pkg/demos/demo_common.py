"""Shared setup for the demo scripts: the reference cavity and couplings."""

import numpy as np

from oponoise import CavityConfig, ModeParams, normalize_frequency
from oponoise.phonon import NoiseCouplings

# Reference cavity: 70%-reflective input coupler for the 532 nm pump,
# 96%-reflective output coupler for the infrared pair, 5.1 GHz free spectral
# range, 12 mm crystal.
cavity = CavityConfig(
    modes=(
        ModeParams(0, 532e-9, 0.15, 0.01, 1.788, 0.65),
        ModeParams(1, 1064e-9, 0.02, 0.0015, 1.75, 0.87),
        ModeParams(2, 1064e-9, 0.02, 0.0015, 1.78, 0.87),
    ),
    free_spectral_range=5.1e9,
    crystal_length=12e-3,
    rayleigh_length=8.13e-3,
    waists=(27.8e-6, 39.3e-6, 39.3e-6),
)

#: couplings measured for this cavity, in 1/W
eta_measured = NoiseCouplings(np.array([
    [0.53, 0.14, 0.15],
    [0.14, 0.15, 0.087],
    [0.15, 0.087, 0.14],
]))

#: oscillation threshold of the reference cavity, watts
threshold_w = 0.070

#: dimensionless analysis frequency (21 MHz sideband)
omega = normalize_frequency(21e6, cavity)
