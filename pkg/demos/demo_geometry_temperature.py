"""Geometry and temperature dependence of the phase-noise coupling.

Shows the crystal-position profile of the coupling (arctan closed form vs
the beam-overlap quadrature), the cubic dependence on the acoustic coherence
length, the wavelength-squared scaling between pump and infrared couplings,
and the linear temperature law with its unphysical-extrapolation clamp.
"""

import math

import numpy as np

from oponoise import CavityConfig, ModeParams
from oponoise.phonon import (
    CrystalModel,
    effective_waist,
    eta_microscopic,
    temperature_law,
    thermal_phonon_energy,
    waist_position_profile,
)

# nearly concentric geometry used for the position study: waists consistent
# with the 8.13 mm Rayleigh length at 532 nm and n = 1.788
n = 1.788
zr = 8.13e-3
lam0 = 532e-9
w0 = math.sqrt(zr * lam0 / (n * math.pi))
cavity = CavityConfig(
    modes=(
        ModeParams(0, lam0, 0.06, 0.0165, n),
        ModeParams(1, 2 * lam0, 0.02, 0.0015, n),
        ModeParams(2, 2 * lam0, 0.02, 0.0015, n),
    ),
    free_spectral_range=5.1e9,
    crystal_length=12e-3,
    rayleigh_length=zr,
    waists=(w0, math.sqrt(2.0) * w0, math.sqrt(2.0) * w0),
)

print("crystal-position profile (closed form vs quadrature):")
for z in (0.0, 5e-3, 10e-3, 20e-3):
    closed = waist_position_profile(cavity, z)
    w00 = effective_waist(cavity, 0, 0, crystal_center_z=z)
    quad = cavity.crystal_length * lam0 / (math.pi * w00**2)
    print(f"  z = {1e3 * z:5.1f} mm: profile = {closed:.4f}, quadrature = {quad:.4f}")

p = [1.0, 0.5, 0.2, 0.1, 0.0, 0.0]
crystal = CrystalModel(
    photoelastic_vectors=np.array([p, p, p]),
    strain_rms=np.full(6, 1e-9),
    coherence_length=1e-7,
    density=3010.0,
    sound_speed=4000.0,
    temperature=296.0,
)
eta00 = eta_microscopic(cavity, crystal, 0, 0)
eta11 = eta_microscopic(cavity, crystal, 1, 1)
print(f"\nmicroscopic couplings: eta00 = {eta00:.3g}/W, eta11 = {eta11:.3g}/W, "
      f"ratio = {eta00 / eta11:.2f} (wavevector-squared scaling)")

double_lc = CrystalModel(
    photoelastic_vectors=crystal.photoelastic_vectors,
    strain_rms=crystal.strain_rms,
    coherence_length=2e-7,
    density=crystal.density,
    sound_speed=crystal.sound_speed,
    temperature=crystal.temperature,
)
print(f"doubling the coherence length multiplies eta00 by "
      f"{eta_microscopic(cavity, double_lc, 0, 0) / eta00:.1f}")

print("\nmeasured linear temperature law (slope 5.92e-3/WK, intercept -1.38/W):")
for t in (233.1, 257.0, 296.0, 340.0, 383.0):
    print(f"  T = {t:6.1f} K: eta00 = {temperature_law(t, 5.92e-3, -1.38):.3f}/W")

freqs = 2 * math.pi * np.array([21e6, 42e6, 84e6])
print("\nthermal acoustic energy is linear in T in the classical regime:")
for t in (100.0, 200.0, 300.0, 400.0):
    e = thermal_phonon_energy(t, freqs)
    print(f"  T = {t:5.1f} K: E = {e:.4e} J (E/kT per mode = "
          f"{e / (1.380649e-23 * t * len(freqs)):.4f})")
