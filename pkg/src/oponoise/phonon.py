"""Thermal-phonon phase noise: covariance model and microscopic couplings.

Thermally excited acoustic waves modulate the crystal's refractive index and
scatter carrier light into the sidebands.  For a bright field this appears as
pure phase noise whose variance grows linearly with the circulating power,
``<dQ_j dQ_k> = eta_jk * sqrt(P_j P_k)``.  This module builds the resulting
phase-noise covariance matrix and evaluates the microscopic model of the
``eta_jk`` couplings from crystal and beam-geometry data.

The phase noise is treated as white (frequency flat) within the analysis
band; all couplings here refer to a single analysis sideband.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import constants
from scipy.integrate import quad

from .core import CavityConfig, QuadratureCovariance, ValidationError, PHASE_INDICES


@dataclass(frozen=True)
class NoiseCouplings:
    """Symmetric 3x3 matrix of phase-noise couplings eta_jk in 1/W."""

    eta: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.eta, dtype=float)
        if m.shape != (3, 3):
            raise ValidationError(f"eta must be a 3x3 matrix, got shape {m.shape}")
        object.__setattr__(self, "eta", m)

    @classmethod
    def zero(cls) -> "NoiseCouplings":
        return cls(np.zeros((3, 3)))

    @classmethod
    def from_eta00(cls, eta00: float) -> "NoiseCouplings":
        """Full coupling matrix tied to eta00 by the measured cross-mode ratios.

        All couplings scale together: eta11 = eta22 = eta00/4,
        eta01 = eta02 = 0.27*eta00, eta12 = 0.16*eta00.  Used when only the
        pump coupling is known (temperature sweeps, inverse inference).
        """
        e = eta00
        return cls(
            np.array(
                [
                    [e, 0.27 * e, 0.27 * e],
                    [0.27 * e, 0.25 * e, 0.16 * e],
                    [0.27 * e, 0.16 * e, 0.25 * e],
                ]
            )
        )

    def validate(self) -> list[str]:
        violations = []
        m = self.eta
        scale = max(np.abs(m).max(), 1e-30)
        if np.abs(m - m.T).max() > 1e-12 * scale:
            violations.append("eta must be symmetric")
        if np.any(np.diag(m) < 0.0):
            violations.append("eta diagonal must be nonnegative")
        eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
        if eigs.min() < -1e-12 * max(eigs.max(), 1e-30):
            violations.append(
                f"eta must be positive semidefinite (min eigenvalue {eigs.min():g})"
            )
        for j in range(3):
            for k in range(j + 1, 3):
                bound = np.sqrt(m[j, j] * m[k, k])
                if abs(m[j, k]) > bound * (1.0 + 1e-12):
                    violations.append(
                        f"eta[{j},{k}] violates |eta_jk| <= sqrt(eta_jj*eta_kk) "
                        f"({m[j, k]:g} vs {bound:g})"
                    )
        return violations


@dataclass(frozen=True)
class CrystalModel:
    """Inputs of the microscopic coupling model.

    photoelastic_vectors: per-mode six-component contracted photoelastic
        vectors p_jj,(lm), ordering (xx, yy, zz, yz, xz, xy)
    strain_rms: six-component rms strain at the analysis frequency
    coherence_length: acoustic coherence length l_c in meters
    density: crystal density in kg/m^3
    sound_speed: m/s
    temperature: kelvin
    """

    photoelastic_vectors: np.ndarray = field(repr=False)
    strain_rms: np.ndarray = field(repr=False)
    coherence_length: float
    density: float
    sound_speed: float
    temperature: float

    def __post_init__(self):
        pv = np.asarray(self.photoelastic_vectors, dtype=float)
        s = np.asarray(self.strain_rms, dtype=float)
        if pv.shape != (3, 6):
            raise ValidationError(f"photoelastic_vectors must be 3x6, got {pv.shape}")
        if s.shape != (6,):
            raise ValidationError(f"strain_rms must have six components, got {s.shape}")
        if self.coherence_length <= 0.0:
            raise ValidationError("coherence_length must be positive")
        if self.temperature <= 0.0:
            raise ValidationError("temperature must be positive")
        object.__setattr__(self, "photoelastic_vectors", pv)
        object.__setattr__(self, "strain_rms", s)


def build_vq(eta: NoiseCouplings, powers) -> QuadratureCovariance:
    """Phase-noise covariance V_Q from couplings and intracavity powers (watts).

    Only phase-phase entries are populated: entry (q_j, q_k) equals
    ``eta_jk * sqrt(P_j * P_k)``.  ``eta`` must be positive semidefinite so
    the result is a valid covariance matrix.
    """
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (3,):
        raise ValidationError(f"powers must be three intracavity watts, got shape {powers.shape}")
    if np.any(powers < 0.0):
        raise ValidationError(f"intracavity powers must be nonnegative, got {powers}")
    eigs = np.linalg.eigvalsh(0.5 * (eta.eta + eta.eta.T))
    if eigs.min() < -1e-12 * max(eigs.max(), 1e-30):
        raise ValidationError(
            "eta is not positive semidefinite: offending eigenvalue "
            f"{eigs.min():g} (eigenvalues {np.array2string(eigs, precision=6)})"
        )
    amp = np.sqrt(powers)
    vq = np.zeros((6, 6))
    for aj, j in zip(PHASE_INDICES, range(3)):
        for ak, k in zip(PHASE_INDICES, range(3)):
            vq[aj, ak] = eta.eta[j, k] * amp[j] * amp[k]
    return QuadratureCovariance(vq)


def photoelastic_coupling(crystal: CrystalModel, j: int, k: int) -> float:
    """Strain-weighted scalar product c_jk of two photoelastic vectors.

    ``c_jk = sum_lm p_jj,(lm) * p_kk,(lm) * S_lm^2``; Cauchy-Schwarz gives
    ``|c_jk| <= sqrt(c_jj * c_kk)``, the origin of imperfect noise
    correlations between modes.
    """
    s2 = crystal.strain_rms**2
    return float(np.sum(crystal.photoelastic_vectors[j] * crystal.photoelastic_vectors[k] * s2))


def _waist_sq(config: CavityConfig, j: int, z: float) -> float:
    # Gaussian beam waist law w^2(z) = w0^2 * (1 + (z/zr)^2)
    return config.waists[j] ** 2 * (1.0 + (z / config.rayleigh_length) ** 2)


def effective_waist(config: CavityConfig, j: int, k: int, crystal_center_z: float = 0.0) -> float:
    """Effective waist w_jk of a mode pair averaged over the crystal length.

    Defined through ``l/(pi*w_jk^2) = integral (2/pi) / (w_j^2(z) + w_k^2(z)) dz``
    over the crystal, with the Gaussian waist law for each beam.  The
    integral is evaluated by adaptive quadrature.
    """
    ell = config.crystal_length
    lo = crystal_center_z - 0.5 * ell
    hi = crystal_center_z + 0.5 * ell
    integral, _ = quad(
        lambda z: (2.0 / np.pi) / (_waist_sq(config, j, z) + _waist_sq(config, k, z)),
        lo,
        hi,
        epsabs=0.0,
        epsrel=1e-12,
        limit=200,
    )
    return float(np.sqrt(ell / (np.pi * integral)))


def waist_position_profile(config: CavityConfig, z: float) -> float:
    """Geometry factor l*lambda/(pi*w00^2) as a function of crystal position.

    Closed form ``n * [arctan((2z+l)/(2zr)) - arctan((2z-l)/(2zr))]`` using
    the pump refractive index; symmetric in z and maximal for the crystal
    centered on the beam focus.
    """
    n = config.modes[0].refractive_index
    ell = config.crystal_length
    zr = config.rayleigh_length
    if zr <= 0.0:
        raise ValidationError("rayleigh_length must be positive")
    return float(n * (np.arctan((2.0 * z + ell) / (2.0 * zr)) - np.arctan((2.0 * z - ell) / (2.0 * zr))))


def thermal_phonon_energy(temperature: float, mode_frequencies) -> float:
    """Mean thermal energy (joules) of acoustic modes at the given temperature.

    Bose-Einstein occupation plus zero point:
    ``E = sum_s hbar*W_s * [1/(exp(hbar*W_s/kB T) - 1) + 1/2]``.
    Linear in T when kB*T >> hbar*W_s.
    """
    if temperature <= 0.0:
        raise ValidationError("temperature must be positive")
    w = np.asarray(mode_frequencies, dtype=float)
    x = constants.hbar * w / (constants.k * temperature)
    occupation = 1.0 / np.expm1(x)
    return float(np.sum(constants.hbar * w * (occupation + 0.5)))


def eta_microscopic(
    config: CavityConfig,
    crystal: CrystalModel,
    j: int,
    k: int,
    crystal_center_z: float = 0.0,
) -> float:
    """Microscopic phase-noise coupling eta_jk in 1/W.

    ``eta_jk = k_j k_k * (n_j^3 n_k^3 / 4hc) * l_c^3 * c_jk
    * (l*sqrt(lambda_j lambda_k) / (pi*w_jk^2))`` with the vacuum wavevectors
    k_j = 2*pi/lambda_j, the photoelastic coupling c_jk and the effective
    waist of the mode pair.
    """
    lam_j = config.modes[j].wavelength
    lam_k = config.modes[k].wavelength
    kj = 2.0 * np.pi / lam_j
    kk = 2.0 * np.pi / lam_k
    nj = config.modes[j].refractive_index
    nk = config.modes[k].refractive_index
    cjk = photoelastic_coupling(crystal, j, k)
    wjk = effective_waist(config, j, k, crystal_center_z)
    geometry = config.crystal_length * np.sqrt(lam_j * lam_k) / (np.pi * wjk**2)
    return float(
        kj
        * kk
        * (nj**3 * nk**3 / (4.0 * constants.h * constants.c))
        * crystal.coherence_length**3
        * cjk
        * geometry
    )


def temperature_law(temperature: float, slope: float, intercept: float) -> float:
    """Linear temperature model of eta00, clamped at zero from below.

    The clamp matters when extrapolating below the zero crossing of the fit;
    a negative noise variance is unphysical.
    """
    return max(0.0, slope * temperature + intercept)
