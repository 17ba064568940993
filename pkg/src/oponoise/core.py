"""Shared domain types, unit conventions and validation.

Conventions used throughout the package:

* Quadrature ordering is fixed as ``[p0, q0, p1, q1, p2, q2]`` where ``p``
  is the amplitude quadrature and ``q`` the phase quadrature, mode 0 is the
  pump and modes 1/2 are signal/idler.
* Losses are *half* round-trip quantities: mirror transmission ``T_j = 2*gamma_j``
  and spurious losses ``2*mu_j``.
* Spectra are functions of the dimensionless sideband frequency
  ``omega = 2*pi*f / FSR`` (i.e. angular frequency times the round-trip time),
  so all rates are per round trip and no explicit round-trip time appears in
  the transfer functions.
* Covariances are normalized to the standard quantum level: a coherent state
  has the identity covariance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: quadrature labels in the fixed ordering
QUADRATURES = ("p0", "q0", "p1", "q1", "p2", "q2")

#: indices of the amplitude (p) and phase (q) quadratures
AMPLITUDE_INDICES = (0, 2, 4)
PHASE_INDICES = (1, 3, 5)

#: pairs (row, col) of the 21 independent entries of a symmetric 6x6 matrix
UPPER_TRIANGLE = tuple((a, b) for a in range(6) for b in range(a, 6))

#: relative floor used for positive-semidefiniteness checks
PSD_EIGENVALUE_FLOOR = 1e-10


def quadrature_index(label: str) -> int:
    """Index of a quadrature label, e.g. ``'q1' -> 3``."""
    try:
        return QUADRATURES.index(label)
    except ValueError:
        raise KeyError(f"unknown quadrature label {label!r}") from None


class ValidationError(ValueError):
    """Raised when an input or configuration violates a model precondition."""


class NumericalError(RuntimeError):
    """Raised when a numerical operation fails (singular system, bad factorization)."""


@dataclass(frozen=True)
class ModeParams:
    """Optical and cavity constants of one longitudinal mode.

    index: 0 = pump, 1 = signal, 2 = idler
    wavelength: vacuum wavelength in meters
    gamma: half mirror transmission per round trip (T = 2*gamma)
    mu: half spurious loss per round trip
    refractive_index: index seen by this mode inside the crystal
    detection_efficiency: overall detection efficiency in [0, 1]
    """

    index: int
    wavelength: float
    gamma: float
    mu: float
    refractive_index: float
    detection_efficiency: float = 1.0

    @property
    def gamma_total(self) -> float:
        """Half of the total round-trip loss, gamma' = gamma + mu."""
        return self.gamma + self.mu


@dataclass(frozen=True)
class CavityConfig:
    """Three-mode cavity description.

    modes: pump, signal, idler ``ModeParams`` in that order
    free_spectral_range: Hz; the round-trip time is ``1 / free_spectral_range``
    crystal_length: meters
    rayleigh_length: meters, inside the crystal
    waists: per-mode beam waist at the cavity focus, meters
    """

    modes: tuple[ModeParams, ModeParams, ModeParams]
    free_spectral_range: float
    crystal_length: float
    rayleigh_length: float
    waists: tuple[float, float, float]

    @property
    def round_trip_time(self) -> float:
        return 1.0 / self.free_spectral_range

    def mode(self, j: int) -> ModeParams:
        return self.modes[j]


@dataclass(frozen=True)
class OperatingPoint:
    """Above-threshold operating point of the oscillator.

    pump_ratio: sigma = P_in / P_th >= 1
    threshold_power: watts
    beta: signal-to-pump intracavity amplitude ratio
    intracavity_powers: (P0, P1, P2) circulating powers in watts
    """

    pump_ratio: float
    threshold_power: float
    beta: float
    intracavity_powers: tuple[float, float, float]


def validate_config(config: CavityConfig) -> list[str]:
    """Check all type invariants; returns a list of human-readable violations.

    An empty list means the configuration is usable.  Violations are data,
    not exceptions: callers decide whether to abort.
    """
    violations = []
    for m in config.modes:
        name = f"mode{m.index}"
        if not 0.0 < m.gamma < 1.0:
            violations.append(f"{name}.gamma must be positive and below 1 (got {m.gamma})")
        if not 0.0 <= m.mu < 1.0:
            violations.append(f"{name}.mu must be in [0, 1) (got {m.mu})")
        if m.gamma + m.mu >= 1.0:
            violations.append(
                f"{name}: gamma + mu must stay below 1 (small-loss regime), got {m.gamma + m.mu}"
            )
        if m.wavelength <= 0.0:
            violations.append(f"{name}.wavelength_m must be positive (got {m.wavelength})")
        if not 0.0 <= m.detection_efficiency <= 1.0:
            violations.append(
                f"{name}.detection_efficiency must be in [0, 1] (got {m.detection_efficiency})"
            )
    # energy conservation of the parametric process: one pump photon makes
    # one signal plus one idler photon, so both IR wavelengths must be close
    # to twice the pump wavelength
    lam0 = config.modes[0].wavelength
    for j in (1, 2):
        lam = config.modes[j].wavelength
        if lam > 0.0 and lam0 > 0.0 and abs(2.0 * lam0 / lam - 1.0) > 0.01:
            violations.append(
                f"mode{j}.wavelength_m must be twice mode0.wavelength_m within 1% "
                f"(got {lam} vs {lam0})"
            )
    if config.free_spectral_range <= 0.0:
        violations.append("cavity.fsr_hz must be positive")
    if config.crystal_length <= 0.0:
        violations.append("cavity.crystal_length_m must be positive")
    if config.rayleigh_length <= 0.0:
        violations.append("cavity.rayleigh_length_m must be positive")
    for j, w in enumerate(config.waists):
        if w <= 0.0:
            violations.append(f"cavity.waist{j}_m must be positive")
    return violations


def normalize_frequency(f_hz: float, config: CavityConfig) -> float:
    """Dimensionless sideband frequency omega = 2*pi*f / FSR.

    With this scaling the frequency-domain cavity response uses the per
    round-trip loss rates directly.
    """
    if f_hz < 0.0:
        raise ValidationError(f"analysis frequency must be nonnegative, got {f_hz}")
    return 2.0 * np.pi * f_hz / config.free_spectral_range


def operating_point(
    config: CavityConfig, pump_ratio: float, threshold_power: float
) -> OperatingPoint:
    """Operating point from the pump ratio sigma and the threshold power.

    The amplitude ratio is ``beta = sqrt(gamma0/gamma) * sqrt(sqrt(sigma) - 1)``.
    The intracavity pump power is clamped at its threshold (resonant buildup)
    value ``P0 = 2*gamma0/gamma0'**2 * P_th``; the signal and idler circulating
    powers follow from the photon-flux ratio ``beta**2`` with the photon-energy
    conversion ``P1 = P2 = beta**2 * P0 * lambda0/lambda1``.
    """
    if pump_ratio < 1.0:
        raise ValidationError(
            f"pump_ratio must be >= 1 (below-threshold operation is out of scope), got {pump_ratio}"
        )
    if threshold_power <= 0.0:
        raise ValidationError(f"threshold_power must be positive, got {threshold_power}")
    pump, signal, idler = config.modes
    if signal.gamma != idler.gamma:
        raise ValidationError(
            "operating_point requires balanced signal/idler mirror losses "
            f"(gamma1={signal.gamma}, gamma2={idler.gamma})"
        )
    beta = np.sqrt(pump.gamma / signal.gamma) * np.sqrt(np.sqrt(pump_ratio) - 1.0)
    gp0 = pump.gamma_total
    p0 = 2.0 * pump.gamma / gp0**2 * threshold_power
    # beta**2 is a photon-flux ratio; each IR photon carries half the pump
    # photon energy
    p_ir = beta**2 * p0 * pump.wavelength / signal.wavelength
    return OperatingPoint(
        pump_ratio=float(pump_ratio),
        threshold_power=float(threshold_power),
        beta=float(beta),
        intracavity_powers=(float(p0), float(p_ir), float(p_ir)),
    )


@dataclass(frozen=True)
class QuadratureCovariance:
    """Real symmetric 6x6 covariance matrix in the fixed quadrature ordering.

    The identity matrix is the standard quantum level (coherent state).
    """

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (6, 6):
            raise ValidationError(f"covariance matrix must be 6x6, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "QuadratureCovariance":
        return cls(np.eye(6))

    @classmethod
    def zeros(cls) -> "QuadratureCovariance":
        return cls(np.zeros((6, 6)))

    def entry(self, a: str, b: str) -> float:
        return float(self.matrix[quadrature_index(a), quadrature_index(b)])

    def validate(self) -> list[str]:
        """Symmetry and positive-semidefiniteness violations, if any."""
        violations = []
        m = self.matrix
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m - m.T).max() > 1e-12 * scale:
            violations.append("covariance matrix is not symmetric within 1e-12 relative")
        eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
        floor = -PSD_EIGENVALUE_FLOOR * max(eigs.max(), 1.0)
        if eigs.min() < floor:
            violations.append(
                f"covariance matrix is not positive semidefinite (min eigenvalue {eigs.min():g})"
            )
        return violations

    def upper_triangle(self) -> np.ndarray:
        """The 21 independent entries, row-major over the upper triangle."""
        return np.array([self.matrix[a, b] for a, b in UPPER_TRIANGLE])


def upper_triangle_labels() -> list[str]:
    """Column labels like ``V_p0p0, V_p0q0, ...`` for the 21 independent entries."""
    return [f"V_{QUADRATURES[a]}{QUADRATURES[b]}" for a, b in UPPER_TRIANGLE]
