"""Analytic output covariance spectra and entanglement diagnostics.

The cavity output field is the reflection of the input plus the transmitted
intracavity fluctuations, ``X_out = M_gamma X - X1_in``.  With vacuum inputs
at both ports the output covariance splits into

    V = I + V_pure + V_loss + V_phase

where V_pure carries the squeezing/entanglement produced by the parametric
interaction, V_loss the vacuum contamination through the spurious-loss port,
and V_phase the filtered phonon phase noise.  Spectral matrices are
Hermitian; the reported covariances are their real parts (measured noise
spectra are real).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CavityConfig,
    NumericalError,
    OperatingPoint,
    QuadratureCovariance,
    ValidationError,
    operating_point,
    quadrature_index,
)
from .drift import DriftMatrix, coupling_matrices, opo_drift
from .phonon import NoiseCouplings, build_vq, temperature_law, waist_position_profile

#: condition number above which the cavity response is treated as singular
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class SpectrumResult:
    """Output covariance at one sideband frequency, with its decomposition."""

    omega: float
    v_total: QuadratureCovariance
    v_pure: QuadratureCovariance
    v_loss: QuadratureCovariance
    v_phase: QuadratureCovariance
    detected: QuadratureCovariance | None = None


def intracavity_transfer(drift: DriftMatrix, omega: float) -> np.ndarray:
    """Cavity transfer matrix [i*omega*I - M_A]^-1 (complex 6x6).

    For the above-threshold regime the phase-difference mode is undamped and
    the drift matrix is singular at dc, so omega = 0 is rejected there.
    """
    if drift.is_opo and omega == 0.0:
        raise NumericalError(
            "the above-threshold drift matrix is singular at omega = 0 "
            "(undamped signal/idler phase-difference mode); evaluate at omega != 0"
        )
    a = 1j * omega * np.eye(6) - drift.matrix
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise NumericalError(
            f"cavity response is ill-conditioned at omega = {omega:g} (cond = {cond:.3g})"
        )
    t = np.linalg.solve(a, np.eye(6, dtype=complex))
    residual = np.abs(a @ t - np.eye(6)).max()
    if residual > 1e-10:
        raise NumericalError(
            f"linear solve residual {residual:.3g} exceeds 1e-10 at omega = {omega:g}"
        )
    return t


def _real_hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T).real


def output_covariance(
    config: CavityConfig,
    drift: DriftMatrix,
    v_q: QuadratureCovariance,
    omega: float,
    detection: bool = False,
) -> SpectrumResult:
    """Analytic output covariance at dimensionless sideband frequency omega.

    Inputs at both ports are vacuum/coherent (covariance I).  The transposed
    transfer matrices are evaluated at -omega, which for the real drift
    matrices in scope equals the conjugate transpose at +omega.
    """
    t = intracavity_transfer(drift, omega)
    cpl = coupling_matrices(config)
    mg = cpl.m_gamma
    mm = cpl.m_mu
    g = mg @ t @ mg
    v_pure = _real_hermitian_part(g @ g.conj().T - g - g.conj().T)
    a_loss = mg @ t @ mm
    v_loss = _real_hermitian_part(a_loss @ a_loss.conj().T)
    a_cav = mg @ t
    v_phase = _real_hermitian_part(a_cav @ v_q.matrix @ a_cav.conj().T)
    v_total = np.eye(6) + v_pure + v_loss + v_phase
    result = SpectrumResult(
        omega=float(omega),
        v_total=QuadratureCovariance(v_total),
        v_pure=QuadratureCovariance(v_pure),
        v_loss=QuadratureCovariance(v_loss),
        v_phase=QuadratureCovariance(v_phase),
    )
    if detection:
        eff = [m.detection_efficiency for m in config.modes]
        detected = apply_detection(result.v_total, eff)
        result = SpectrumResult(
            omega=result.omega,
            v_total=result.v_total,
            v_pure=result.v_pure,
            v_loss=result.v_loss,
            v_phase=result.v_phase,
            detected=detected,
        )
    return result


def purity_determinant(config: CavityConfig, drift: DriftMatrix, omega: float) -> float:
    """Det[I + V_pure] evaluated on the complex Hermitian spectral matrix.

    For purely unitary intracavity dynamics (no spurious losses) this equals
    one at every sideband frequency.  The determinant must be taken before
    discarding the imaginary (antisymmetric) part of the spectrum; the real
    projection used for reporting does not preserve it.
    """
    t = intracavity_transfer(drift, omega)
    mg = coupling_matrices(config).m_gamma
    g = mg @ t @ mg
    v_pure = g @ g.conj().T - g - g.conj().T
    return float(np.linalg.det(np.eye(6) + v_pure).real)


def apply_detection(v: QuadratureCovariance, efficiencies) -> QuadratureCovariance:
    """Imperfect detection as a beam splitter mixing in vacuum.

    Entry (a_j, b_k) is scaled by sqrt(eta_j*eta_k) and each mode's diagonal
    block gains the vacuum admixture (1 - eta_j)*I.  Vacuum (V = I) is a
    fixed point.
    """
    eff = np.asarray(efficiencies, dtype=float)
    if eff.shape != (3,):
        raise ValidationError(f"need three per-mode efficiencies, got shape {eff.shape}")
    if np.any(eff < 0.0) or np.any(eff > 1.0):
        raise ValidationError(f"detection efficiencies must lie in [0, 1], got {eff}")
    d = np.repeat(np.sqrt(eff), 2)
    m = d[:, None] * v.matrix * d[None, :] + np.diag(1.0 - d**2)
    return QuadratureCovariance(m)


@dataclass(frozen=True)
class DuanResult:
    value: float
    entangled: bool


def duan_criterion(v: QuadratureCovariance) -> DuanResult:
    """Signal/idler EPR-type witness.

    ``value = Var[(p1-p2)/sqrt(2)] + Var[(q1+q2)/sqrt(2)]``; separable states
    satisfy value >= 2 in SQL units, so value < 2 certifies entanglement.
    """
    m = v.matrix
    p1, p2 = quadrature_index("p1"), quadrature_index("p2")
    q1, q2 = quadrature_index("q1"), quadrature_index("q2")
    var_minus = 0.5 * (m[p1, p1] + m[p2, p2] - 2.0 * m[p1, p2])
    var_plus = 0.5 * (m[q1, q1] + m[q2, q2] + 2.0 * m[q1, q2])
    value = float(var_minus + var_plus)
    return DuanResult(value=value, entangled=value < 2.0)


def _combination_variance(m: np.ndarray, coeffs: np.ndarray) -> float:
    return float(coeffs @ m @ coeffs)


def vlf_tripartite(v: QuadratureCovariance) -> tuple[float, float, float]:
    """Three pairwise-difference / collective-phase combination values.

    Each value is ``Var[(p_j - p_k)/sqrt(2)] + Var[(q_j + q_k - q_m)/sqrt(3)]``
    with unit gains, for (j, k, m) = (1,2,0), (0,1,2), (0,2,1); the
    separability boundary of each combination is 2 and violating any two
    flags genuine tripartite entanglement.  The third mode's phase enters
    with negative unit gain because the parametric process locks the sum of
    the signal and idler phases to the pump phase, so q1 + q2 - q0 is the
    quiet collective direction.
    """
    m = v.matrix
    values = []
    for j, k, third in ((1, 2, 0), (0, 1, 2), (0, 2, 1)):
        u = np.zeros(6)
        u[quadrature_index(f"p{j}")] = 1.0 / np.sqrt(2.0)
        u[quadrature_index(f"p{k}")] = -1.0 / np.sqrt(2.0)
        w = np.zeros(6)
        w[quadrature_index(f"q{j}")] = 1.0 / np.sqrt(3.0)
        w[quadrature_index(f"q{k}")] = 1.0 / np.sqrt(3.0)
        w[quadrature_index(f"q{third}")] = -1.0 / np.sqrt(3.0)
        values.append(_combination_variance(m, u) + _combination_variance(m, w))
    return (values[0], values[1], values[2])


@dataclass(frozen=True)
class SweepPoint:
    """One grid point of a parameter sweep; ``error`` is set if it failed."""

    axis_value: float
    result: SpectrumResult | None
    duan: DuanResult | None
    vlf: tuple[float, float, float] | None
    error: str | None = None


SWEEP_AXES = ("pump_ratio", "frequency", "temperature", "crystal_z")


def sweep(
    config: CavityConfig,
    axis: str,
    values,
    *,
    pump_ratio: float | None = None,
    omega: float | None = None,
    eta: NoiseCouplings | None = None,
    threshold_power: float | None = None,
    temp_coefficients: tuple[float, float] | None = None,
    detection: bool = False,
) -> list[SweepPoint]:
    """Evaluate the output covariance along one parameter axis.

    axis = 'pump_ratio':   values are sigma; omega fixed.
    axis = 'frequency':    values are analysis frequencies in Hz; sigma fixed.
    axis = 'temperature':  values are kelvin; eta00 follows the linear
                           temperature law (temp_coefficients required) and
                           the remaining couplings scale with eta00 via the
                           measured cross-mode ratios.
    axis = 'crystal_z':    values are crystal offsets in meters; the supplied
                           eta matrix is scaled by the geometry profile
                           normalized to its centered value.

    Grid points that fail (e.g. omega = 0 in the oscillator regime) are
    recorded per row and the sweep continues.
    """
    if axis not in SWEEP_AXES:
        raise ValidationError(f"unknown sweep axis {axis!r}; choose one of {SWEEP_AXES}")
    if threshold_power is None:
        raise ValidationError("sweep requires the threshold power")
    if eta is None:
        eta = NoiseCouplings.zero()
    points: list[SweepPoint] = []
    for value in np.asarray(values, dtype=float):
        try:
            sig = pump_ratio
            omg = omega
            eta_here = eta
            if axis == "pump_ratio":
                sig = float(value)
            elif axis == "frequency":
                from .core import normalize_frequency

                omg = normalize_frequency(float(value), config)
            elif axis == "temperature":
                if temp_coefficients is None:
                    raise ValidationError(
                        "temperature sweep requires temp_law coefficients (slope, intercept)"
                    )
                eta00 = temperature_law(float(value), *temp_coefficients)
                eta_here = NoiseCouplings.from_eta00(eta00)
            elif axis == "crystal_z":
                scale = waist_position_profile(config, float(value)) / waist_position_profile(
                    config, 0.0
                )
                eta_here = NoiseCouplings(eta.eta * scale)
            if sig is None or omg is None:
                raise ValidationError("sweep requires pump_ratio and a frequency")
            op = operating_point(config, sig, threshold_power)
            drift = opo_drift(config, op)
            v_q = build_vq(eta_here, op.intracavity_powers)
            res = output_covariance(config, drift, v_q, omg, detection=detection)
            points.append(
                SweepPoint(
                    axis_value=float(value),
                    result=res,
                    duan=duan_criterion(res.v_total),
                    vlf=vlf_tripartite(res.v_total),
                )
            )
        except (ValidationError, NumericalError) as exc:
            points.append(
                SweepPoint(axis_value=float(value), result=None, duan=None, vlf=None, error=str(exc))
            )
    return points
