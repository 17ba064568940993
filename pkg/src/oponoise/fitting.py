"""Parameter recovery from measurement-style data.

The phase-noise couplings are measured by injecting a bright field into one
or two cavity modes and reading the excess phase noise (or phase covariance)
of the output beam against power.  The fitters here map measured output
variances back to the internal phase-noise level through the free-cavity
model, convert output-referenced powers to intracavity watts via the
resonant buildup, and run weighted linear fits with zero intercept (the
model forces the noise to the standard quantum level at zero power).

All fits are round-trip identities on synthetic data generated by the
forward model; see the tests.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import CavityConfig, ValidationError, operating_point
from .drift import opo_drift
from .phonon import NoiseCouplings, build_vq, waist_position_profile
from .spectra import duan_criterion, output_covariance

POWER_REFERENCES = ("intracavity", "reflected_output", "transmitted_output")


class ModelViolationWarning(UserWarning):
    """Data contradicts a structural assumption of the model (not a fit failure)."""


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with 1-sigma uncertainties and fit diagnostics."""

    parameters: dict[str, float]
    uncertainties: dict[str, float]
    rss: float
    dof: int
    residuals: np.ndarray = field(repr=False)
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class PowerVarianceRecord:
    """One measured point: output power and quadrature variances in SQL units."""

    power: float
    power_reference: str
    variance_p: float
    variance_q: float
    sigma_var: float | None = None

    def __post_init__(self):
        if self.power < 0.0:
            raise ValidationError(f"power must be nonnegative, got {self.power}")
        if self.variance_p <= 0.0 or self.variance_q <= 0.0:
            raise ValidationError("variances must be positive")
        if self.power_reference not in POWER_REFERENCES:
            raise ValidationError(
                f"unknown power reference {self.power_reference!r}; choose from {POWER_REFERENCES}"
            )


@dataclass(frozen=True)
class CrossCovarianceRecord:
    """One measured point for a mode pair: both powers and the phase covariance."""

    power_j: float
    power_k: float
    covariance_q: float
    sigma: float | None = None


def intracavity_power(power: float, reference: str, config: CavityConfig, mode: int) -> float:
    """Convert a measured power to circulating intracavity watts.

    reflected_output: the carrier reflected off the injection mirror on
    resonance, P_ic = 2*gamma/(gamma - mu)^2 * P_refl.
    transmitted_output: the carrier leaking through the measured coupler,
    P_ic = P_trans / (2*gamma).
    """
    m = config.modes[mode]
    if reference == "intracavity":
        return power
    if reference == "transmitted_output":
        return power / (2.0 * m.gamma)
    if reference == "reflected_output":
        if m.gamma == m.mu:
            raise ValidationError(
                "reflected power vanishes for an impedance-matched cavity (gamma == mu); "
                "the conversion is singular"
            )
        return 2.0 * m.gamma / (m.gamma - m.mu) ** 2 * power
    raise ValidationError(f"unknown power reference {reference!r}")


def _diag_transfer(config: CavityConfig, mode: int, omega: float) -> float:
    """Gain from the internal phase-noise variance to the output variance excess."""
    m = config.modes[mode]
    return 2.0 * m.gamma / (omega**2 + m.gamma_total**2)


def _cross_transfer(config: CavityConfig, j: int, k: int, omega: float) -> float:
    """Gain from the internal phase-noise covariance to the output covariance."""
    mj, mk = config.modes[j], config.modes[k]
    gj, gk = mj.gamma_total, mk.gamma_total
    return (
        2.0
        * np.sqrt(mj.gamma * mk.gamma)
        * (gj * gk + omega**2)
        / ((omega**2 + gj**2) * (omega**2 + gk**2))
    )


def output_phase_variance(config: CavityConfig, mode: int, omega: float, internal: float) -> float:
    """Forward free-cavity model: output phase variance for internal noise."""
    return 1.0 + _diag_transfer(config, mode, omega) * internal


def internal_phase_noise(config: CavityConfig, mode: int, omega: float, variance_q: float) -> float:
    """Inverse free-cavity model: internal phase-noise variance from the output."""
    return (variance_q - 1.0) / _diag_transfer(config, mode, omega)


def output_phase_covariance(
    config: CavityConfig, j: int, k: int, omega: float, internal: float
) -> float:
    return _cross_transfer(config, j, k, omega) * internal


def internal_phase_covariance(
    config: CavityConfig, j: int, k: int, omega: float, covariance_q: float
) -> float:
    return covariance_q / _cross_transfer(config, j, k, omega)


def _weighted_slope_through_origin(x, y, sigma=None):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, dtype=float) ** 2
    sxx = np.sum(w * x * x)
    if sxx == 0.0:
        raise ValidationError("all abscissae are zero; slope is undetermined")
    slope = np.sum(w * x * y) / sxx
    residuals = y - slope * x
    rss = float(np.sum(w * residuals**2))
    dof = len(x) - 1
    if sigma is None:
        # scale the error from the residual scatter
        var = rss / dof / sxx if dof > 0 else np.inf
    else:
        var = 1.0 / sxx
    return float(slope), float(np.sqrt(var)), rss, dof, residuals


def _weighted_line(x, y, sigma=None):
    """Weighted straight-line fit returning (intercept, slope) and covariance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, dtype=float) ** 2
    s = np.sum(w)
    sx = np.sum(w * x)
    sy = np.sum(w * y)
    sxx = np.sum(w * x * x)
    sxy = np.sum(w * x * y)
    delta = s * sxx - sx * sx
    if delta <= 0.0:
        raise ValidationError("degenerate abscissae; line fit is undetermined")
    intercept = (sxx * sy - sx * sxy) / delta
    slope = (s * sxy - sx * sy) / delta
    residuals = y - intercept - slope * x
    rss = float(np.sum(w * residuals**2))
    dof = len(x) - 2
    cov = np.array([[sxx, -sx], [-sx, s]]) / delta
    if sigma is None and dof > 0:
        cov = cov * (rss / dof)
    return (float(intercept), float(slope)), cov, rss, dof, residuals


def fit_eta_diagonal(
    records: list[PowerVarianceRecord],
    config: CavityConfig,
    mode: int,
    omega: float,
    allow_intercept: bool = False,
) -> FitResult:
    """Fit the diagonal coupling eta_jj from variance-versus-power data.

    The measured output phase variances are mapped back to internal
    phase-noise variances, powers are converted to intracavity watts, and a
    weighted linear fit through the origin gives eta_jj in 1/W.  Amplitude
    variances are simultaneously tested against the standard quantum level;
    a deviation beyond three standard deviations emits a
    :class:`ModelViolationWarning` (the model couples phonon noise to the
    phase quadrature only).

    ``allow_intercept=True`` switches to a free-intercept fit for
    diagnostics only; the model itself pins the intercept at zero.
    """
    if len(records) < 3:
        raise ValidationError(f"need at least 3 records, got {len(records)}")
    references = {r.power_reference for r in records}
    if len(references) != 1:
        raise ValidationError(f"mixed power references in one fit: {sorted(references)}")
    powers = np.array(
        [intracavity_power(r.power, r.power_reference, config, mode) for r in records]
    )
    gain = _diag_transfer(config, mode, omega)
    internal = np.array([(r.variance_q - 1.0) / gain for r in records])
    sig = None
    if all(r.sigma_var is not None for r in records):
        sig = np.array([r.sigma_var / gain for r in records])
    flags = []
    # amplitude quadratures must sit at the standard quantum level
    amp = np.array([r.variance_p for r in records])
    amp_dev = amp - 1.0
    amp_scale = (
        np.array([r.sigma_var for r in records])
        if all(r.sigma_var is not None for r in records)
        else np.full(len(records), max(amp.std(ddof=1), 1e-12))
    )
    z_amp = amp_dev / amp_scale
    if np.abs(z_amp.mean()) * np.sqrt(len(records)) > 3.0:
        flags.append("amplitude_off_sql")
        warnings.warn(
            f"amplitude variances deviate from the standard quantum level "
            f"(mean z = {z_amp.mean():.2f}); the phase-only noise model may not apply",
            ModelViolationWarning,
        )
    if allow_intercept:
        (intercept, slope), cov, rss, dof, residuals = _weighted_line(powers, internal, sig)
        params = {f"eta{mode}{mode}": slope, "intercept": intercept}
        uncerts = {
            f"eta{mode}{mode}": float(np.sqrt(cov[1, 1])),
            "intercept": float(np.sqrt(cov[0, 0])),
        }
    else:
        slope, err, rss, dof, residuals = _weighted_slope_through_origin(powers, internal, sig)
        params = {f"eta{mode}{mode}": slope}
        uncerts = {f"eta{mode}{mode}": err}
    if params[f"eta{mode}{mode}"] < 0.0:
        flags.append("negative_coupling")
        warnings.warn(
            f"fitted eta{mode}{mode} is negative; a noise variance slope cannot be negative",
            ModelViolationWarning,
        )
    return FitResult(params, uncerts, rss, dof, residuals, tuple(flags))


def fit_eta_cross(
    records: list[CrossCovarianceRecord],
    config: CavityConfig,
    modes: tuple[int, int],
    omega: float,
    power_reference: tuple[str, str] = ("intracavity", "intracavity"),
) -> FitResult:
    """Fit the cross coupling eta_jk: phase covariance against sqrt(Pj*Pk)."""
    if len(records) < 3:
        raise ValidationError(f"need at least 3 records, got {len(records)}")
    j, k = modes
    pj = np.array([intracavity_power(r.power_j, power_reference[0], config, j) for r in records])
    pk = np.array([intracavity_power(r.power_k, power_reference[1], config, k) for r in records])
    gain = _cross_transfer(config, j, k, omega)
    internal = np.array([r.covariance_q / gain for r in records])
    sig = None
    if all(r.sigma is not None for r in records):
        sig = np.array([r.sigma / gain for r in records])
    x = np.sqrt(pj * pk)
    slope, err, rss, dof, residuals = _weighted_slope_through_origin(x, internal, sig)
    return FitResult({f"eta{j}{k}": slope}, {f"eta{j}{k}": err}, rss, dof, residuals)


def fit_waist_profile(data, config: CavityConfig, sigma=None) -> FitResult:
    """Single multiplicative factor between measured eta00(z) and the geometry profile.

    data: iterable of (crystal offset z in meters, eta00 in 1/W); optional
    per-point uncertainties weight the fit.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 1:
        raise ValidationError("waist-profile data must be rows of (z_m, eta00)")
    z = data[:, 0]
    y = data[:, 1]
    profile = np.array([waist_position_profile(config, zi) for zi in z])
    if len(z) == 1:
        factor = y[0] / profile[0]
        return FitResult(
            {"factor": float(factor)}, {"factor": float("nan")}, 0.0, 1, np.zeros(1)
        )
    factor, err, rss, dof, residuals = _weighted_slope_through_origin(profile, y, sigma)
    return FitResult({"factor": factor}, {"factor": err}, rss, dof, residuals)


def fit_temperature(data, sigma=None) -> FitResult:
    """Weighted linear fit of eta00 against temperature.

    data: iterable of (temperature in kelvin, eta00 in 1/W).  Reports the
    extrapolated zero crossing -intercept/slope alongside the coefficients.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 3:
        raise ValidationError("temperature data must be at least 3 rows of (temp_k, eta00)")
    t = data[:, 0]
    y = data[:, 1]
    (intercept, slope), cov, rss, dof, residuals = _weighted_line(t, y, sigma)
    params = {"slope": slope, "intercept": intercept}
    uncerts = {"slope": float(np.sqrt(cov[1, 1])), "intercept": float(np.sqrt(cov[0, 0]))}
    if slope != 0.0:
        params["zero_crossing"] = -intercept / slope
        # first-order propagation including the slope/intercept covariance
        var = (
            cov[0, 0] / slope**2
            + cov[1, 1] * intercept**2 / slope**4
            - 2.0 * cov[0, 1] * intercept / slope**3
        )
        uncerts["zero_crossing"] = float(np.sqrt(max(var, 0.0)))
    return FitResult(params, uncerts, rss, dof, residuals)


#: named scalar observables for the inverse inference
def _observable_var_q(mode: int):
    def f(result):
        return result.v_total.entry(f"q{mode}", f"q{mode}")

    return f


OBSERVABLES = {
    "var_q0": _observable_var_q(0),
    "var_q1": _observable_var_q(1),
    "var_q2": _observable_var_q(2),
    "duan": lambda result: duan_criterion(result.v_total).value,
}


@dataclass(frozen=True)
class InferenceResult:
    """Outcome of the one-dimensional inverse problem for eta00."""

    eta00: float | None
    bracket: tuple[float, float]
    tolerance: float
    converged: bool
    message: str


def infer_eta00(
    config: CavityConfig,
    pump_ratio: float,
    threshold_power: float,
    omega: float,
    observed: float,
    observable: str = "var_q0",
    bracket: tuple[float, float] = (0.0, 4.0),
    xtol: float = 1e-6,
) -> InferenceResult:
    """Recover eta00 from one observed phase-noise value of a foreign cavity.

    All couplings are tied to eta00 by the measured cross-mode ratios
    (:meth:`NoiseCouplings.from_eta00`), reducing the inference to a
    one-dimensional bracketed root find on the chosen scalar observable of
    the model covariance.  Reports the bracket and tolerance used; if the
    observable does not cross the observed value inside the bracket, a
    no-solution result is returned instead of a spurious root.
    """
    func = OBSERVABLES[observable] if isinstance(observable, str) else observable
    op = operating_point(config, pump_ratio, threshold_power)
    drift = opo_drift(config, op)

    def model(eta00: float) -> float:
        v_q = build_vq(NoiseCouplings.from_eta00(eta00), op.intracavity_powers)
        return func(output_covariance(config, drift, v_q, omega))

    lo, hi = bracket
    f_lo = model(lo) - observed
    f_hi = model(hi) - observed
    if f_lo == 0.0:
        return InferenceResult(lo, bracket, xtol, True, "exact at lower bracket edge")
    if f_lo * f_hi > 0.0:
        return InferenceResult(
            None,
            bracket,
            xtol,
            False,
            f"no sign change in bracket: model({lo:g}) - observed = {f_lo:g}, "
            f"model({hi:g}) - observed = {f_hi:g}",
        )
    root = brentq(lambda e: model(e) - observed, lo, hi, xtol=xtol)
    return InferenceResult(float(root), bracket, xtol, True, "converged")
