import math

import numpy as np
import pytest

from oponoise import ValidationError, operating_point, opo_drift, output_covariance
from oponoise.fitting import (
    CrossCovarianceRecord,
    ModelViolationWarning,
    PowerVarianceRecord,
    fit_eta_cross,
    fit_eta_diagonal,
    fit_temperature,
    fit_waist_profile,
    infer_eta00,
    internal_phase_noise,
    intracavity_power,
    output_phase_covariance,
    output_phase_variance,
)
from oponoise.phonon import NoiseCouplings, build_vq, waist_position_profile
from conftest import reference_cavity, THRESHOLD_W, OMEGA_21MHZ
from test_phonon import geometry_config


def diagonal_records(config, mode, eta, powers, reference, noise=0.0, rng=None):
    """Synthetic variance-vs-power records from the forward free-cavity model."""
    m = config.modes[mode]
    records = []
    for p_ic in powers:
        var_q = output_phase_variance(config, mode, OMEGA_21MHZ, eta * p_ic)
        var_p = 1.0
        if reference == "reflected_output":
            p_out = p_ic * (m.gamma - m.mu) ** 2 / (2.0 * m.gamma)
        elif reference == "transmitted_output":
            p_out = p_ic * 2.0 * m.gamma
        else:
            p_out = p_ic
        sigma = None
        if noise > 0.0:
            sigma = noise * var_q
            var_q = var_q + rng.normal(0.0, sigma)
            var_p = var_p + rng.normal(0.0, noise)
        records.append(PowerVarianceRecord(p_out, reference, var_p, var_q, sigma))
    return records


class TestPowerConversions:
    def test_intracavity_identity(self, cavity):
        assert intracavity_power(0.3, "intracavity", cavity, 0) == 0.3

    def test_transmitted(self, cavity):
        # P_ic = P_out / (2*gamma1)
        assert intracavity_power(0.04, "transmitted_output", cavity, 1) == pytest.approx(1.0)

    def test_reflected(self, cavity):
        # 2*gamma0/(gamma0-mu0)^2 with gamma0 = 0.15, mu0 = 0.01
        expected = 2 * 0.15 / 0.14**2
        assert intracavity_power(1.0, "reflected_output", cavity, 0) == pytest.approx(expected)

    def test_impedance_matched_reflection_is_singular(self):
        cfg = reference_cavity(mu0=0.15)
        with pytest.raises(ValidationError, match="impedance"):
            intracavity_power(1.0, "reflected_output", cfg, 0)

    def test_variance_maps_are_inverses(self, cavity):
        for mode in range(3):
            for internal in (0.0, 0.1, 2.0):
                v = output_phase_variance(cavity, mode, OMEGA_21MHZ, internal)
                assert internal_phase_noise(cavity, mode, OMEGA_21MHZ, v) == pytest.approx(
                    internal, abs=1e-12
                )


class TestFitEtaDiagonal:
    def test_recovers_pump_coupling_from_reflected_power(self, cavity):
        powers = np.linspace(0.05, 0.8, 10)
        records = diagonal_records(cavity, 0, 0.53, powers, "reflected_output")
        fit = fit_eta_diagonal(records, cavity, 0, OMEGA_21MHZ)
        assert fit.parameters["eta00"] == pytest.approx(0.53, rel=1e-10)

    def test_recovers_signal_coupling_from_transmitted_power(self, cavity):
        powers = np.linspace(0.1, 1.5, 8)
        records = diagonal_records(cavity, 1, 0.15, powers, "transmitted_output")
        fit = fit_eta_diagonal(records, cavity, 1, OMEGA_21MHZ)
        assert fit.parameters["eta11"] == pytest.approx(0.15, rel=1e-10)

    def test_sql_data_gives_zero_slope(self, cavity):
        records = [
            PowerVarianceRecord(p, "intracavity", 1.0, 1.0) for p in (0.1, 0.2, 0.3, 0.4)
        ]
        fit = fit_eta_diagonal(records, cavity, 0, OMEGA_21MHZ)
        assert fit.parameters["eta00"] == pytest.approx(0.0, abs=1e-15)

    def test_mixed_power_references_rejected(self, cavity):
        records = [
            PowerVarianceRecord(0.1, "intracavity", 1.0, 1.1),
            PowerVarianceRecord(0.2, "reflected_output", 1.0, 1.2),
            PowerVarianceRecord(0.3, "intracavity", 1.0, 1.3),
        ]
        with pytest.raises(ValidationError, match="mixed"):
            fit_eta_diagonal(records, cavity, 0, OMEGA_21MHZ)

    def test_too_few_records_rejected(self, cavity):
        records = [PowerVarianceRecord(0.1, "intracavity", 1.0, 1.1)] * 2
        with pytest.raises(ValidationError, match="3"):
            fit_eta_diagonal(records, cavity, 0, OMEGA_21MHZ)

    def test_negative_slope_flagged(self, cavity):
        records = [
            PowerVarianceRecord(p, "intracavity", 1.0, 1.0 - 0.5 * p) for p in (0.1, 0.3, 0.5)
        ]
        with pytest.warns(ModelViolationWarning, match="negative"):
            fit = fit_eta_diagonal(records, cavity, 0, OMEGA_21MHZ)
        assert "negative_coupling" in fit.flags

    def test_amplitude_off_sql_warns(self, cavity):
        records = [
            PowerVarianceRecord(p, "intracavity", 1.5, 1.0 + 0.5 * p, 0.01)
            for p in (0.1, 0.2, 0.3, 0.4, 0.5)
        ]
        with pytest.warns(ModelViolationWarning, match="amplitude"):
            fit = fit_eta_diagonal(records, cavity, 0, OMEGA_21MHZ)
        assert "amplitude_off_sql" in fit.flags

    def test_free_intercept_diagnostic_mode(self, cavity):
        powers = np.linspace(0.05, 0.8, 10)
        records = diagonal_records(cavity, 0, 0.53, powers, "intracavity")
        fit = fit_eta_diagonal(records, cavity, 0, OMEGA_21MHZ, allow_intercept=True)
        assert fit.parameters["eta00"] == pytest.approx(0.53, rel=1e-8)
        assert fit.parameters["intercept"] == pytest.approx(0.0, abs=1e-10)

    def test_uncertainty_shrinks_with_replication(self, cavity):
        rng = np.random.default_rng(8)
        powers = np.linspace(0.05, 0.8, 12)
        small = diagonal_records(cavity, 0, 0.53, powers, "intracavity", 0.05, rng)
        big = diagonal_records(
            cavity, 0, 0.53, np.repeat(powers, 4), "intracavity", 0.05, rng
        )
        err_small = fit_eta_diagonal(small, cavity, 0, OMEGA_21MHZ).uncertainties["eta00"]
        err_big = fit_eta_diagonal(big, cavity, 0, OMEGA_21MHZ).uncertainties["eta00"]
        assert err_small / err_big == pytest.approx(2.0, rel=0.2)


class TestFitEtaCross:
    def _records(self, cavity, eta, rng=None, noise=0.0):
        records = []
        for pj, pk in [(0.1, 0.1), (0.2, 0.4), (0.5, 0.3), (0.8, 0.8), (0.6, 0.2)]:
            cov = output_phase_covariance(cavity, 1, 2, OMEGA_21MHZ, eta * math.sqrt(pj * pk))
            sigma = None
            if noise > 0.0:
                sigma = noise * abs(cov) + 1e-4
                cov += rng.normal(0.0, sigma)
            records.append(CrossCovarianceRecord(pj, pk, cov, sigma))
        return records

    def test_recovers_signal_idler_coupling(self, cavity):
        fit = fit_eta_cross(self._records(cavity, 0.087), cavity, (1, 2), OMEGA_21MHZ)
        assert fit.parameters["eta12"] == pytest.approx(0.087, rel=1e-10)

    def test_zero_covariance_gives_zero_slope(self, cavity):
        records = [CrossCovarianceRecord(p, p, 0.0) for p in (0.1, 0.2, 0.3)]
        fit = fit_eta_cross(records, cavity, (1, 2), OMEGA_21MHZ)
        assert fit.parameters["eta12"] == 0.0

    def test_cauchy_schwarz_preserved_by_fitting(self, cavity):
        # generator couplings satisfy the bound; consistent fits inherit it
        eta00, eta11, eta01 = 0.53, 0.15, 0.14
        assert eta01 <= math.sqrt(eta00 * eta11) * (1 + 1e-12)
        powers = np.linspace(0.05, 0.8, 8)
        d0 = fit_eta_diagonal(
            diagonal_records(cavity, 0, eta00, powers, "intracavity"), cavity, 0, OMEGA_21MHZ
        )
        d1 = fit_eta_diagonal(
            diagonal_records(cavity, 1, eta11, powers, "intracavity"), cavity, 1, OMEGA_21MHZ
        )
        records = []
        for pj, pk in [(0.1, 0.1), (0.2, 0.4), (0.5, 0.3), (0.8, 0.8)]:
            cov = output_phase_covariance(cavity, 0, 1, OMEGA_21MHZ, eta01 * math.sqrt(pj * pk))
            records.append(CrossCovarianceRecord(pj, pk, cov))
        c = fit_eta_cross(records, cavity, (0, 1), OMEGA_21MHZ)
        assert c.parameters["eta01"] <= math.sqrt(
            d0.parameters["eta00"] * d1.parameters["eta11"]
        ) * (1 + 1e-9)


class TestFitWaistProfile:
    def test_recovers_scale_factor_with_noise(self):
        cfg = geometry_config()
        rng = np.random.default_rng(4)
        zs = np.linspace(-0.02, 0.02, 15)
        data = [
            (z, 0.2 * waist_position_profile(cfg, z) * (1.0 + rng.normal(0.0, 0.01)))
            for z in zs
        ]
        fit = fit_waist_profile(data, cfg)
        assert fit.parameters["factor"] == pytest.approx(0.2, rel=0.01)
        assert fit.uncertainties["factor"] < 0.01 * 0.2 * 2

    def test_single_point_at_center(self):
        cfg = geometry_config()
        fit = fit_waist_profile([(0.0, 0.5)], cfg)
        assert fit.parameters["factor"] == pytest.approx(0.5 / 2.2731, rel=1e-3)

    def test_symmetric_data_symmetric_residuals(self):
        cfg = geometry_config()
        zs = np.linspace(-0.02, 0.02, 11)
        data = [(z, 0.3 * waist_position_profile(cfg, abs(z))) for z in zs]
        fit = fit_waist_profile(data, cfg)
        np.testing.assert_allclose(fit.residuals, fit.residuals[::-1], atol=1e-12)


class TestFitTemperature:
    def test_noise_free_round_trip(self):
        ts = np.linspace(257.0, 383.0, 12)
        data = [(t, 5.92e-3 * t - 1.38) for t in ts]
        fit = fit_temperature(data)
        assert fit.parameters["slope"] == pytest.approx(5.92e-3, rel=1e-10)
        assert fit.parameters["intercept"] == pytest.approx(-1.38, rel=1e-10)
        assert fit.parameters["zero_crossing"] == pytest.approx(233.1, abs=0.01)

    def test_constant_data_zero_slope(self):
        data = [(t, 0.4) for t in (260.0, 300.0, 340.0, 380.0)]
        fit = fit_temperature(data)
        assert fit.parameters["slope"] == pytest.approx(0.0, abs=1e-15)

    def test_noisy_recovery_within_uncertainties(self):
        rng = np.random.default_rng(12)
        ts = np.linspace(257.0, 383.0, 16)
        sigma = np.full(len(ts), 0.03)
        data = [(t, 5.92e-3 * t - 1.38 + rng.normal(0.0, 0.03)) for t in ts]
        fit = fit_temperature(data, sigma=sigma)
        assert abs(fit.parameters["slope"] - 5.92e-3) < 2 * fit.uncertainties["slope"]
        assert abs(fit.parameters["intercept"] + 1.38) < 2 * fit.uncertainties["intercept"]


class TestInferEta00:
    def observed(self, cavity, eta00, sigma=1.2, observable="var_q0"):
        from oponoise.fitting import OBSERVABLES

        op = operating_point(cavity, sigma, THRESHOLD_W)
        drift = opo_drift(cavity, op)
        v_q = build_vq(NoiseCouplings.from_eta00(eta00), op.intracavity_powers)
        return OBSERVABLES[observable](output_covariance(cavity, drift, v_q, OMEGA_21MHZ))

    def test_round_trips_reference_magnitudes(self, cavity):
        for eta00 in (0.24, 0.64, 1.16):
            obs = self.observed(cavity, eta00)
            res = infer_eta00(cavity, 1.2, THRESHOLD_W, OMEGA_21MHZ, obs)
            assert res.converged
            assert res.eta00 == pytest.approx(eta00, abs=1e-3)

    def test_zero_observable_returns_zero(self, cavity):
        obs = self.observed(cavity, 0.0)
        res = infer_eta00(cavity, 1.2, THRESHOLD_W, OMEGA_21MHZ, obs)
        assert res.converged
        assert res.eta00 == pytest.approx(0.0, abs=1e-9)

    def test_monotone_observable(self, cavity):
        values = [self.observed(cavity, e) for e in np.linspace(0.0, 2.0, 15)]
        assert np.all(np.diff(values) > 0.0)

    def test_no_solution_reported(self, cavity):
        obs = self.observed(cavity, 8.0)  # outside the default bracket
        res = infer_eta00(cavity, 1.2, THRESHOLD_W, OMEGA_21MHZ, obs)
        assert not res.converged
        assert res.eta00 is None
        assert "sign change" in res.message
