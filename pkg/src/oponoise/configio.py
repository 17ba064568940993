"""Flat key-value configuration files.

The on-disk format is plain text, one ``key = value`` pair per line, ``#``
comments and blank lines allowed.  Keys are namespaced (``mode0.gamma``,
``cavity.fsr_hz``, ...) and map one-to-one onto the domain-type fields.
Unknown keys are hard errors; the only defaulted key is
``modeJ.detection_efficiency`` (1.0).

Documented keys
---------------
cavity.fsr_hz, cavity.crystal_length_m, cavity.rayleigh_length_m,
cavity.waist0_m, cavity.waist1_m, cavity.waist2_m
    Cavity geometry; waists are per mode at the cavity focus.
modeJ.wavelength_m, modeJ.gamma, modeJ.mu, modeJ.refractive_index,
modeJ.detection_efficiency  (J = 0, 1, 2)
    Per-mode optical constants and losses.
opo.threshold_power_w
    Oscillation threshold (optional section; required by commands that need
    absolute intracavity powers).
eta.00, eta.01, eta.02, eta.11, eta.12, eta.22
    Phase-noise coupling matrix entries in 1/W (optional; also the schema of
    files passed via ``--eta-file``).
crystal.lc_m, crystal.density_kg_m3, crystal.sound_speed_m_s,
crystal.temperature_k, crystal.p0, crystal.p1, crystal.p2, crystal.strain_rms
    Microscopic crystal model; ``crystal.pJ`` and ``crystal.strain_rms`` are
    six comma-separated numbers (contracted tensor components).
temp_law.slope_per_wk, temp_law.intercept_per_w
    Linear temperature law for eta00 (optional; used by temperature sweeps).
oracle.dt, oracle.n_steps, oracle.n_traj, oracle.seed, oracle.burn_in,
oracle.segment_rt
    Monte-Carlo plan; dt and segment_rt are in round trips.
"""

from __future__ import annotations

import os

from .core import CavityConfig, ModeParams, ValidationError
from .phonon import CrystalModel, NoiseCouplings

_CAVITY_KEYS = {
    "cavity.fsr_hz",
    "cavity.crystal_length_m",
    "cavity.rayleigh_length_m",
    "cavity.waist0_m",
    "cavity.waist1_m",
    "cavity.waist2_m",
}
_MODE_KEYS = {
    f"mode{j}.{f}"
    for j in range(3)
    for f in ("wavelength_m", "gamma", "mu", "refractive_index", "detection_efficiency")
}
_OPO_KEYS = {"opo.threshold_power_w"}
_ETA_KEYS = {f"eta.{a}{b}" for a in range(3) for b in range(a, 3)}
_CRYSTAL_KEYS = {
    "crystal.lc_m",
    "crystal.density_kg_m3",
    "crystal.sound_speed_m_s",
    "crystal.temperature_k",
    "crystal.p0",
    "crystal.p1",
    "crystal.p2",
    "crystal.strain_rms",
}
_TEMP_LAW_KEYS = {"temp_law.slope_per_wk", "temp_law.intercept_per_w"}
_ORACLE_KEYS = {
    "oracle.dt",
    "oracle.n_steps",
    "oracle.n_traj",
    "oracle.seed",
    "oracle.burn_in",
    "oracle.segment_rt",
}

KNOWN_KEYS = frozenset(
    _CAVITY_KEYS | _MODE_KEYS | _OPO_KEYS | _ETA_KEYS | _CRYSTAL_KEYS | _TEMP_LAW_KEYS | _ORACLE_KEYS
)


def parse_key_values(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse ``key = value`` lines; rejects unknown and duplicate keys."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KNOWN_KEYS:
            raise ValidationError(f"{source}:{lineno}: unknown configuration key {key!r}")
        if key in values:
            raise ValidationError(f"{source}:{lineno}: duplicate key {key!r}")
        if not value:
            raise ValidationError(f"{source}:{lineno}: empty value for key {key!r}")
        values[key] = value
    return values


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_key_values(fh.read(), source=str(path))


def _require(values: dict[str, str], key: str, source: str) -> str:
    if key not in values:
        raise ValidationError(f"{source}: missing required key {key!r}")
    return values[key]


def _as_float(values: dict[str, str], key: str, source: str) -> float:
    raw = _require(values, key, source)
    try:
        return float(raw)
    except ValueError:
        raise ValidationError(f"{source}: key {key!r} is not a number: {raw!r}") from None


def _as_vector6(values: dict[str, str], key: str, source: str) -> tuple[float, ...]:
    raw = _require(values, key, source)
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 6:
        raise ValidationError(f"{source}: key {key!r} needs six comma-separated numbers")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValidationError(f"{source}: key {key!r} has a non-numeric component: {raw!r}") from None


def cavity_from_values(values: dict[str, str], source: str = "<config>") -> CavityConfig:
    modes = []
    for j in range(3):
        eff_key = f"mode{j}.detection_efficiency"
        eff = float(values[eff_key]) if eff_key in values else 1.0
        modes.append(
            ModeParams(
                index=j,
                wavelength=_as_float(values, f"mode{j}.wavelength_m", source),
                gamma=_as_float(values, f"mode{j}.gamma", source),
                mu=_as_float(values, f"mode{j}.mu", source),
                refractive_index=_as_float(values, f"mode{j}.refractive_index", source),
                detection_efficiency=eff,
            )
        )
    return CavityConfig(
        modes=(modes[0], modes[1], modes[2]),
        free_spectral_range=_as_float(values, "cavity.fsr_hz", source),
        crystal_length=_as_float(values, "cavity.crystal_length_m", source),
        rayleigh_length=_as_float(values, "cavity.rayleigh_length_m", source),
        waists=(
            _as_float(values, "cavity.waist0_m", source),
            _as_float(values, "cavity.waist1_m", source),
            _as_float(values, "cavity.waist2_m", source),
        ),
    )


def load_cavity_config(path: str | os.PathLike) -> CavityConfig:
    return cavity_from_values(read_config_file(path), source=str(path))


def eta_from_values(values: dict[str, str], source: str = "<config>") -> NoiseCouplings:
    import numpy as np

    eta = np.zeros((3, 3))
    for a in range(3):
        for b in range(a, 3):
            eta[a, b] = eta[b, a] = _as_float(values, f"eta.{a}{b}", source)
    return NoiseCouplings(eta)


def load_eta(path: str | os.PathLike) -> NoiseCouplings:
    return eta_from_values(read_config_file(path), source=str(path))


def crystal_from_values(values: dict[str, str], source: str = "<config>") -> CrystalModel:
    import numpy as np

    return CrystalModel(
        photoelastic_vectors=np.array(
            [_as_vector6(values, f"crystal.p{j}", source) for j in range(3)]
        ),
        strain_rms=np.array(_as_vector6(values, "crystal.strain_rms", source)),
        coherence_length=_as_float(values, "crystal.lc_m", source),
        density=_as_float(values, "crystal.density_kg_m3", source),
        sound_speed=_as_float(values, "crystal.sound_speed_m_s", source),
        temperature=_as_float(values, "crystal.temperature_k", source),
    )


def load_crystal_model(path: str | os.PathLike) -> CrystalModel:
    return crystal_from_values(read_config_file(path), source=str(path))


def threshold_power_from_values(values: dict[str, str], source: str = "<config>") -> float:
    return _as_float(values, "opo.threshold_power_w", source)


def temp_law_from_values(values: dict[str, str], source: str = "<config>") -> tuple[float, float]:
    """(slope in 1/(W*K), intercept in 1/W) of the linear eta00 temperature law."""
    return (
        _as_float(values, "temp_law.slope_per_wk", source),
        _as_float(values, "temp_law.intercept_per_w", source),
    )
