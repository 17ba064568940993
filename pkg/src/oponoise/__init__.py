"""Quantum noise modeling of a triply resonant optical parametric oscillator
with thermal-phonon excess phase noise.

The package provides the analytic frequency-domain covariance model, a
time-domain stochastic oracle for validating it, the microscopic model of the
phonon-noise couplings, and fitters for recovering those couplings from
measurement-style data.
"""

from .core import (
    AMPLITUDE_INDICES,
    PHASE_INDICES,
    QUADRATURES,
    UPPER_TRIANGLE,
    CavityConfig,
    ModeParams,
    NumericalError,
    OperatingPoint,
    QuadratureCovariance,
    ValidationError,
    normalize_frequency,
    operating_point,
    quadrature_index,
    validate_config,
)
from .drift import (
    FREE_CAVITY,
    OPO_ABOVE_THRESHOLD,
    CouplingMatrices,
    DriftMatrix,
    coupling_matrices,
    free_cavity_drift,
    opo_drift,
)
from .phonon import (
    CrystalModel,
    NoiseCouplings,
    build_vq,
    effective_waist,
    eta_microscopic,
    photoelastic_coupling,
    temperature_law,
    thermal_phonon_energy,
    waist_position_profile,
)
from .spectra import (
    DuanResult,
    SpectrumResult,
    SweepPoint,
    apply_detection,
    duan_criterion,
    intracavity_transfer,
    output_covariance,
    sweep,
    vlf_tripartite,
)

__version__ = "0.1.0"
