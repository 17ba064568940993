"""Drift and input-coupling matrices of the linearized three-mode cavity.

The cavity state is the fluctuation vector ``[p0, q0, p1, q1, p2, q2]``; its
evolution per round trip is ``dX/dt = M_A X + M_gamma X1_in + M_mu X2_in + Q``
with diagonal coupling matrices to the mirror port and to the spurious-loss
port.  Two drift regimes are supported: the passive (free) cavity, and the
unseeded non-degenerate oscillator above threshold at exact resonance with
balanced signal/idler losses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CavityConfig, OperatingPoint, ValidationError

FREE_CAVITY = "free_cavity"
OPO_ABOVE_THRESHOLD = "opo_above_threshold"


@dataclass(frozen=True)
class CouplingMatrices:
    """Diagonal input couplings: sqrt(2*gamma_j) and sqrt(2*mu_j) per quadrature."""

    m_gamma: np.ndarray = field(repr=False)
    m_mu: np.ndarray = field(repr=False)

    @property
    def gamma_diagonal(self) -> np.ndarray:
        return np.diag(self.m_gamma)

    @property
    def mu_diagonal(self) -> np.ndarray:
        return np.diag(self.m_mu)


@dataclass(frozen=True)
class DriftMatrix:
    """6x6 drift matrix plus its regime tag."""

    matrix: np.ndarray = field(repr=False)
    regime: str

    @property
    def is_opo(self) -> bool:
        return self.regime == OPO_ABOVE_THRESHOLD


def coupling_matrices(config: CavityConfig) -> CouplingMatrices:
    """Input coupling matrices for the mirror and spurious-loss ports."""
    gam = np.repeat([m.gamma for m in config.modes], 2)
    mu = np.repeat([m.mu for m in config.modes], 2)
    return CouplingMatrices(
        m_gamma=np.diag(np.sqrt(2.0 * gam)),
        m_mu=np.diag(np.sqrt(2.0 * mu)),
    )


def free_cavity_drift(config: CavityConfig) -> DriftMatrix:
    """Passive cavity: M_A = -(M_gamma^2 + M_mu^2)/2, diagonal -(gamma_j + mu_j)."""
    decay = np.repeat([m.gamma_total for m in config.modes], 2)
    return DriftMatrix(matrix=np.diag(-decay), regime=FREE_CAVITY)


def opo_drift(config: CavityConfig, op: OperatingPoint) -> DriftMatrix:
    """Drift matrix of the above-threshold oscillator at exact resonance.

    Requires balanced signal/idler losses (gamma1 = gamma2, mu1 = mu2); the
    model is not valid otherwise and unbalanced input is rejected.  The phase
    sector contains an exactly undamped mode along q1 - q2 (the phase
    diffusion of the signal/idler phase difference), so the matrix is
    singular by construction.
    """
    pump, signal, idler = config.modes
    if signal.gamma != idler.gamma or signal.mu != idler.mu:
        raise ValidationError(
            "opo_drift requires balanced signal/idler losses "
            f"(gamma1={signal.gamma}, gamma2={idler.gamma}, mu1={signal.mu}, mu2={idler.mu}); "
            "the balanced-loss model does not apply"
        )
    if op.beta < 0.0:
        raise ValidationError(f"beta must be nonnegative, got {op.beta}")
    gp0 = pump.gamma_total
    gp = signal.gamma_total
    b = op.beta
    m = np.array(
        [
            [-gp0, 0.0, -gp * b, 0.0, -gp * b, 0.0],
            [0.0, -gp0, 0.0, -gp * b, 0.0, -gp * b],
            [gp * b, 0.0, -gp, 0.0, gp, 0.0],
            [0.0, gp * b, 0.0, -gp, 0.0, -gp],
            [gp * b, 0.0, gp, 0.0, -gp, 0.0],
            [0.0, gp * b, 0.0, -gp, 0.0, -gp],
        ]
    )
    return DriftMatrix(matrix=m, regime=OPO_ABOVE_THRESHOLD)
