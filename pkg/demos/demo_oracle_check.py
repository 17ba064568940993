"""Validate the analytic covariance against the time-domain simulation.

Integrates the linear Langevin dynamics with correlated phonon noise,
estimates the output cross-spectral matrix by Welch averaging, and compares
every independent entry with the frequency-domain prediction.  Runs at
moderate statistics (a few thousand segments, about a minute); the full
acceptance-grade comparison lives in tests/test_acceptance.py.
"""

import time

import numpy as np

from oponoise import operating_point, opo_drift, output_covariance
from oponoise.core import QUADRATURES, UPPER_TRIANGLE
from oponoise.drift import coupling_matrices
from oponoise.oracle import NoiseSources, SimulationPlan, simulate_psd, manley_rowe_check, integrate
from oponoise.phonon import build_vq
from demo_common import cavity, eta_measured, omega, threshold_w

sigma = 1.5
op = operating_point(cavity, sigma, threshold_w)
drift = opo_drift(cavity, op)
v_q = build_vq(eta_measured, op.intracavity_powers)
sources = NoiseSources(coupling_matrices(cavity), v_q)
analytic = output_covariance(cavity, drift, v_q, omega).v_total.matrix

plan = SimulationPlan(time_step=0.3125, n_steps=2_000_000, n_trajectories=8,
                      master_seed=2024, burn_in=20_000)
print(f"integrating {plan.n_trajectories} trajectories of {plan.n_steps} steps...")
start = time.perf_counter()
est = simulate_psd(drift, sources, plan, [omega], n_workers=2)
print(f"done in {time.perf_counter() - start:.1f} s: {est.n_segments} segments "
      f"({est.n_effective:.0f} effective)")

mc, se = est.matrices[0], est.stderr[0]
print(f"\n{'entry':>8} {'analytic':>10} {'monte-carlo':>12} {'stderr':>9} {'z':>6}")
worst = 0.0
for a, b in UPPER_TRIANGLE:
    z = (mc[a, b] - analytic[a, b]) / se[a, b]
    worst = max(worst, abs(z))
    if a == b or abs(analytic[a, b]) > 0.05:
        print(f"{QUADRATURES[a] + QUADRATURES[b]:>8} {analytic[a, b]:10.4f} "
              f"{mc[a, b]:12.4f} {se[a, b]:9.4f} {z:6.2f}")
print(f"\nworst |z| over all 21 entries: {worst:.2f}")

# photon-flux bookkeeping on a short materialized run
short = SimulationPlan(time_step=0.3125, n_steps=50_000, n_trajectories=8,
                       master_seed=7, burn_in=5_000)
report = manley_rowe_check(integrate(drift, short, sources), op, cavity)
print(f"\ntwin-beam flux balance: generated {report.generated_flux_signal:.3e} per beam, "
      f"pump consumed {report.consumed_pump_flux:.3e}, "
      f"residual {100 * report.flux_residual:.2f}%, "
      f"symmetry z = {report.symmetry_zscore:.2f}, flagged = {report.flagged}")
