"""Compiled inner loop of the stochastic integrator with streaming spectral
accumulation.

The recursion is the Euler-Maruyama step of the linear Langevin equation in
round-trip time units; the output stream ``y = m_gamma*x - u`` (reflection of
the recorded port-1 input) is folded into windowed single-frequency DFT
accumulators on the fly, so arbitrarily long trajectories never materialize.
Two half-overlapping window positions implement Welch averaging with 50%
overlap; a window accumulator only starts emitting once it has seen a full
segment.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def burn_in_kernel(x, z, a_step, bg, b2, n_b2):
    """Advance the state without recording; consumes one noise chunk."""
    n = z.shape[0]
    xn = np.empty(6)
    for i in range(n):
        for j in range(6):
            s = 0.0
            for k in range(6):
                s += a_step[j, k] * x[k]
            e = bg[j] * z[i, j]
            for k in range(n_b2):
                e += b2[j, k] * z[i, 6 + k]
            xn[j] = s + e
        for j in range(6):
            x[j] = xn[j]


@njit(cache=True, nogil=True)
def stream_kernel(
    x,
    z,
    a_step,
    bg,
    b2,
    n_b2,
    mgam,
    inv_sqrt_dt,
    cos_wdt,
    sin_wdt,
    ph_re,
    ph_im,
    win,
    pos,
    acc,
    segsum,
    segsq,
    seg_counts,
):
    """Process one chunk of pre-drawn standard normals for one trajectory.

    x:       state (6,), updated in place
    z:       (chunk, 6 + n_b2) standard normals
    a_step:  I + dt*M_A
    bg:      sqrt(dt)*sqrt(2*gamma_j) per quadrature (port-1 noise scaling)
    b2:      sqrt(dt) times the factor of the combined second-port plus
             phonon diffusion, (6, n_b2)
    mgam:    sqrt(2*gamma_j) for the output relation
    ph_*:    per-omega running phasor exp(-i*omega*t), updated in place
    win:     taper of length N (segment length in steps)
    pos:     (n_omega, 2) window positions; negative while an accumulator is
             still waiting for its first full segment
    acc:     (n_omega, 2, 6) complex windowed DFT accumulators
    segsum:  (n_omega, 21) running sums of per-segment spectra (unnormalized)
    segsq:   (n_omega, 21) running sums of squares
    seg_counts: (n_omega,) segments completed
    """
    n = z.shape[0]
    n_omega = ph_re.shape[0]
    big_n = win.shape[0]
    xn = np.empty(6)
    y = np.empty(6)
    for i in range(n):
        for j in range(6):
            y[j] = mgam[j] * x[j] - z[i, j] * inv_sqrt_dt
        for w in range(n_omega):
            pr = ph_re[w]
            pi = ph_im[w]
            for half in range(2):
                p = pos[w, half]
                if p >= 0:
                    c = win[p]
                    for j in range(6):
                        acc[w, half, j] += complex(c * y[j] * pr, c * y[j] * pi)
                p += 1
                if p == big_n:
                    # segment complete: accumulate its raw cross-spectrum
                    idx = 0
                    for a in range(6):
                        za = acc[w, half, a]
                        for b in range(a, 6):
                            val = (za * np.conj(acc[w, half, b])).real
                            segsum[w, idx] += val
                            segsq[w, idx] += val * val
                            idx += 1
                    seg_counts[w] += 1
                    for j in range(6):
                        acc[w, half, j] = 0.0j
                    p = 0
                pos[w, half] = p
            # advance the phasor by exp(-i*omega*dt)
            ph_re[w] = pr * cos_wdt[w] - pi * sin_wdt[w]
            ph_im[w] = pr * sin_wdt[w] + pi * cos_wdt[w]
        for j in range(6):
            s = 0.0
            for k in range(6):
                s += a_step[j, k] * x[k]
            e = bg[j] * z[i, j]
            for k in range(n_b2):
                e += b2[j, k] * z[i, 6 + k]
            xn[j] = s + e
        for j in range(6):
            x[j] = xn[j]
