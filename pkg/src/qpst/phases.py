"""Phase-accurate complex exponentials for long-horizon propagation.

Evaluating exp(-w*tau) for an eigenvalue w = x + iy at tau ~ 1e6..1e12
requires the phase y*tau to be known modulo 2*pi far below the naive
double-precision rounding of the product (which is ~|y*tau|*eps, i.e.
up to 1e-4 rad at y*tau = 1e12).  The product y*tau is therefore formed
as an error-free two-term expansion (Dekker's algorithm) and reduced
modulo 2*pi in double-double arithmetic.  The residual error of the
reduced phase is below 1e-15 rad for |y*tau| <= PHASE_BUDGET; beyond
the budget the *inputs* no longer carry enough phase information and
results are flagged imprecise rather than silently degraded.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

# Phases above this magnitude exhaust what double-precision inputs can
# represent to <= 1e-6 rad; results beyond it carry a precision flag.
PHASE_BUDGET = 1.0e12

_SPLIT = 134217729.0  # 2**27 + 1, Veltkamp splitting constant

# 2*pi as a double-double constant
_TWO_PI_HI = 6.283185307179586
_TWO_PI_LO = 2.4492935982947064e-16


class PhasePrecisionWarning(UserWarning):
    """Phase magnitude exceeds the double-precision budget."""


def _two_product(a, b):
    """Error-free product: returns (p, e) with p + e == a*b exactly."""
    p = a * b
    aa = _SPLIT * a
    a_hi = aa - (aa - a)
    a_lo = a - a_hi
    bb = _SPLIT * b
    b_hi = bb - (bb - b)
    b_lo = b - b_hi
    e = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, e


def _two_sum(a, b):
    """Error-free sum: returns (s, e) with s + e == a + b exactly."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def reduced_phase(y, tau):
    """(y * tau) mod 2*pi, accurate to ~1e-15 rad for |y*tau| <= 1e12.

    Accepts scalars or arrays (broadcasting); the result lies in
    [-pi - ulp, pi + ulp].
    """
    hi, lo = _two_product(np.asarray(y, dtype=float), np.asarray(tau, dtype=float))
    n = np.round(hi / _TWO_PI_HI)
    p, e = _two_product(n, _TWO_PI_HI)
    r_hi, r_e = _two_sum(hi, -p)
    return r_hi + (r_e + lo - e - n * _TWO_PI_LO)


def phase_exp_batch(w, taus):
    """exp(-w*tau) on a tau grid with compensated phase reduction.

    Parameters
    ----------
    w : (N,) complex eigenvalues
    taus : (T,) real times

    Returns
    -------
    values : (T, N) complex, exp(-w_k * tau_t)
    precise : (T,) bool, False where max_k |Im(w_k)*tau_t| > PHASE_BUDGET
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    phase = reduced_phase(w.imag[None, :], taus[:, None])
    decay = np.exp(-w.real[None, :] * taus[:, None])
    values = decay * (np.cos(phase) - 1j * np.sin(phase))
    precise = np.abs(taus) * np.max(np.abs(w.imag), initial=0.0) <= PHASE_BUDGET
    return values, precise


class PhaseExp(NamedTuple):
    value: complex
    precise: bool


def phase_accurate_exp(eigenvalue: complex, tau: float) -> PhaseExp:
    """exp(-eigenvalue * tau) with the phase reduced modulo 2*pi.

    The imaginary phase Im(eigenvalue)*tau is formed error-free and
    reduced in double-double arithmetic, so the result's phase error
    stays below 1e-6 rad for |Im(eigenvalue)*tau| <= 1e12.  Beyond that
    a PhasePrecisionWarning is issued and the result is flagged.
    """
    phase_mag = abs(float(np.imag(eigenvalue)) * tau)
    precise = phase_mag <= PHASE_BUDGET
    if not precise:
        warnings.warn(
            f"phase magnitude {phase_mag:.3g} exceeds the double-precision "
            f"budget {PHASE_BUDGET:.0e}; result is imprecise",
            PhasePrecisionWarning,
            stacklevel=2,
        )
    r = reduced_phase(float(np.imag(eigenvalue)), tau)
    value = np.exp(-float(np.real(eigenvalue)) * tau) * complex(np.cos(r), -np.sin(r))
    return PhaseExp(value, precise)
