"""Exact algebra of multimode coherent-state superpositions.

A pure superposition sum_r Lambda_r |beta^r_1 ... beta^r_N> evolves
under the dissipative flow without leaving the family: each branch
amplitude is mapped zeta^r = Theta(tau) beta^r while the density
operator picks up branch-pair weights

    w_rs = N^2 Lambda_r Lambda_s^* <{beta^s}|{beta^r}> / <{zeta^s}|{zeta^r}>,

whose structure keeps the trace exactly 1 at all times, damped or not.
Reduced single-mode states and trace overlaps Tr[rho_a rho_b] follow in
closed form from coherent-state inner products

    <a|b> = exp(-|a|^2/2 - |b|^2/2 + a^* b).

All overlap products are accumulated as exponents and exponentiated
once per branch pair, so cross terms such as e^{-2|alpha|^2} at
alpha = 5..10 (exponents of order -200) never underflow intermediate
factors.  Branch-pair sums use exact (fsum) accumulation so results do
not depend on summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .propagator import Propagator

__all__ = [
    "CoherentSuperposition",
    "EvolvedState",
    "ReducedState",
    "OverlapConsistencyError",
    "multimode_overlap",
    "overlap_exponent",
    "make_cat",
    "evolve",
    "reduce_mode",
    "initial_reduced",
    "reduced_overlap",
]

TRACE_TOL = 1e-10
IMAG_TOL = 1e-8


class OverlapConsistencyError(ArithmeticError):
    """A quantity that must be real came out with a large imaginary part."""


def overlap_exponent(a: np.ndarray, b: np.ndarray) -> complex:
    """log <{a}|{b}> = sum_m (-|a_m|^2/2 - |b_m|^2/2 + a_m^* b_m)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"amplitude vectors differ in shape: {a.shape} vs {b.shape}")
    terms = -0.5 * np.abs(a) ** 2 - 0.5 * np.abs(b) ** 2 + np.conj(a) * b
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def multimode_overlap(a: np.ndarray, b: np.ndarray) -> complex:
    """<{a}|{b}> for two multimode coherent amplitude vectors."""
    return complex(np.exp(overlap_exponent(a, b)))


def _fsum_complex(values) -> complex:
    values = np.asarray(values, dtype=complex).ravel()
    return complex(math.fsum(values.real), math.fsum(values.imag))


@dataclass(frozen=True)
class CoherentSuperposition:
    """Normalized superposition of Q multimode coherent branches.

    lambdas : (Q,) complex branch amplitudes Lambda_r
    betas : (Q, N) complex coherent amplitudes per branch
    norm : normalization factor N with
        N^2 sum_rs Lambda_r Lambda_s^* <{beta^s}|{beta^r}> = 1
    """

    lambdas: np.ndarray
    betas: np.ndarray
    norm: float

    def __post_init__(self):
        lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=complex))
        betas = np.atleast_2d(np.asarray(self.betas, dtype=complex))
        if lambdas.ndim != 1 or betas.ndim != 2 or lambdas.shape[0] != betas.shape[0]:
            raise ValueError("need Q branch amplitudes and a (Q, N) amplitude array")
        if lambdas.shape[0] < 1:
            raise ValueError("need at least one branch")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "betas", betas)

    @classmethod
    def from_branches(cls, lambdas, betas) -> "CoherentSuperposition":
        """Build with the normalization computed from the branch overlaps."""
        lambdas = np.atleast_1d(np.asarray(lambdas, dtype=complex))
        betas = np.atleast_2d(np.asarray(betas, dtype=complex))
        gram = _branch_gram_exponents(betas)
        total = _fsum_complex(
            lambdas[:, None] * np.conj(lambdas)[None, :] * np.exp(gram)
        )
        if abs(total.imag) > IMAG_TOL * max(1.0, abs(total.real)):
            raise OverlapConsistencyError(
                f"norm overlap sum has imaginary part {total.imag:.3e}"
            )
        if total.real <= 0:
            raise ValueError("branch superposition has non-positive norm")
        return cls(lambdas, betas, 1.0 / math.sqrt(total.real))

    @property
    def n_branches(self) -> int:
        return self.lambdas.shape[0]

    @property
    def n_modes(self) -> int:
        return self.betas.shape[1]


def _branch_gram_exponents(betas: np.ndarray) -> np.ndarray:
    """g[r, s] = log <{beta^s}|{beta^r}> for all branch pairs."""
    q = betas.shape[0]
    g = np.empty((q, q), dtype=complex)
    for r in range(q):
        for s in range(q):
            g[r, s] = overlap_exponent(betas[s], betas[r])
    return g


@dataclass(frozen=True)
class EvolvedState:
    """Superposition after amplitude flow.

    Retains the initial betas (entering the branch-weight numerators)
    alongside the evolved zetas; the weight structure keeps the trace
    of the represented density operator exactly 1 under damping.
    """

    lambdas: np.ndarray
    betas: np.ndarray
    zetas: np.ndarray
    norm: float
    time: float

    @property
    def n_branches(self) -> int:
        return self.lambdas.shape[0]

    @property
    def n_modes(self) -> int:
        return self.zetas.shape[1]

    def branch_weights(self) -> np.ndarray:
        """w[r, s] = N^2 L_r L_s^* <{b^s}|{b^r}> / <{z^s}|{z^r}>."""
        g_beta = _branch_gram_exponents(self.betas)
        g_zeta = _branch_gram_exponents(self.zetas)
        pref = self.norm**2 * self.lambdas[:, None] * np.conj(self.lambdas)[None, :]
        return pref * np.exp(g_beta - g_zeta)

    def trace(self) -> float:
        """Trace of the represented density operator (must be 1)."""
        g_zeta = _branch_gram_exponents(self.zetas)
        total = _fsum_complex(self.branch_weights() * np.exp(g_zeta))
        if abs(total.imag) > IMAG_TOL:
            raise OverlapConsistencyError(
                f"trace has imaginary part {total.imag:.3e}"
            )
        return total.real


@dataclass(frozen=True)
class ReducedState:
    """Reduced density operator of one mode as weighted coherent dyads.

    rho_m = sum_rs weights[r, s] |amplitudes[r]><amplitudes[s]| with
    weights[r, s] = N^2 L_r L_s^* <{b^s}|{b^r}> / <z_m^s|z_m^r>.
    """

    mode: int
    weights: np.ndarray
    amplitudes: np.ndarray

    @property
    def n_branches(self) -> int:
        return self.amplitudes.shape[0]

    def trace(self) -> float:
        q = self.n_branches
        g = np.empty((q, q), dtype=complex)
        for r in range(q):
            for s in range(q):
                g[r, s] = overlap_exponent(self.amplitudes[s : s + 1],
                                           self.amplitudes[r : r + 1])
        total = _fsum_complex(self.weights * np.exp(g))
        return total.real


def make_cat(n: int, mode: int, alpha: complex,
             transmitter_beta: complex = 0.0) -> CoherentSuperposition:
    """Two-branch cat N(|+alpha> + |-alpha>) in `mode` (1-based).

    Every other oscillator holds the coherent amplitude transmitter_beta
    in both branches (vacuum by default).  The normalization is the
    closed form N^2 = 1/(2(1 + e^{-2|alpha|^2})).
    """
    if not 1 <= mode <= n:
        raise ValueError(f"mode {mode} outside 1..{n}")
    betas = np.full((2, n), complex(transmitter_beta), dtype=complex)
    betas[0, mode - 1] = alpha
    betas[1, mode - 1] = -alpha
    norm = 1.0 / math.sqrt(2.0 * (1.0 + math.exp(-2.0 * abs(alpha) ** 2)))
    return CoherentSuperposition(np.ones(2, dtype=complex), betas, norm)


def evolve(state: CoherentSuperposition, theta: Propagator) -> EvolvedState:
    """Map every branch amplitude through Theta; Lambda and N unchanged."""
    if state.n_modes != theta.n:
        raise ValueError(
            f"state has {state.n_modes} modes, propagator {theta.n}"
        )
    zetas = state.betas @ theta.matrix.T
    return EvolvedState(state.lambdas, state.betas, zetas, state.norm,
                        theta.time)


def reduce_mode(state: EvolvedState, mode: int) -> ReducedState:
    """Reduced density operator of oscillator `mode` (1-based)."""
    if not 1 <= mode <= state.n_modes:
        raise ValueError(f"mode {mode} outside 1..{state.n_modes}")
    m = mode - 1
    q = state.n_branches
    g_beta = _branch_gram_exponents(state.betas)
    zm = state.zetas[:, m]
    g_mode = np.empty((q, q), dtype=complex)
    for r in range(q):
        for s in range(q):
            g_mode[r, s] = (-0.5 * abs(zm[s]) ** 2 - 0.5 * abs(zm[r]) ** 2
                            + np.conj(zm[s]) * zm[r])
    pref = state.norm**2 * state.lambdas[:, None] * np.conj(state.lambdas)[None, :]
    weights = pref * np.exp(g_beta - g_mode)
    return ReducedState(mode=mode, weights=weights, amplitudes=zm.copy())


def initial_reduced(state: CoherentSuperposition, mode: int) -> ReducedState:
    """Reduced state of `mode` before any evolution."""
    identity = Propagator(0.0, np.eye(state.n_modes, dtype=complex))
    return reduce_mode(evolve(state, identity), mode)


def reduced_overlap(a: ReducedState, b: ReducedState) -> float:
    """Tr[rho_a rho_b] for two single-mode reduced states.

    Expands Tr[|u_r><u_s| |x_p><x_q|] = <u_s|x_p><x_q|u_r> over all
    branch pairs; the exponents of the four coherent overlaps combine
    before a single exponential per (r, s, p, q).
    """
    u = a.amplitudes
    x = b.amplitudes
    qa, qb = len(u), len(x)
    terms = np.empty((qa, qa, qb, qb), dtype=complex)
    for r in range(qa):
        for s in range(qa):
            for p in range(qb):
                for q in range(qb):
                    expo = (-0.5 * abs(u[s]) ** 2 - 0.5 * abs(x[p]) ** 2
                            + np.conj(u[s]) * x[p]
                            - 0.5 * abs(x[q]) ** 2 - 0.5 * abs(u[r]) ** 2
                            + np.conj(x[q]) * u[r])
                    terms[r, s, p, q] = (a.weights[r, s] * b.weights[p, q]
                                         * np.exp(expo))
    total = _fsum_complex(terms)
    if abs(total.imag) > IMAG_TOL:
        raise OverlapConsistencyError(
            f"Tr[rho_a rho_b] has imaginary part {total.imag:.3e}"
        )
    return total.real
