"""Brute-force verifier: master-equation integration in truncated Fock space.

Everything else in this package propagates coherent amplitudes in closed
form.  This module instead integrates the density matrix of the full
network in a truncated number basis,

    drho/dt = -i[H, rho] + sum_m Gamma_mm (a_m rho a_m^+
              - {a_m^+ a_m, rho}/2),

with classic fixed-step 4th-order Runge-Kutta, and is used to
cross-validate the fast path on small networks and small amplitudes.
Fixed step keeps reruns bit-reproducible; the step is chosen so that
||h * L|| <= 0.05 with ||L|| measured by power iteration on the actual
superoperator action.

Basis ordering is mode-major with mode 1 slowest-varying: the row index
of `matrix` decomposes as (n_1, n_2, ..., n_N) in row-major (C) order,
so reshaping to (d,)*N + (d,)*N recovers per-mode axes deterministically.

The anti-Hermitian drift is folded into K = H - (i/2) sum Gamma_mm n_m,
so one sparse product per stage gives the commutator part as
(-iK) rho + ((-iK) rho)^+ (stages stay Hermitian), and the jump terms
are strided single-mode shifts rather than matrix products.

Guardrails: the oracle refuses more than 4 modes or cutoff above 12
unless explicitly overridden; beyond that it is the wrong tool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coherent import CoherentSuperposition
from .topology import NetworkTopology

__all__ = [
    "FockDensity",
    "StepSizeError",
    "encode_coherent",
    "lindblad_evolve",
    "lindblad_scan",
    "partial_trace",
    "fock_overlap",
]

MAX_MODES = 4
MAX_CUTOFF = 12
STEP_NORM_BOUND = 0.05
TRACE_DRIFT_TOL = 1e-8
TRUNCATION_TOL = 1e-6


class StepSizeError(RuntimeError):
    """Trace drift exceeded tolerance during fixed-step integration."""


@dataclass
class FockDensity:
    """Density matrix over the truncated product number basis.

    cutoff is the per-mode dimension d (occupations 0..d-1); `matrix`
    has shape (d**n_modes, d**n_modes).
    """

    cutoff: int
    n_modes: int
    matrix: np.ndarray
    truncation_defect: float = field(default=0.0)

    @property
    def dim(self) -> int:
        return self.cutoff**self.n_modes

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def validate(self, check_positivity: bool = False):
        """Assert Hermiticity, unit trace and (optionally) positivity."""
        h_err = np.abs(self.matrix - self.matrix.conj().T).max()
        if h_err > 1e-12:
            raise ValueError(f"density matrix not Hermitian (max dev {h_err:.3e})")
        t_err = abs(self.trace() - 1.0)
        if t_err > 1e-8:
            raise ValueError(f"density matrix trace off by {t_err:.3e}")
        if check_positivity:
            lo = float(np.linalg.eigvalsh(self.matrix).min())
            if lo < -1e-8:
                raise ValueError(f"density matrix has eigenvalue {lo:.3e}")


def _lowering(d: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1.0, d)), 1, format="csr")


def _mode_op(op: sp.spmatrix, mode: int, n_modes: int, d: int) -> sp.csr_matrix:
    """Embed a single-mode operator at `mode` (0-based), mode 0 slowest."""
    out = sp.identity(1, format="csr")
    eye = sp.identity(d, format="csr")
    for m in range(n_modes):
        out = sp.kron(out, op if m == mode else eye, format="csr")
    return out


def coherent_vector(alpha: complex, d: int):
    """Truncated coherent state; returns (vector, tail weight beyond d-1)."""
    v = np.empty(d, dtype=complex)
    v[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for k in range(1, d):
        v[k] = v[k - 1] * alpha / math.sqrt(k)
    tail = max(0.0, 1.0 - float(np.vdot(v, v).real))
    return v, tail


def encode_coherent(state: CoherentSuperposition, cutoff: int) -> FockDensity:
    """Density matrix of a coherent superposition in the truncated basis.

    The truncated state is renormalized; the dropped weight is recorded
    as truncation_defect and must stay below 1e-6.
    """
    n_modes = state.n_modes
    _check_size(n_modes, cutoff, allow_large=False)
    vectors = []
    worst_tail = 0.0
    for r in range(state.n_branches):
        v = np.ones(1, dtype=complex)
        for m in range(n_modes):
            vm, tail = coherent_vector(state.betas[r, m], cutoff)
            worst_tail = max(worst_tail, tail)
            v = np.kron(v, vm)
        vectors.append(v)
    psi = np.zeros(cutoff**n_modes, dtype=complex)
    for lam, v in zip(state.lambdas, vectors):
        psi += lam * v
    rho = state.norm**2 * np.outer(psi, psi.conj())
    tr = float(np.trace(rho).real)
    defect = abs(1.0 - tr)
    if defect > TRUNCATION_TOL:
        raise ValueError(
            f"truncation defect {defect:.3e} exceeds {TRUNCATION_TOL:g}; "
            f"increase the cutoff (worst per-mode tail {worst_tail:.3e}) or "
            "use smaller amplitudes"
        )
    rho /= tr
    return FockDensity(cutoff=cutoff, n_modes=n_modes, matrix=rho,
                       truncation_defect=defect)


def _check_size(n_modes: int, cutoff: int, allow_large: bool):
    if allow_large:
        return
    if n_modes > MAX_MODES or cutoff > MAX_CUTOFF:
        raise ValueError(
            f"oracle refuses n_modes={n_modes}, cutoff={cutoff} "
            f"(limits {MAX_MODES}, {MAX_CUTOFF}); pass allow_large=True only "
            "if you accept the cost"
        )


class _Integrator:
    """Fixed-step RK4 stepper for the network Lindbladian."""

    def __init__(self, topology: NetworkTopology, cutoff: int):
        gamma = topology.gamma
        if np.any(gamma - np.diag(np.diag(gamma))):
            raise ValueError("oracle handles diagonal (Markovian) damping only")
        self.d = cutoff
        self.nm = topology.n
        d, nm = cutoff, topology.n
        dim = d**nm
        self.dim = dim

        h_op = sp.csr_matrix((dim, dim), dtype=complex)
        lower = _lowering(d)
        num = (lower.conj().T @ lower).tocsr()
        mode_lower = [_mode_op(lower, m, nm, d) for m in range(nm)]
        mode_num = [_mode_op(num, m, nm, d) for m in range(nm)]
        for m in range(nm):
            h_op = h_op + topology.omega[m] * mode_num[m]
        for m in range(nm):
            for n in range(m + 1, nm):
                lam = topology.coupling[m, n]
                if lam != 0.0:
                    hop = mode_lower[m].conj().T @ mode_lower[n]
                    h_op = h_op + lam * (hop + hop.conj().T)
        rates = np.diag(gamma).copy()
        k_eff = h_op.astype(complex)
        for m in range(nm):
            if rates[m] != 0.0:
                k_eff = k_eff - 0.5j * rates[m] * mode_num[m]
        self.m_drift = (-1j * k_eff).tocsr()
        self.damped = [(m, rates[m]) for m in range(nm) if rates[m] != 0.0]
        self.sq = np.sqrt(np.arange(1.0, d))

        self._ws1 = np.empty((dim, dim), dtype=complex)
        self._ws2 = np.empty((dim, dim), dtype=complex)
        self._k = [np.empty((dim, dim), dtype=complex) for _ in range(4)]
        self._stage = np.empty((dim, dim), dtype=complex)

    def _shift_rows(self, x, mode, weight, out):
        """out = weight * (a_mode x): row-side lowering shift."""
        d, nm, dim = self.d, self.nm, self.dim
        xv = np.moveaxis(x.reshape((d,) * nm + (dim,)), mode, 0)
        ov = np.moveaxis(out.reshape((d,) * nm + (dim,)), mode, 0)
        w = (weight * self.sq).reshape((d - 1,) + (1,) * nm)
        ov[:-1] = w * xv[1:]
        ov[-1] = 0.0

    def _shift_cols(self, x, mode, out):
        """out = x a_mode^+: column-side shift."""
        d, nm, dim = self.d, self.nm, self.dim
        xv = np.moveaxis(x.reshape((dim,) + (d,) * nm), 1 + mode, 0)
        ov = np.moveaxis(out.reshape((dim,) + (d,) * nm), 1 + mode, 0)
        w = self.sq.reshape((d - 1,) + (1,) * nm)
        ov[:-1] = w * xv[1:]
        ov[-1] = 0.0

    def rhs(self, rho, out):
        """out = L(rho); rho must be Hermitian (stages preserve this)."""
        b = self.m_drift @ rho
        np.conjugate(b, out=self._ws1)
        np.add(b, self._ws1.T, out=out)
        for mode, rate in self.damped:
            self._shift_rows(rho, mode, rate, self._ws1)
            self._shift_cols(self._ws1, mode, self._ws2)
            out += self._ws2
        return out

    def generator_norm(self, iterations: int = 12) -> float:
        rng = np.random.default_rng(0x5EED)
        v = rng.standard_normal((self.dim, self.dim))
        v = v + 1j * rng.standard_normal((self.dim, self.dim))
        v = v + v.conj().T
        v /= np.linalg.norm(v)
        w = np.empty_like(v)
        nrm = 1.0
        for _ in range(iterations):
            self.rhs(v, w)
            nrm = float(np.linalg.norm(w))
            if nrm == 0.0:
                return 0.0
            np.divide(w, nrm, out=v)
        return nrm

    def step_count(self, span: float, norm: float) -> int:
        if span <= 0.0:
            return 0
        return max(1, int(math.ceil(span * norm / STEP_NORM_BOUND)))

    def integrate(self, rho, span: float, norm: float):
        """Advance rho in place over `span` with RK4 steps."""
        steps = self.step_count(span, norm)
        if steps == 0:
            return rho
        h = span / steps
        k1, k2, k3, k4 = self._k
        stage = self._stage
        for _ in range(steps):
            self.rhs(rho, k1)
            np.multiply(k1, 0.5 * h, out=stage)
            stage += rho
            self.rhs(stage, k2)
            np.multiply(k2, 0.5 * h, out=stage)
            stage += rho
            self.rhs(stage, k3)
            np.multiply(k3, h, out=stage)
            stage += rho
            self.rhs(stage, k4)
            k2 += k3
            k2 *= 2.0
            k1 += k4
            k1 += k2
            k1 *= h / 6.0
            rho += k1
        return rho


def lindblad_evolve(rho: FockDensity, topology: NetworkTopology, t: float,
                    allow_large: bool = False) -> FockDensity:
    """Integrate the master equation from 0 to t.

    Fixed-step RK4 with ||step * L|| <= 0.05; raises StepSizeError if
    the trace drifts by more than 1e-8 over the run.
    """
    _check_size(rho.n_modes, rho.cutoff, allow_large)
    if topology.n != rho.n_modes:
        raise ValueError(
            f"topology has {topology.n} modes, state {rho.n_modes}"
        )
    integ = _Integrator(topology, rho.cutoff)
    norm = integ.generator_norm()
    out = rho.matrix.astype(complex).copy()
    tr0 = float(np.trace(out).real)
    integ.integrate(out, float(t), norm)
    drift = abs(float(np.trace(out).real) - tr0)
    if drift > TRACE_DRIFT_TOL:
        raise StepSizeError(
            f"trace drifted by {drift:.3e} (> {TRACE_DRIFT_TOL:g}); "
            "the step bound was insufficient for this generator"
        )
    return FockDensity(rho.cutoff, rho.n_modes, out,
                       truncation_defect=rho.truncation_defect)


def lindblad_scan(rho: FockDensity, topology: NetworkTopology, taus, probe,
                  allow_large: bool = False):
    """Integrate once through an ascending tau grid, probing at each point.

    `probe(matrix)` is called with the current density matrix at every
    grid time (a live buffer: copy it if it must survive).  Returns the
    list of probe results and the final FockDensity.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(np.diff(taus) < 0) or (len(taus) and taus[0] < 0):
        raise ValueError("taus must be ascending and non-negative")
    _check_size(rho.n_modes, rho.cutoff, allow_large)
    integ = _Integrator(topology, rho.cutoff)
    norm = integ.generator_norm()
    out = rho.matrix.astype(complex).copy()
    tr0 = float(np.trace(out).real)
    results = []
    t_prev = 0.0
    for t in taus:
        integ.integrate(out, t - t_prev, norm)
        t_prev = t
        results.append(probe(out))
    drift = abs(float(np.trace(out).real) - tr0)
    if drift > TRACE_DRIFT_TOL:
        raise StepSizeError(
            f"trace drifted by {drift:.3e} (> {TRACE_DRIFT_TOL:g}) over the scan"
        )
    return results, FockDensity(rho.cutoff, rho.n_modes, out,
                                truncation_defect=rho.truncation_defect)


def partial_trace(state: FockDensity, mode: int) -> FockDensity:
    """Reduced single-mode density matrix (`mode` is 1-based)."""
    if not 1 <= mode <= state.n_modes:
        raise ValueError(f"mode {mode} outside 1..{state.n_modes}")
    d, nm = state.cutoff, state.n_modes
    if nm == 1:
        return FockDensity(d, 1, state.matrix.copy(),
                           truncation_defect=state.truncation_defect)
    t = state.matrix.reshape((d,) * (2 * nm))
    keep = mode - 1
    # contract every mode pair except `keep`
    for m in reversed(range(nm)):
        if m == keep:
            continue
        row_axis = m
        col_axis = m + t.ndim // 2
        t = np.trace(t, axis1=row_axis, axis2=col_axis)
    return FockDensity(d, 1, np.ascontiguousarray(t),
                       truncation_defect=state.truncation_defect)


def fock_overlap(a: FockDensity, b: FockDensity) -> float:
    """Tr[rho_a rho_b] by direct contraction."""
    if a.matrix.shape != b.matrix.shape:
        raise ValueError("states live on different truncated spaces")
    total = complex(np.sum(a.matrix * b.matrix.T))
    if abs(total.imag) > 1e-8:
        raise ValueError(f"overlap has imaginary part {total.imag:.3e}")
    return float(total.real)
