"""State-transfer criteria, exchange times and probability curves.

The transfer of the sender's state (oscillator 1) to the receiver
(oscillator N) is read off the propagator corner Theta_{N1}(tau).  For
detuned (tunneling) chains that corner factorizes into a fast carrier
at roughly the sender frequency and a slow envelope whose first maximum
defines the exchange time; the numeric search therefore scans the
envelope |Theta_{N1}| on a grid resolving only the dominant eigenvalue
splittings, then refines the peak by golden section.

Exchange times are also available through two independent routes:

* spectral root conditions on the eigensystem of the ideal Hamiltonian
  (the sin-sum must vanish while the cos-sum reaches +-1), and
* closed-form scaling laws for small tunneling chains,
  tau_ex ~ pi/(2 eps^(N-3) mu^(N-2)) with a second-order correction
  {1 + [(N-1) + B eta^2 - (N-3) eps^2] mu^2}, B = sum_{m=1}^{N-2} m.

Transfer and recurrence probabilities are trace overlaps of reduced
states, p_ex = Tr[rho_1(0) rho_N(tau)] and p_rec = Tr[rho_1(0)
rho_1(tau)].  Because a cat state's overlap is sharply phase-sensitive,
raw samples of p oscillate at the carrier frequency; envelope-mode
curves report the local maximum of p over one carrier period around
each grid point (the top of the oscillation band), which is the smooth
quantity the long-horizon sweeps track.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .coherent import (
    CoherentSuperposition,
    OverlapConsistencyError,
    _branch_gram_exponents,
    _fsum_complex,
    initial_reduced,
    overlap_exponent,
)
from .phases import reduced_phase
from .propagator import (
    NearDefectiveError,
    Propagator,
    SpectralDecomposition,
    corner_series,
    decompose,
    entry_values,
    evolve_grid,
    theta_at,
)
from .topology import DissipativeGenerator, NetworkTopology, ScaledParams, build_general

__all__ = [
    "PermutationTarget",
    "PstCheck",
    "TransferCurve",
    "ExchangeReport",
    "NoTransferInWindow",
    "RegimeWarning",
    "ExtrapolationWarning",
    "commutator_residual",
    "check_pst_target",
    "exchange_time_numeric",
    "exchange_time_spectral",
    "analytic_tau_ex",
    "effective_coupling",
    "perturbative_theta4",
    "transfer_curve",
    "peak_probability",
    "network_overlap",
    "explicit_transfer_probability",
]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class RegimeWarning(UserWarning):
    """Perturbative regime assumptions (mu, eta small) are violated."""


class ExtrapolationWarning(UserWarning):
    """Scaling law used outside the small-N range it was derived for."""


class NoTransferInWindow(RuntimeError):
    """No envelope peak above threshold in the scan window.

    Carries the best candidate found (an ExchangeReport or None).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class PermutationTarget:
    """0/1 permutation matrix a propagator should reduce to.

    corner_only restricts the check to the (1,N)/(N,1) corners plus the
    rest of the first and last rows; the interior block is then free.
    """

    matrix: np.ndarray
    corner_only: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("target must be square")
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("target entries must be 0 or 1")
        if np.any(m.sum(axis=0) != 1) or np.any(m.sum(axis=1) != 1):
            raise ValueError("target must have exactly one 1 per row and column")
        if self.corner_only and (m[0, -1] != 1 or m[-1, 0] != 1):
            raise ValueError("corner mode requires 1s at (1,N) and (N,1)")
        object.__setattr__(self, "matrix", m.astype(float))

    @classmethod
    def corners(cls, n: int) -> "PermutationTarget":
        return cls(np.eye(n)[::-1], corner_only=True)

    @classmethod
    def anti_diagonal(cls, n: int) -> "PermutationTarget":
        return cls(np.eye(n)[::-1], corner_only=False)


@dataclass(frozen=True)
class PstCheck:
    """Outcome of a transfer-target check with per-entry deviations."""

    passed: bool
    deviations: np.ndarray


@dataclass(frozen=True)
class TransferCurve:
    """Sampled exchange/recurrence probabilities with precision flags."""

    taus: np.ndarray
    p_ex: np.ndarray
    p_rec: np.ndarray
    precise: np.ndarray


@dataclass(frozen=True)
class ExchangeReport:
    tau_ex: float
    peak_p: float
    theta_corner: complex
    method: str


def _spectral(source) -> SpectralDecomposition:
    if isinstance(source, SpectralDecomposition):
        return source
    if isinstance(source, DissipativeGenerator):
        return decompose(source)
    raise TypeError(
        f"expected DissipativeGenerator or SpectralDecomposition, got {type(source)}"
    )


def _theta_auto(source, tau: float) -> Propagator:
    """Spectral path when the decomposition is healthy, expm otherwise."""
    if isinstance(source, Propagator):
        return source
    if isinstance(source, SpectralDecomposition):
        return theta_at(source, tau)
    try:
        return theta_at(decompose(source), tau)
    except NearDefectiveError:
        return theta_at(source, tau)


def commutator_residual(theta, gen: DissipativeGenerator) -> float:
    """||Theta H^D - H^D Theta||_F / ||H^D||_F.

    Accepts a Propagator or a plain matrix (e.g. a permutation target);
    for any Theta that is a function of H^D this is a rounding-level
    sanity probe, while for user-supplied targets it realizes the
    commutation criterion for transfer-compatible topologies.
    """
    t = theta.matrix if isinstance(theta, Propagator) else np.asarray(theta)
    h = gen.matrix
    if t.shape != h.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {h.shape}")
    return float(np.linalg.norm(t @ h - h @ t) / np.linalg.norm(h))


def check_pst_target(source, tau: float, target: PermutationTarget,
                     tol: float) -> PstCheck:
    """Does Theta(tau) realize the target permutation up to phases?

    Corner mode constrains |Theta| on the first and last rows only
    (corners to 1, the rest of those rows to 0); full mode constrains
    every entry's magnitude against the permutation.  Unconstrained
    entries report deviation 0.
    """
    theta = _theta_auto(source, tau)
    a = np.abs(theta.matrix)
    n = a.shape[0]
    dev = np.zeros_like(a)
    if target.corner_only:
        for row in (0, n - 1):
            for col in range(n):
                want = target.matrix[row, col]
                dev[row, col] = abs(a[row, col] - want)
    else:
        dev = np.abs(a - target.matrix)
    return PstCheck(passed=bool(np.all(dev <= tol)), deviations=dev)


def _golden_max(f, a: float, b: float, xtol: float):
    """Golden-section maximum of f on [a, b]; ties resolve to smaller x."""
    # never demand an interval below the local floating-point spacing
    xtol = max(xtol, 8.0 * np.finfo(float).eps * max(abs(a), abs(b), 1.0))
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _corner_band(sd: SpectralDecomposition, row: int, col: int,
                 rel_floor: float = 1e-3):
    """Dominant spectral content of one propagator entry.

    Returns (coefficients, spread, carrier) where spread is the widest
    eigenfrequency gap among dominant coefficients (the envelope band)
    and carrier the magnitude-weighted mean eigenfrequency (the fast
    phase rate factored out by demodulation).
    """
    c = corner_series(sd, row, col)
    mags = np.abs(c)
    top = mags.max()
    if top == 0.0:
        raise NoTransferInWindow(
            f"entry ({row + 1},{col + 1}) of Theta is identically zero"
        )
    dom = mags >= rel_floor * top
    imw = sd.eigenvalues.imag[dom]
    spread = float(imw.max() - imw.min())
    carrier = float(np.sum(mags[dom] * imw) / np.sum(mags[dom]))
    return c, spread, carrier


def exchange_time_numeric(source, window, refine_tol: float = 1e-6,
                          row: int | None = None, col: int = 0,
                          samples_per_beat: int = 32,
                          min_samples: int = 64) -> ExchangeReport:
    """First envelope maximum of |Theta_{N1}|^2 in the scan window.

    Two stages: a coarse scan of the demodulated envelope on a grid
    whose step resolves the dominant eigenvalue splittings (the slow
    beat), then golden-section refinement with relative tolerance
    refine_tol, ties toward smaller tau.  Raises NoTransferInWindow
    (carrying the best candidate) when no peak reaches 0.5.
    """
    sd = _spectral(source)
    lo, hi = float(window[0]), float(window[1])
    if not (np.isfinite(hi) and hi > lo >= 0.0):
        raise ValueError(f"bad scan window ({lo}, {hi})")
    r = sd.n - 1 if row is None else row
    c, spread, _ = _corner_band(sd, r, col)
    if spread <= 0.0:
        raise NoTransferInWindow(
            "corner entry has a single dominant frequency; no transfer beat"
        )
    step = min(np.pi / (samples_per_beat * spread), (hi - lo) / min_samples)
    n_samples = int(np.ceil((hi - lo) / step)) + 1
    if n_samples > 2_000_000:
        n_samples = 2_000_000
        warnings.warn(
            "scan window spans too many beats; envelope grid capped at 2e6 "
            "samples",
            stacklevel=2,
        )
    taus = np.linspace(lo, hi, n_samples)
    vals, _ = entry_values(sd, r, col, taus)
    env = np.abs(vals)

    def env_at(t: float) -> float:
        v, _ = entry_values(sd, r, col, [t])
        return float(np.abs(v[0]))

    best: ExchangeReport | None = None
    interior = (env[1:-1] >= env[:-2]) & (env[1:-1] >= env[2:])
    candidates = list(np.nonzero(interior)[0] + 1)
    if not candidates:
        # monotone envelope in the window: refine around the best sample
        candidates = [int(np.clip(np.argmax(env), 1, len(taus) - 2))]
    for j in candidates:
        xtol = refine_tol * max(abs(taus[j]), 1.0)
        t_pk, e_pk = _golden_max(env_at, taus[j - 1], taus[j + 1], xtol)
        corner_val, _ = entry_values(sd, r, col, [t_pk])
        report = ExchangeReport(tau_ex=float(t_pk), peak_p=float(e_pk**2),
                                theta_corner=complex(corner_val[0]),
                                method="numeric-peak")
        if report.peak_p >= 0.5:
            return report
        if best is None or report.peak_p > best.peak_p:
            best = report
    raise NoTransferInWindow(
        f"no envelope peak with |Theta|^2 >= 0.5 in ({lo:g}, {hi:g})", best=best
    )


def exchange_time_spectral(topology: NetworkTopology, window,
                           tol: float = 1e-6) -> ExchangeReport:
    """Exchange time of an ideal network from its eigensystem.

    Finds the smallest tau in the window where the sin-sum
    sum_m C_{Nm} sin(R_m tau) C^{-1}_{m1} vanishes while the cos-sum
    reaches +-1 within tol.  Roots are bracketed only around envelope
    peaks tall enough to satisfy the cos condition, which keeps the
    search tractable on detuned chains whose carrier oscillates many
    orders of magnitude faster than the envelope.
    """
    if not topology.ideal:
        raise ValueError("spectral exchange conditions require gamma = 0")
    sd = decompose(build_general(topology))
    n = sd.n
    c, spread, carrier = _corner_band(sd, n - 1, 0)
    lo, hi = float(window[0]), float(window[1])

    def corner_at(t):
        v, _ = entry_values(sd, n - 1, 0, [t])
        return complex(v[0])

    def sin_sum(t: float) -> float:
        return -corner_at(t).imag

    # fast rate bounding the spacing of sin-sum zeros
    imw = sd.eigenvalues.imag
    dom = np.abs(c) >= 1e-3 * np.abs(c).max()
    nu = max(abs(carrier), spread / 2.0, float(np.abs(imw[dom]).max()) * 1e-3)

    step = min(np.pi / (32 * spread), (hi - lo) / 64) if spread > 0 else (hi - lo) / 64
    taus = np.linspace(lo, hi, int(np.ceil((hi - lo) / step)) + 1)
    vals, _ = entry_values(sd, n - 1, 0, taus)
    env = np.abs(vals)
    interior = (env[1:-1] >= env[:-2]) & (env[1:-1] >= env[2:])
    for j in np.nonzero(interior)[0] + 1:
        t_pk, e_pk = _golden_max(
            lambda t: abs(corner_at(t)), taus[j - 1], taus[j + 1],
            1e-9 * max(abs(taus[j]), 1.0),
        )
        if e_pk < 1.0 - 2.0 * tol:
            continue
        half = np.pi / nu
        tt = np.linspace(max(lo, t_pk - 2 * half), min(hi, t_pk + 2 * half), 257)
        g = np.array([sin_sum(t) for t in tt])
        roots = []
        for i in range(len(tt) - 1):
            if g[i] == 0.0:
                roots.append(tt[i])
            elif g[i] * g[i + 1] < 0:
                roots.append(brentq(sin_sum, tt[i], tt[i + 1],
                                    xtol=1e-14 * max(abs(t_pk), 1.0)))
        matches = [t for t in sorted(roots)
                   if abs(abs(corner_at(t).real) - 1.0) <= tol]
        if matches:
            t_ex = matches[0]
            val = corner_at(t_ex)
            return ExchangeReport(tau_ex=float(t_ex), peak_p=float(abs(val) ** 2),
                                  theta_corner=val, method="spectral")
    raise NoTransferInWindow(
        f"no tau in ({lo:g}, {hi:g}) satisfies the sin/cos exchange conditions "
        f"within tol {tol:g}"
    )


def analytic_tau_ex(n: int, params: ScaledParams, epsilon: float) -> float:
    """Closed-form scaled exchange time of a tunneling chain.

    Leading order pi/(2 eps^(N-3) mu^(N-2)) with the second-order
    correction factor {1 + [(N-1) + B eta^2 - (N-3) eps^2] mu^2},
    B = (N-2)(N-1)/2.  Derived for N = 3..6; larger N extrapolates the
    same law (warned), where the numeric search stays authoritative.
    """
    if n < 3:
        raise ValueError("scaling law needs at least one transmitter (n >= 3)")
    if n > 6:
        warnings.warn(
            f"scaling law extrapolated to N={n}; treat the numeric search "
            "as authoritative",
            ExtrapolationWarning,
            stacklevel=2,
        )
    if not (params.mu_small and params.eta_small):
        warnings.warn(
            f"outside the tunneling regime (mu={params.mu:g}, eta={params.eta:g}); "
            "scaling law unreliable",
            RegimeWarning,
            stacklevel=2,
        )
    mu, eta = params.mu, params.eta
    a_coef = n - 1
    b_coef = (n - 2) * (n - 1) / 2.0
    c_coef = n - 3
    lead = np.pi / (2.0 * epsilon ** (n - 3) * mu ** (n - 2))
    return float(lead * (1.0 + (a_coef + b_coef * eta**2 - c_coef * epsilon**2) * mu**2))


def effective_coupling(n: int, params: ScaledParams, epsilon: float) -> float:
    """lambda_eff = pi/(2 tau_ex) in units of the end coupling.

    For n = 2 this is the bare coupling, 1.  Note the convention gap for
    n = 3: pi/(2 tau_ex) gives mu, while the textual effective coupling
    2*mu*lambda pairs with the same tau_ex = pi/(2 mu); this function
    always returns pi/(2 tau_ex).
    """
    if n == 2:
        return 1.0
    return float(np.pi / (2.0 * analytic_tau_ex(n, params, epsilon)))


def _cis(rate: float, tau: float) -> complex:
    """exp(-i * rate * tau) with compensated phase reduction."""
    phi = reduced_phase(rate, tau)
    return complex(np.cos(phi), -np.sin(phi))


def _osc(split: complex, tau: float):
    """cos / sin of (split * tau) for a complex splitting rate."""
    x = reduced_phase(split.real, tau)
    y = split.imag * tau
    cos_v = np.cos(x) * np.cosh(y) - 1j * np.sin(x) * np.sinh(y)
    sin_v = np.sin(x) * np.cosh(y) + 1j * np.cos(x) * np.sinh(y)
    return cos_v, sin_v


def perturbative_theta4(params: ScaledParams, epsilon: float,
                        tau: float) -> Propagator:
    """Second-order tunneling propagator of the N = 4 chain.

    The mirror-symmetric chain splits into two detuned two-level
    sectors with complex detunings 1/mu +- eps - i*eta/2.  To second
    order in mu the propagator keeps unit weight on the hybridized
    levels and an O(mu) interference amplitude between them:

    * slow (end-mode) sector: corner oscillation sin/cos(s*tau) at the
      tunneling half-splitting s ~ eps*mu^2/(1-(eps*mu)^2), under the
      global prefactor e^{-i(varpi - shift) tau} e^{-eta mu^2 tau / 2}
      (amplitude damping is half the transmitter energy decay rate,
      diluted by the mu^2 transmitter admixture);
    * fast (transmitter) sector: h_c/h_s response decaying at eta/2 and
      oscillating at the detuning plus level repulsion, split by ~eps;
    * interference g = mu (slow - h) on the sender-transmitter entries.

    Level shifts and splittings are taken from the sector eigenvalues,
    so the residual against the exact propagator is the O(mu^2) weight
    truncation, uniformly over a full exchange period.
    """
    mu, eta, varpi = params.mu, params.eta, params.varpi
    d_even = 1.0 / mu + epsilon - 0.5j * eta
    d_odd = 1.0 / mu - epsilon - 0.5j * eta
    root_e = np.sqrt(d_even**2 + 4.0)
    root_o = np.sqrt(d_odd**2 + 4.0)
    slow_e = varpi + 0.5 * (d_even - root_e)
    slow_o = varpi + 0.5 * (d_odd - root_o)
    fast_e = varpi + 0.5 * (d_even + root_e)
    fast_o = varpi + 0.5 * (d_odd + root_o)

    center_slow = 0.5 * (slow_e + slow_o)
    half_split_slow = 0.5 * (slow_e - slow_o)
    center_fast = 0.5 * (fast_e + fast_o)
    half_split_fast = 0.5 * (fast_e - fast_o)

    prefactor = _cis(center_slow.real, tau) * math.exp(
        min(center_slow.imag * tau, 0.0))
    cos_s, sin_s = _osc(half_split_slow, tau)

    rel = center_fast - center_slow
    decay = rel.imag * tau          # <= 0, transmitter decay eta/2
    h_pref = (_cis(rel.real, tau) * math.exp(decay)) if decay > -700 else 0.0
    cos_f, sin_f = _osc(half_split_fast, tau)
    h_c = h_pref * cos_f
    h_s = h_pref * sin_f
    g_c = mu * (cos_s - h_c)
    g_s = mu * (sin_s - h_s)
    matrix = np.array(
        [
            [cos_s, -g_c, 1j * g_s, -1j * sin_s],
            [-g_c, h_c, -1j * h_s, 1j * g_s],
            [1j * g_s, -1j * h_s, h_c, -g_c],
            [-1j * sin_s, 1j * g_s, -g_c, cos_s],
        ],
        dtype=complex,
    )
    return Propagator(time=float(tau), matrix=prefactor * matrix)


class _CurveEngine:
    """Vectorized p_ex/p_rec evaluation over tau batches."""

    def __init__(self, sd: SpectralDecomposition,
                 initial: CoherentSuperposition,
                 sender: int = 1, receiver: int | None = None):
        if initial.n_modes != sd.n:
            raise ValueError(
                f"state has {initial.n_modes} modes, network {sd.n}"
            )
        if initial.n_branches > 16:
            warnings.warn(
                f"sweeping {initial.n_branches} branches costs O(Q^4) per "
                "sample; expect slow curves",
                stacklevel=3,
            )
        self.sd = sd
        self.initial = initial
        self.sender = sender
        self.receiver = sd.n if receiver is None else receiver
        red0 = initial_reduced(initial, sender)
        self.w0 = red0.weights                      # (Q, Q)
        self.u = red0.amplitudes                    # (Q,)
        self.g_beta = _branch_gram_exponents(initial.betas)
        self.pref = (initial.norm**2
                     * initial.lambdas[:, None] * np.conj(initial.lambdas)[None, :])

    def probabilities(self, taus):
        """(p_ex, p_rec, precise) at each tau."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        z, precise = evolve_grid(self.sd, self.initial.betas, taus)
        p_ex = self._overlap_with_initial(z[:, :, self.receiver - 1])
        p_rec = self._overlap_with_initial(z[:, :, self.sender - 1])
        return p_ex, p_rec, precise

    def _overlap_with_initial(self, x):
        """Tr[rho_1(0) rho_m(tau)] for batched mode amplitudes x (T, Q)."""
        u = self.u
        # evolved-side reduced weights: pref * exp(g_beta - g_mode), with
        # g_mode[t, p, q] = -|x_q|^2/2 - |x_p|^2/2 + conj(x_q) x_p
        g_mode = (-0.5 * np.abs(x[:, :, None]) ** 2
                  - 0.5 * np.abs(x[:, None, :]) ** 2
                  + np.conj(x[:, None, :]) * x[:, :, None])
        # coherent cross overlaps with the initial reduced amplitudes
        sm_a = (-0.5 * np.abs(u[None, :, None]) ** 2
                - 0.5 * np.abs(x[:, None, :]) ** 2
                + np.conj(u[None, :, None]) * x[:, None, :])   # [t, s, p]
        sm_b = (-0.5 * np.abs(x[:, :, None]) ** 2
                - 0.5 * np.abs(u[None, None, :]) ** 2
                + np.conj(x[:, :, None]) * u[None, None, :])   # [t, q, r]
        expo = (self.g_beta[None, None, None, :, :]
                - g_mode[:, None, None, :, :]
                + sm_a[:, None, :, :, None]
                + sm_b.transpose(0, 2, 1)[:, :, None, None, :]
                )
        # axes: [t, r, s, p, q]
        terms = (self.w0[None, :, :, None, None]
                 * self.pref[None, None, None, :, :]
                 * np.exp(expo))
        total = terms.sum(axis=(1, 2, 3, 4))
        bad = np.abs(total.imag) > 1e-8
        if np.any(bad):
            raise OverlapConsistencyError(
                f"overlap imaginary residue up to {np.abs(total.imag).max():.3e}"
            )
        return total.real

    def carrier_period(self, probe_mode: int) -> float:
        _, spread, carrier = _corner_band(self.sd, probe_mode - 1, self.sender - 1)
        nu = max(abs(carrier), spread / 2.0)
        if nu <= 0.0:
            return np.inf
        return 2.0 * np.pi / nu


def transfer_curve(source, initial: CoherentSuperposition, taus,
                   mode: str = "raw", sender: int = 1,
                   receiver: int | None = None) -> TransferCurve:
    """p_ex and p_rec on a tau grid.

    mode='raw' samples the probabilities exactly at the grid points;
    mode='envelope' reports, for each grid point, the local maximum of p
    over one carrier period around it (coarse 512-point scan plus
    parabolic refinement), tracking the top of the fast oscillation
    band.
    """
    sd = _spectral(source)
    engine = _CurveEngine(sd, initial, sender, receiver)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if mode == "raw":
        p_ex, p_rec, precise = engine.probabilities(taus)
        return TransferCurve(taus, p_ex, p_rec, precise)
    if mode != "envelope":
        raise ValueError(f"unknown curve mode {mode!r}")

    period_ex = engine.carrier_period(engine.receiver)
    period_rec = engine.carrier_period(engine.sender)
    p_ex = np.empty_like(taus)
    p_rec = np.empty_like(taus)
    precise = np.empty(taus.shape, dtype=bool)
    for i, t in enumerate(taus):
        p_ex[i], ok1 = _local_band_max(engine, t, period_ex, which="ex")
        p_rec[i], ok2 = _local_band_max(engine, t, period_rec, which="rec")
        precise[i] = ok1 and ok2
    return TransferCurve(taus, p_ex, p_rec, precise)


def _local_band_max(engine: _CurveEngine, tau: float, period: float,
                    which: str, n_coarse: int = 512):
    """Max of p over one carrier period around tau (parabolic refinement)."""
    if not np.isfinite(period):
        p_ex, p_rec, precise = engine.probabilities([tau])
        return (p_ex[0] if which == "ex" else p_rec[0]), bool(precise[0])
    ts = tau + np.linspace(-0.25 * period, 0.25 * period, n_coarse)
    ts = ts[ts >= 0.0]
    p_ex, p_rec, precise = engine.probabilities(ts)
    p = p_ex if which == "ex" else p_rec
    j = int(np.argmax(p))
    if 0 < j < len(ts) - 1:
        # parabola through the top three samples
        y0, y1, y2 = p[j - 1], p[j], p[j + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            shift = 0.5 * (y0 - y2) / denom
            t_v = ts[j] + shift * (ts[1] - ts[0])
            pe, pr, _ = engine.probabilities([t_v])
            pv = pe[0] if which == "ex" else pr[0]
            if pv > p[j]:
                return float(pv), bool(precise[j])
    return float(p[j]), bool(precise[j])


def peak_probability(source, initial: CoherentSuperposition, around: float,
                     probe_mode: int | None = None, sender: int = 1,
                     span_periods: float = 1.0):
    """Precise local maximum of p near a candidate time.

    Scans one carrier period (times span_periods) centered on `around`
    and refines with golden section; returns (tau_peak, p_peak).  Used
    to evaluate the true transfer fidelity at an exchange or recurrence
    time, where the phase-sensitive cat overlap must be aligned to the
    carrier rather than sampled blindly.
    """
    sd = _spectral(source)
    engine = _CurveEngine(sd, initial, sender)
    probe = engine.receiver if probe_mode is None else probe_mode
    period = engine.carrier_period(probe)
    if not np.isfinite(period):
        period = max(abs(around) * 1e-3, 1.0)

    def p_at(t):
        z, _ = evolve_grid(engine.sd, engine.initial.betas, [t])
        return float(engine._overlap_with_initial(z[:, :, probe - 1])[0])

    # alignment instants of the cat phase repeat every half carrier
    # period (a +-1 corner is equally good), so a window of that width
    # around the candidate stays on the local envelope lobe
    half = 0.25 * span_periods * period
    ts = around + np.linspace(-half, half, 512)
    ts = ts[ts >= 0.0]
    z, _ = evolve_grid(engine.sd, engine.initial.betas, ts)
    p = engine._overlap_with_initial(z[:, :, probe - 1])
    j = int(np.argmax(p))
    a = ts[max(j - 1, 0)]
    b = ts[min(j + 1, len(ts) - 1)]
    xtol = period * 1e-9
    t_pk, p_pk = _golden_max(p_at, a, b, xtol)
    return float(t_pk), float(p_pk)


def network_overlap(initial: CoherentSuperposition, evolved) -> float:
    """Full-network Tr[rho(0) rho(tau)] over all branch quadruples."""
    lam = initial.lambdas
    betas = initial.betas
    zetas = evolved.zetas
    if betas.shape != zetas.shape:
        raise ValueError("initial and evolved states differ in shape")
    q = len(lam)
    g_beta = _branch_gram_exponents(betas)
    g_zeta = _branch_gram_exponents(zetas)
    g_bz = np.empty((q, q), dtype=complex)   # log <{beta^s}|{zeta^p}>
    g_zb = np.empty((q, q), dtype=complex)   # log <{zeta^q}|{beta^r}>
    for i in range(q):
        for j in range(q):
            g_bz[i, j] = overlap_exponent(betas[i], zetas[j])
            g_zb[i, j] = overlap_exponent(zetas[i], betas[j])
    n4 = initial.norm**4
    terms = np.empty((q, q, q, q), dtype=complex)
    for r in range(q):
        for s in range(q):
            for p in range(q):
                for qq in range(q):
                    expo = (g_beta[p, qq] - g_zeta[p, qq]
                            + g_bz[s, p] + g_zb[qq, r])
                    terms[r, s, p, qq] = (lam[r] * np.conj(lam[s])
                                          * lam[p] * np.conj(lam[qq])
                                          * np.exp(expo))
    total = n4 * _fsum_complex(terms)
    if abs(total.imag) > 1e-8:
        raise OverlapConsistencyError(
            f"network overlap imaginary part {total.imag:.3e}"
        )
    return total.real


def explicit_transfer_probability(initial: CoherentSuperposition, evolved,
                                  sender: int = 1,
                                  receiver: int | None = None) -> float:
    """Transfer probability in the explicit factorized form.

    Direct transcription of the closed expression
    N^4 sum <{b^s}|{b^r}><{b^q}|{b^p}> exp{-[z_N^q - b_1^s]^* [z_N^p - b_1^r]},
    equivalent to the reduced-overlap route for any branch content; kept
    as an independent formula for cross-checks.
    """
    lam = initial.lambdas
    betas = initial.betas
    zetas = evolved.zetas
    q_n = len(lam)
    rec = (zetas.shape[1] if receiver is None else receiver) - 1
    snd = sender - 1
    g_beta = _branch_gram_exponents(betas)
    n4 = initial.norm**4
    terms = np.empty((q_n,) * 4, dtype=complex)
    for r in range(q_n):
        for s in range(q_n):
            for p in range(q_n):
                for qq in range(q_n):
                    expo = -np.conj(zetas[qq, rec] - betas[s, snd]) \
                        * (zetas[p, rec] - betas[r, snd])
                    terms[r, s, p, qq] = (lam[r] * np.conj(lam[s])
                                          * lam[p] * np.conj(lam[qq])
                                          * np.exp(g_beta[r, s] + g_beta[p, qq]
                                                   + expo))
    total = n4 * _fsum_complex(terms)
    if abs(total.imag) > 1e-8:
        raise OverlapConsistencyError(
            f"explicit transfer probability imaginary part {total.imag:.3e}"
        )
    return total.real
