"""Network topologies and the dissipative generator.

A network of N coupled harmonic oscillators is specified by natural
frequencies omega_m, a symmetric coupling matrix lambda_mn (zero
diagonal) and a symmetric damping matrix Gamma_mn.  All quantities are
kept in scaled units: frequencies and damping rates in units of the end
coupling lambda (so the end coupling is 1 for chains built here), time
as tau = lambda*t.

The amplitude flow of coherent excitations is generated by the complex
matrix

    H^D = i*H + Gamma/2,      H = diag(omega) + lambda_mn,

which is anti-Hermitian for an ideal (Gamma = 0) network and generates
a contraction semigroup Theta(tau) = exp(-H^D tau) whenever Gamma is
positive semidefinite.

Linear chains place an ideal sender (index 1) and receiver (index N) at
common frequency omega at the ends, and damped transmitters at frequency
Omega in between; end bonds carry coupling 1 (the unit), interior bonds
epsilon.  The engineered perfect-transfer chain instead uses bonds
lambda*sqrt(m*(N-m)) at a common frequency, which renders the propagator
a mirror permutation at tau = pi/2 (in units of 1/lambda).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkTopology",
    "ChainSpec",
    "ScaledParams",
    "DissipativeGenerator",
    "build_general",
    "build_chain",
    "build_pst_chain",
    "scaled_params",
    "is_mirror_symmetric",
]


@dataclass(frozen=True)
class NetworkTopology:
    """Frequencies, couplings and damping of an N-oscillator network.

    omega : (N,) real frequencies, units of the reference coupling
    coupling : (N, N) real symmetric coupling matrix, zero diagonal
    gamma : (N, N) real symmetric damping matrix
    """

    n: int
    omega: np.ndarray
    coupling: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        coupling = np.asarray(self.coupling, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        if self.n < 2:
            raise ValueError(f"need at least 2 oscillators, got n={self.n}")
        if omega.shape != (self.n,):
            raise ValueError(f"omega has shape {omega.shape}, expected ({self.n},)")
        if coupling.shape != (self.n, self.n):
            raise ValueError(
                f"coupling has shape {coupling.shape}, expected ({self.n}, {self.n})"
            )
        if gamma.shape != (self.n, self.n):
            raise ValueError(
                f"gamma has shape {gamma.shape}, expected ({self.n}, {self.n})"
            )
        if not np.array_equal(coupling, coupling.T):
            raise ValueError("coupling matrix must be symmetric")
        if np.any(np.diag(coupling) != 0.0):
            raise ValueError("coupling matrix must have zero diagonal")
        if not np.array_equal(gamma, gamma.T):
            raise ValueError("damping matrix must be symmetric")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "gamma", gamma)

    @property
    def hamiltonian(self) -> np.ndarray:
        """Real symmetric H with omega on the diagonal, couplings off it."""
        return np.diag(self.omega) + self.coupling

    @property
    def ideal(self) -> bool:
        return not np.any(self.gamma)


@dataclass(frozen=True)
class ChainSpec:
    """Linear-chain parameters in physical units.

    The end coupling lambda_end is the frequency unit; build_chain
    rescales everything by it.  Sender and receiver (indices 1 and N)
    share omega_end and do not decay; transmitters sit at omega_mid,
    couple to each other with epsilon*lambda_end and decay at gamma_mid.
    """

    n: int
    omega_end: float
    omega_mid: float = 0.0
    lambda_end: float = 1.0
    epsilon: float = 1.0
    gamma_mid: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"chain needs n >= 2, got {self.n}")
        if self.lambda_end <= 0:
            raise ValueError("lambda_end must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.gamma_mid < 0:
            raise ValueError("gamma_mid must be >= 0")


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless chain parameters of the tunneling regime.

    mu = lambda/(Omega - omega), eta = Gamma/lambda, varpi = omega/lambda,
    delta_minus/plus = Omega -/+ omega (in units of lambda).  The regime
    flags report whether mu << 1, eta << 1 and (epsilon*mu)^2 << 1 hold
    against `threshold` (default 0.1).
    """

    mu: float
    eta: float
    varpi: float
    delta_minus: float
    delta_plus: float
    epsilon: float
    threshold: float = 0.1

    @property
    def mu_small(self) -> bool:
        return abs(self.mu) <= self.threshold

    @property
    def eta_small(self) -> bool:
        return abs(self.eta) <= self.threshold

    @property
    def eps_mu_small(self) -> bool:
        return (self.epsilon * self.mu) ** 2 <= self.threshold

    @property
    def tunneling_regime(self) -> bool:
        return self.mu_small and self.eta_small


@dataclass(frozen=True)
class DissipativeGenerator:
    """H^D = i*H + Gamma/2 plus bookkeeping flags.

    hermitian_part_ideal is True when Gamma vanishes (anti-Hermitian
    generator, unitary flow); contractive is True when Gamma is positive
    semidefinite, which bounds all singular values of exp(-H^D t) by 1.
    """

    matrix: np.ndarray
    hermitian_part_ideal: bool
    contractive: bool = field(default=True)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def build_general(topology: NetworkTopology) -> DissipativeGenerator:
    """Assemble the dissipative generator H^D = i*H + Gamma/2."""
    h = topology.hamiltonian
    matrix = 1j * h + 0.5 * topology.gamma
    ideal = topology.ideal
    if ideal:
        contractive = True
    else:
        contractive = bool(np.linalg.eigvalsh(topology.gamma).min() >= -1e-12)
    return DissipativeGenerator(matrix=matrix, hermitian_part_ideal=ideal,
                                contractive=contractive)


def build_chain(spec: ChainSpec) -> NetworkTopology:
    """Linear sender/transmitter/receiver chain in scaled units.

    Bonds (1,2) and (N-1,N) carry coupling 1 (the unit lambda_end),
    interior bonds epsilon; the diagonal damping gamma_mid/lambda_end
    acts on transmitters only.  For n == 2 there are no transmitters and
    the transmitter parameters are ignored (with a warning when they
    were set to something non-trivial).
    """
    n = spec.n
    unit = spec.lambda_end
    if n == 2:
        if spec.epsilon != 1.0 or spec.omega_mid != 0.0 or spec.gamma_mid != 0.0:
            warnings.warn(
                "n=2 chain has no transmitters; epsilon, omega_mid and "
                "gamma_mid are ignored",
                stacklevel=2,
            )
        omega = np.full(2, spec.omega_end / unit)
        coupling = np.array([[0.0, 1.0], [1.0, 0.0]])
        return NetworkTopology(2, omega, coupling, np.zeros((2, 2)))

    omega = np.full(n, spec.omega_mid / unit)
    omega[0] = omega[-1] = spec.omega_end / unit
    coupling = np.zeros((n, n))
    for m in range(n - 1):
        bond = 1.0 if m in (0, n - 2) else spec.epsilon
        coupling[m, m + 1] = coupling[m + 1, m] = bond
    gamma = np.zeros((n, n))
    for m in range(1, n - 1):
        gamma[m, m] = spec.gamma_mid / unit
    return NetworkTopology(n, omega, coupling, gamma)


def build_pst_chain(n: int, lam: float, omega: float) -> NetworkTopology:
    """Ideal chain with engineered bonds lam*sqrt(m*(N-m)).

    All oscillators share frequency omega and nothing decays; the bond
    sequence is palindromic and the chain performs perfect mirror
    transfer at tau = pi/(2*lam).
    """
    if n < 2:
        raise ValueError(f"chain needs n >= 2, got {n}")
    if lam <= 0:
        raise ValueError("lam must be positive")
    coupling = np.zeros((n, n))
    for m in range(1, n):
        bond = lam * np.sqrt(m * (n - m))
        coupling[m - 1, m] = coupling[m, m - 1] = bond
    return NetworkTopology(n, np.full(n, float(omega)), coupling, np.zeros((n, n)))


def scaled_params(spec: ChainSpec) -> ScaledParams:
    """Dimensionless parameters mu, eta, varpi, Delta+- of a chain."""
    delta_minus = spec.omega_mid - spec.omega_end
    if delta_minus == 0.0:
        raise ValueError(
            "Omega == omega: detuning Delta_- vanishes and the tunneling "
            "parameter mu = lambda/Delta_- is undefined"
        )
    delta_plus = spec.omega_mid + spec.omega_end
    return ScaledParams(
        mu=spec.lambda_end / delta_minus,
        eta=spec.gamma_mid / spec.lambda_end,
        varpi=spec.omega_end / spec.lambda_end,
        delta_minus=delta_minus / spec.lambda_end,
        delta_plus=delta_plus / spec.lambda_end,
        epsilon=spec.epsilon,
    )


def is_mirror_symmetric(matrix: np.ndarray) -> bool:
    """True when matrix[m, n] == matrix[N-1-m, N-1-n] exactly."""
    return np.array_equal(matrix, matrix[::-1, ::-1])
