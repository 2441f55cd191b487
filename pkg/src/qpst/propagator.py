"""Propagators Theta(tau) = exp(-H^D tau) and coherent-amplitude flow.

Two independent evaluation paths are provided:

* a spectral path, Theta = D exp(-W tau) D^{-1}, built on an
  eigendecomposition of H^D (real-symmetric solver for ideal networks,
  general complex solver otherwise) with compensated phase reduction so
  that tau-grids up to ~1e12 stay phase-accurate;
* a scaling-and-squaring path (Pade approximant via scipy) operating
  directly on -H^D*tau, which remains usable near defective points
  where the eigenvector basis degenerates.

Mirror-symmetric generators (every sender/transmitter/receiver chain)
are decomposed per parity sector.  That keeps mirror-paired entries of
Theta bitwise equal no matter how nearly degenerate the hybridized
end-mode doublet becomes, which a plain eigensolver cannot guarantee
once the doublet splitting approaches the rounding floor.

For positive-semidefinite damping the true spectrum satisfies
Re(W) >= 0; eigensolver noise of order eps*||H^D|| below zero is
projected back to zero so that contractivity survives exponentiation
over long horizons.  Genuinely non-contractive spectra fail the
reconstruction check instead of being silently clipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .phases import PHASE_BUDGET, phase_exp_batch
from .topology import DissipativeGenerator, is_mirror_symmetric

__all__ = [
    "SpectralDecomposition",
    "Propagator",
    "NearDefectiveError",
    "decompose",
    "theta_at",
    "evolve_amplitudes",
    "evolve_grid",
    "entry_values",
    "corner_series",
]

RECONSTRUCTION_TOL = 1e-10
CONDITION_LIMIT = 1e12


class NearDefectiveError(np.linalg.LinAlgError):
    """Eigenvector basis too ill-conditioned; use the expm path."""


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigensystem H^D = D diag(W) D^{-1} with a conditioning estimate."""

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    inverse_vectors: np.ndarray
    condition_estimate: float
    ideal: bool = False

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class Propagator:
    """Theta(tau) mapping initial to evolved coherent amplitudes."""

    time: float
    matrix: np.ndarray
    precise: bool = True

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _validate(gen_matrix, w, d, dinv, ideal) -> SpectralDecomposition:
    norm = np.linalg.norm(gen_matrix)
    residual = np.linalg.norm(gen_matrix - (d * w[None, :]) @ dinv)
    if norm > 0:
        residual /= norm
    cond = float(np.linalg.cond(d))
    if residual > RECONSTRUCTION_TOL or cond > CONDITION_LIMIT:
        raise NearDefectiveError(
            f"eigendecomposition rejected (residual {residual:.2e}, condition "
            f"{cond:.2e}); evaluate Theta through the expm path instead"
        )
    return SpectralDecomposition(w, d, dinv, cond, ideal)


def _clamp_decay(w: np.ndarray) -> np.ndarray:
    # PSD damping implies Re(W) >= 0; negative parts at rounding level are
    # eigensolver noise and would exponentiate into spurious growth.
    re = np.where(w.real < 0.0, 0.0, w.real)
    return re + 1j * w.imag


def _eig_block(block: np.ndarray, ideal: bool):
    """Eigensystem of one matrix block; returns (w, v, v_inv)."""
    if ideal:
        # block of i*H with H real symmetric
        r, v = np.linalg.eigh(block.imag)
        return 1j * r, v.astype(complex), v.T.astype(complex)
    w, v = np.linalg.eig(block)
    return w, v, np.linalg.inv(v)


def _decompose_mirror(matrix: np.ndarray, ideal: bool, contractive: bool):
    """Sector eigendecomposition of a mirror-symmetric generator.

    In the parity basis u_k+- = (e_k +- e_{N-1-k})/sqrt(2) the generator
    is block diagonal.  D and D^{-1} are assembled by copying each
    sector eigenvector to both mirror partners, so mirror-paired rows
    hold bitwise-identical values and Theta inherits exact symmetry.
    """
    n = matrix.shape[0]
    h = n // 2
    odd_n = n % 2 == 1
    ne = h + (1 if odd_n else 0)
    s = 1.0 / np.sqrt(2.0)

    flipped = matrix[:h, ::-1][:, :h]
    block_even = np.empty((ne, ne), dtype=complex)
    block_even[:h, :h] = matrix[:h, :h] + flipped
    if odd_n:
        block_even[:h, h] = np.sqrt(2.0) * matrix[:h, h]
        block_even[h, :h] = np.sqrt(2.0) * matrix[h, :h]
        block_even[h, h] = matrix[h, h]
    block_odd = matrix[:h, :h] - flipped

    w_e, v_e, vinv_e = _eig_block(block_even, ideal)
    w_o, v_o, vinv_o = _eig_block(block_odd, ideal)

    w = np.concatenate([w_e, w_o])
    d = np.zeros((n, n), dtype=complex)
    dinv = np.zeros((n, n), dtype=complex)
    for k in range(h):
        d[k, :ne] = s * v_e[k, :]
        d[n - 1 - k, :ne] = s * v_e[k, :]
        d[k, ne:] = s * v_o[k, :]
        d[n - 1 - k, ne:] = -s * v_o[k, :]
        dinv[:ne, k] = s * vinv_e[:, k]
        dinv[:ne, n - 1 - k] = s * vinv_e[:, k]
        dinv[ne:, k] = s * vinv_o[:, k]
        dinv[ne:, n - 1 - k] = -s * vinv_o[:, k]
    if odd_n:
        d[h, :ne] = v_e[h, :]
        dinv[:ne, h] = vinv_e[:, h]

    if contractive and not ideal:
        w = _clamp_decay(w)
    return w, d, dinv


def decompose(gen: DissipativeGenerator) -> SpectralDecomposition:
    """Eigendecomposition of H^D suitable for spectral propagation.

    Ideal generators use the real-symmetric solver on H (eigenvalues
    W = i*R, vectors orthogonal); mirror-symmetric generators are split
    into parity sectors first.  Raises NearDefectiveError when the
    reconstruction residual or eigenvector conditioning disqualifies
    the decomposition.
    """
    matrix = gen.matrix
    ideal = gen.hermitian_part_ideal
    if is_mirror_symmetric(matrix) and matrix.shape[0] > 2:
        w, d, dinv = _decompose_mirror(matrix, ideal, gen.contractive)
        return _validate(matrix, w, d, dinv, ideal)
    if ideal:
        r, v = np.linalg.eigh(matrix.imag)
        return _validate(matrix, 1j * r, v.astype(complex),
                         v.T.astype(complex), True)
    w, d = np.linalg.eig(matrix)
    dinv = np.linalg.inv(d)
    if gen.contractive:
        w = _clamp_decay(w)
    return _validate(matrix, w, d, dinv, False)


def theta_at(source, tau: float) -> Propagator:
    """Theta(tau) = exp(-H^D tau).

    A DissipativeGenerator is exponentiated by scaling-and-squaring; a
    SpectralDecomposition through D exp(-W tau) D^{-1} with compensated
    phases.  Negative tau is the unitary inverse and is only defined for
    ideal (undamped) dynamics.
    """
    if isinstance(source, SpectralDecomposition):
        if tau < 0 and not source.ideal:
            raise ValueError("negative tau requires an ideal (gamma=0) network")
        e, precise = phase_exp_batch(source.eigenvalues, [tau])
        matrix = (source.right_vectors * e[0][None, :]) @ source.inverse_vectors
        return Propagator(time=float(tau), matrix=matrix, precise=bool(precise[0]))
    if isinstance(source, DissipativeGenerator):
        if tau < 0 and not source.hermitian_part_ideal:
            raise ValueError("negative tau requires an ideal (gamma=0) network")
        matrix = scipy.linalg.expm(-source.matrix * tau)
        scale = float(np.max(np.abs(source.matrix.imag))) * abs(tau)
        return Propagator(time=float(tau), matrix=matrix,
                          precise=scale <= PHASE_BUDGET)
    raise TypeError(
        f"expected DissipativeGenerator or SpectralDecomposition, got {type(source)}"
    )


def evolve_amplitudes(theta: Propagator, beta: np.ndarray) -> np.ndarray:
    """zeta = Theta(tau) . beta."""
    beta = np.asarray(beta, dtype=complex)
    if beta.shape != (theta.n,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({theta.n},)")
    return theta.matrix @ beta


def evolve_grid(sd: SpectralDecomposition, betas: np.ndarray, taus: np.ndarray):
    """Branch amplitudes on a tau grid through the spectral path.

    betas : (Q, N) initial amplitudes per branch
    Returns (Z, precise): Z[t, q, :] = Theta(tau_t) . betas[q], and the
    per-sample phase-precision mask.
    """
    betas = np.atleast_2d(np.asarray(betas, dtype=complex))
    taus = np.asarray(taus, dtype=float)
    y = sd.inverse_vectors @ betas.T                      # (N, Q)
    p = y[:, :, None] * sd.right_vectors.T[:, None, :]    # (N, Q, N)
    e, precise = phase_exp_batch(sd.eigenvalues, taus)    # (T, N)
    z = np.tensordot(e, p, axes=1)                        # (T, Q, N)
    return z, precise


def entry_values(sd: SpectralDecomposition, row: int, col: int, taus):
    """Theta[row, col](tau) on a grid (0-based matrix indices)."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    c = corner_series(sd, row, col)
    e, precise = phase_exp_batch(sd.eigenvalues, taus)
    return e @ c, precise


def corner_series(sd: SpectralDecomposition, row: int, col: int) -> np.ndarray:
    """Spectral coefficients c_k of Theta[row, col] = sum_k c_k e^{-W_k tau}."""
    return sd.right_vectors[row, :] * sd.inverse_vectors[:, col]
