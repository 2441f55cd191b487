import numpy as np
import pytest
from conftest import random_topology

from qpst.propagator import (
    NearDefectiveError,
    decompose,
    evolve_amplitudes,
    evolve_grid,
    theta_at,
)
from qpst.topology import (
    ChainSpec,
    DissipativeGenerator,
    NetworkTopology,
    build_chain,
    build_general,
)


def fig1a_chain(n=5):
    return build_chain(ChainSpec(n=n, omega_end=10.0, omega_mid=10010.0,
                                 lambda_end=1.0, epsilon=5000.0,
                                 gamma_mid=1e-3))


class TestDecompose:
    def test_two_by_two_symmetric(self):
        omega = 3.0
        top = NetworkTopology(2, [omega, omega], [[0, 1], [1, 0]],
                              np.zeros((2, 2)))
        sd = decompose(build_general(top))
        r = np.sort(sd.eigenvalues.imag)
        assert r == pytest.approx([omega - 1, omega + 1])
        assert np.abs(sd.eigenvalues.real).max() == 0.0
        # eigenvectors are the (anti)symmetric combinations
        for col in range(2):
            v = np.abs(sd.right_vectors[:, col])
            assert v == pytest.approx([1 / np.sqrt(2)] * 2)

    def test_ideal_spectrum_purely_imaginary(self, rng):
        for _ in range(10):
            top = random_topology(rng, damped=False)
            sd = decompose(build_general(top))
            assert sd.ideal
            assert np.abs(sd.eigenvalues.real).max() <= 1e-12

    def test_reconstruction_residual(self, rng):
        for _ in range(10):
            gen = build_general(random_topology(rng))
            sd = decompose(gen)
            recon = (sd.right_vectors * sd.eigenvalues[None, :]) \
                @ sd.inverse_vectors
            res = np.linalg.norm(gen.matrix - recon) / np.linalg.norm(gen.matrix)
            assert res <= 1e-10

    def test_fig1_chain_agrees_with_expm_semigroup(self):
        # spectral eigensystem cross-validated against the expm route
        gen = build_general(fig1a_chain())
        sd = decompose(gen)
        for tau in (0.3, 1.7):
            a = theta_at(sd, tau).matrix
            b = theta_at(gen, tau).matrix
            assert np.abs(a - b).max() < 1e-9

    def test_near_defective_rejected(self):
        # Jordan-block-like generator: eigenvector matrix is singular at
        # the exceptional point, the decomposition must refuse it.
        m = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
        gen = DissipativeGenerator(matrix=m, hermitian_part_ideal=False,
                                   contractive=False)
        with pytest.raises(NearDefectiveError, match="expm"):
            decompose(gen)


class TestThetaAt:
    def test_tau_zero_identity(self, rng):
        gen = build_general(random_topology(rng))
        assert np.allclose(theta_at(gen, 0.0).matrix, np.eye(gen.n), atol=1e-14)
        sd = decompose(gen)
        assert np.allclose(theta_at(sd, 0.0).matrix, np.eye(gen.n), atol=1e-14)

    def test_two_mode_closed_form(self):
        omega = 1.0
        top = build_chain(ChainSpec(n=2, omega_end=omega))
        sd = decompose(build_general(top))
        for tau in (0.3, np.pi / 2, 2.2):
            expected = np.exp(-1j * omega * tau) * np.array(
                [[np.cos(tau), -1j * np.sin(tau)],
                 [-1j * np.sin(tau), np.cos(tau)]])
            assert np.abs(theta_at(sd, tau).matrix - expected).max() < 1e-12
        corner = theta_at(sd, np.pi / 2).matrix[0, 1]
        assert abs(abs(corner) - 1.0) < 1e-12

    def test_negative_tau_ideal_inverts(self):
        top = build_chain(ChainSpec(n=2, omega_end=4.0))
        sd = decompose(build_general(top))
        prod = theta_at(sd, -1.3).matrix @ theta_at(sd, 1.3).matrix
        assert np.allclose(prod, np.eye(2), atol=1e-12)

    def test_negative_tau_damped_rejected(self, rng):
        gen = build_general(random_topology(rng, damped=True))
        if gen.hermitian_part_ideal:
            pytest.skip("drew an undamped topology")
        with pytest.raises(ValueError, match="ideal"):
            theta_at(gen, -0.5)
        with pytest.raises(ValueError, match="ideal"):
            theta_at(decompose(gen), -0.5)

    def test_rejects_unknown_source(self):
        with pytest.raises(TypeError):
            theta_at(np.eye(2), 1.0)


class TestEvolveAmplitudes:
    def test_identity(self, rng):
        gen = build_general(random_topology(rng, n=4))
        beta = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        out = evolve_amplitudes(theta_at(gen, 0.0), beta)
        assert np.allclose(out, beta, atol=1e-14)

    def test_two_mode_swap_amplitude(self):
        omega = 1.0
        top = build_chain(ChainSpec(n=2, omega_end=omega))
        theta = theta_at(decompose(build_general(top)), np.pi / 2)
        alpha = 0.7 + 0.2j
        out = evolve_amplitudes(theta, np.array([alpha, 0.0]))
        assert abs(out[0]) < 1e-12
        assert out[1] == pytest.approx(-1j * np.exp(-1j * omega * np.pi / 2) * alpha)

    def test_vacuum_stays_vacuum(self, rng):
        gen = build_general(random_topology(rng, n=3))
        out = evolve_amplitudes(theta_at(gen, 2.5), np.zeros(3, dtype=complex))
        assert np.all(out == 0)

    def test_dimension_mismatch(self, rng):
        gen = build_general(random_topology(rng, n=3))
        with pytest.raises(ValueError, match="shape"):
            evolve_amplitudes(theta_at(gen, 1.0), np.zeros(4, dtype=complex))


class TestInvariants:
    def test_semigroup(self, rng):
        for _ in range(10):
            sd = decompose(build_general(random_topology(rng)))
            t1, t2 = rng.uniform(0, 10, 2)
            whole = theta_at(sd, t1 + t2).matrix
            parts = theta_at(sd, t1).matrix @ theta_at(sd, t2).matrix
            assert (np.linalg.norm(whole - parts)
                    <= 1e-8 * np.linalg.norm(whole))

    def test_ideal_unitarity_long_horizon(self, rng):
        for _ in range(5):
            sd = decompose(build_general(random_topology(rng, damped=False)))
            for tau in (1.0, 31.7, 1e3):
                th = theta_at(sd, tau).matrix
                dev = np.linalg.norm(th @ th.conj().T - np.eye(sd.n))
                assert dev <= 1e-10

    def test_contractivity(self, rng):
        for _ in range(10):
            sd = decompose(build_general(random_topology(rng, damped=True)))
            for tau in (0.1, 3.0, 50.0, 1e3):
                s_max = np.linalg.svd(theta_at(sd, tau).matrix,
                                      compute_uv=False)[0]
                assert s_max <= 1 + 1e-9

    def test_expm_vs_spectral_agreement(self, rng):
        for _ in range(10):
            gen = build_general(random_topology(rng))
            sd = decompose(gen)
            tau = float(rng.uniform(0, 5))
            a = theta_at(sd, tau).matrix
            b = theta_at(gen, tau).matrix
            assert np.abs(a - b).max() <= 1e-9

    @pytest.mark.filterwarnings("ignore:n=2 chain has no transmitters")
    def test_chain_mirror_symmetry(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 9))
            spec = ChainSpec(n=n, omega_end=float(rng.uniform(1, 20)),
                             omega_mid=float(rng.uniform(50, 2000)),
                             epsilon=float(rng.uniform(0.5, 50)),
                             gamma_mid=float(rng.uniform(0, 0.05)))
            sd = decompose(build_general(build_chain(spec)))
            for tau in (0.7, 210.0, 1e5):
                th = theta_at(sd, tau).matrix
                assert np.abs(th - th[::-1, ::-1]).max() <= 1e-9

    def test_fig1_mirror_symmetry_near_degenerate(self):
        # the hybridized end-mode doublet is split by only 1e-4; sector
        # decomposition keeps the propagator exactly mirror-symmetric
        sd = decompose(build_general(fig1a_chain()))
        for tau in (3.1e4, 1e6):
            th = theta_at(sd, tau).matrix
            assert np.abs(th - th[::-1, ::-1]).max() <= 1e-12


class TestEvolveGrid:
    def test_matches_pointwise_theta(self, rng):
        sd = decompose(build_general(random_topology(rng, n=4)))
        betas = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        taus = np.array([0.0, 0.9, 4.4])
        z, precise = evolve_grid(sd, betas, taus)
        assert precise.all()
        for i, tau in enumerate(taus):
            th = theta_at(sd, float(tau)).matrix
            for q in range(2):
                assert np.allclose(z[i, q], th @ betas[q], atol=1e-12)
