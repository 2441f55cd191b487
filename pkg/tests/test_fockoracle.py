import math

import numpy as np
import pytest

from qpst.coherent import (
    CoherentSuperposition,
    evolve,
    initial_reduced,
    make_cat,
    reduce_mode,
    reduced_overlap,
)
from qpst.fockoracle import (
    FockDensity,
    encode_coherent,
    fock_overlap,
    lindblad_evolve,
    lindblad_scan,
    partial_trace,
)
from qpst.propagator import decompose, theta_at
from qpst.topology import NetworkTopology, build_general


def coherent_state(betas):
    betas = np.atleast_1d(np.asarray(betas, dtype=complex))
    return CoherentSuperposition.from_branches([1.0], betas[None, :])


class TestEncode:
    def test_vacuum(self):
        rho = encode_coherent(coherent_state([0.0, 0.0]), cutoff=4)
        expected = np.zeros((16, 16))
        expected[0, 0] = 1.0
        assert np.allclose(rho.matrix, expected, atol=1e-15)
        assert rho.truncation_defect == 0.0

    def test_poisson_diagonal(self):
        alpha = 0.5
        rho = encode_coherent(coherent_state([alpha]), cutoff=10)
        k = np.arange(10)
        poisson = np.exp(-(alpha**2)) * alpha ** (2 * k) / np.array(
            [math.factorial(int(i)) for i in k])
        assert np.allclose(np.diag(rho.matrix).real, poisson, atol=1e-10)

    def test_cat_even_photon_support(self):
        rho = encode_coherent(make_cat(1, 1, 0.6), cutoff=12)
        populations = np.diag(rho.matrix).real
        assert populations[1::2] == pytest.approx(0.0, abs=1e-14)
        assert populations[0] > 0.5

    def test_truncation_error_raises(self):
        with pytest.raises(ValueError, match="truncation defect"):
            encode_coherent(coherent_state([2.5]), cutoff=4)

    def test_guardrails(self):
        with pytest.raises(ValueError, match="refuses"):
            encode_coherent(coherent_state([0.0] * 5), cutoff=4)


class TestLindbladEvolve:
    def test_rabi_oscillation(self):
        # one excitation hopping between two ideal resonant modes
        d = 4
        top = NetworkTopology(2, [0.0, 0.0], [[0, 1], [1, 0]], np.zeros((2, 2)))
        rho0 = np.zeros((d * d, d * d), dtype=complex)
        rho0[d, d] = 1.0  # |n1=1, n2=0>
        num2 = np.zeros(d * d)
        for i in range(d * d):
            num2[i] = i % d
        for tau in (0.3, 0.8, 1.4):
            out = lindblad_evolve(FockDensity(d, 2, rho0.copy()), top, tau)
            occ2 = float(np.real(np.diag(out.matrix) @ num2))
            assert occ2 == pytest.approx(math.sin(tau) ** 2, abs=1e-6)

    def test_damped_mode_amplitude(self):
        # decoupled damped oscillator: <a>(t) = alpha e^{-i w t - G t/2}
        d, alpha, gam, omega = 8, 0.5, 0.1, 0.7
        top = NetworkTopology(2, [omega, 0.0], np.zeros((2, 2)),
                              np.diag([gam, 0.0]))
        rho = encode_coherent(coherent_state([alpha, 0.0]), cutoff=d)
        t = 3.0
        out = lindblad_evolve(rho, top, t)
        lower = np.diag(np.sqrt(np.arange(1.0, d)), 1)
        red = partial_trace(out, 1)
        amp = complex(np.trace(red.matrix @ lower))
        expected = alpha * np.exp(-1j * omega * t - gam * t / 2)
        assert amp == pytest.approx(expected, abs=1e-6)
        # and the closed-form propagator gives the same flow
        th = theta_at(decompose(build_general(top)), t)
        assert th.matrix[0, 0] == pytest.approx(expected / alpha, abs=1e-12)

    def test_trace_hermiticity_positivity_preserved(self):
        top = NetworkTopology(2, [0.3, -0.2], [[0, 0.4], [0.4, 0]],
                              np.diag([0.0, 0.1]))
        rho = encode_coherent(make_cat(2, 1, 0.5), cutoff=8)
        out = lindblad_evolve(rho, top, 5.0)
        out.validate(check_positivity=True)

    def test_ideal_evolution_preserves_purity(self):
        top = NetworkTopology(2, [0.1, -0.1], [[0, 0.5], [0.5, 0]],
                              np.zeros((2, 2)))
        rho = encode_coherent(make_cat(2, 1, 0.5), cutoff=8)
        out = lindblad_evolve(rho, top, 4.0)
        purity = float(np.real(np.trace(out.matrix @ out.matrix)))
        assert purity == pytest.approx(1.0, abs=1e-6)

    def test_nondiagonal_gamma_rejected(self):
        gamma = np.array([[0.1, 0.05], [0.05, 0.1]])
        top = NetworkTopology(2, [0.0, 0.0], [[0, 1], [1, 0]], gamma)
        rho = encode_coherent(coherent_state([0.2, 0.0]), cutoff=4)
        with pytest.raises(ValueError, match="diagonal"):
            lindblad_evolve(rho, top, 1.0)


class TestOracleAgainstCoherentAlgebra:
    def oracle_probabilities(self, top, cat, cutoff, taus):
        rho0 = encode_coherent(cat, cutoff)
        red0 = encode_coherent(
            CoherentSuperposition(cat.lambdas, cat.betas[:, :1], cat.norm),
            cutoff)
        n = top.n

        def probe(matrix):
            live = FockDensity(cutoff, n, matrix)
            return (fock_overlap(partial_trace(live, n), red0),
                    fock_overlap(partial_trace(live, 1), red0))

        results, _ = lindblad_scan(rho0, top, taus, probe)
        return np.array(results)

    def coherent_probabilities(self, top, cat, taus):
        sd = decompose(build_general(top))
        red0 = initial_reduced(cat, 1)
        out = []
        for tau in taus:
            ev = evolve(cat, theta_at(sd, float(tau)))
            out.append((reduced_overlap(red0, reduce_mode(ev, top.n)),
                        reduced_overlap(red0, reduce_mode(ev, 1))))
        return np.array(out)

    def test_damped_two_mode_chain(self):
        top = NetworkTopology(2, [0.1, -0.1], [[0, 0.3], [0.3, 0]],
                              np.diag([0.0, 0.08]))
        cat = make_cat(2, 1, 0.5)
        taus = np.linspace(0.0, 6.0, 9)
        fock = self.oracle_probabilities(top, cat, cutoff=8, taus=taus)
        fast = self.coherent_probabilities(top, cat, taus)
        assert np.abs(fock - fast).max() <= 1e-3

    def test_three_mode_chain(self):
        top = NetworkTopology(
            3, [0.05, 0.15, 0.05],
            [[0, 0.25, 0], [0.25, 0, 0.25], [0, 0.25, 0]],
            np.diag([0.0, 0.06, 0.0]))
        cat = make_cat(3, 1, 0.4)
        taus = np.linspace(0.0, 4.0, 5)
        fock = self.oracle_probabilities(top, cat, cutoff=6, taus=taus)
        fast = self.coherent_probabilities(top, cat, taus)
        assert np.abs(fock - fast).max() <= 1e-3


class TestPartialTraceAndOverlap:
    def test_partial_trace_of_product_state(self):
        state = coherent_state([0.4, -0.3 + 0.2j])
        rho = encode_coherent(state, cutoff=8)
        for mode, amp in ((1, 0.4), (2, -0.3 + 0.2j)):
            red = partial_trace(rho, mode)
            single = encode_coherent(coherent_state([amp]), cutoff=8)
            assert np.abs(red.matrix - single.matrix).max() < 1e-10

    def test_identical_pure_states(self):
        rho = encode_coherent(coherent_state([0.3, 0.1]), cutoff=6)
        assert fock_overlap(rho, rho) == pytest.approx(1.0, abs=1e-8)

    def test_orthogonal_fock_states(self):
        d = 4
        a = np.zeros((d, d), dtype=complex)
        b = np.zeros((d, d), dtype=complex)
        a[0, 0] = 1.0
        b[1, 1] = 1.0
        assert fock_overlap(FockDensity(d, 1, a), FockDensity(d, 1, b)) == 0.0

    def test_cat_vs_vacuum_matches_closed_form(self):
        alpha = 0.6
        cat = make_cat(1, 1, alpha)
        rho_cat = encode_coherent(cat, cutoff=12)
        rho_vac = encode_coherent(coherent_state([0.0]), cutoff=12)
        want = 4 * cat.norm**2 * math.exp(-(alpha**2))
        assert fock_overlap(rho_cat, rho_vac) == pytest.approx(want, abs=1e-6)
        fast = reduced_overlap(
            initial_reduced(cat, 1),
            initial_reduced(coherent_state([0.0]), 1))
        assert fock_overlap(rho_cat, rho_vac) == pytest.approx(fast, abs=1e-6)
