#!/usr/bin/env python3
"""Closed-form propagator and exchange-time scaling for small chains.

For N = 4 the mirror symmetry reduces the dynamics to two detuned
two-level sectors; the resulting closed form tracks the exact
propagator to O(mu^2) over a full exchange period.  The same expansion
gives the scaled exchange time pi/(2 eps^(N-3) mu^(N-2)) and the
effective sender-receiver coupling pi/(2 tau_ex).
"""

import numpy as np

from qpst import (
    ChainSpec,
    analytic_tau_ex,
    build_chain,
    build_general,
    decompose,
    effective_coupling,
    exchange_time_numeric,
    perturbative_theta4,
    scaled_params,
    theta_at,
)

spec = ChainSpec(n=4, omega_end=10.0, omega_mid=1010.0, lambda_end=1.0,
                 epsilon=10.0, gamma_mid=1e-2)
params = scaled_params(spec)
sd = decompose(build_general(build_chain(spec)))
tau_ex = np.pi / (2 * spec.epsilon * params.mu**2)

print("closed form vs exact propagator (N = 4, mu = 1e-3, eta = 1e-2):")
worst = 0.0
for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
    tau = frac * tau_ex
    exact = theta_at(sd, float(tau)).matrix
    approx = perturbative_theta4(params, spec.epsilon, float(tau)).matrix
    dev = float(np.abs(exact - approx).max())
    worst = max(worst, dev)
    print(f"  tau = {frac:4.2f} tau_ex : max deviation {dev:.2e}")
print(f"  worst {worst:.2e}   (100 mu^2 = {100 * params.mu**2:.0e})")

corner = abs(perturbative_theta4(params, spec.epsilon, tau_ex).matrix[3, 0])
print(f"\ncorner magnitude at tau_ex: {corner:.7f}")
print(f"half-rate decay e^(-pi eta/(4 eps)) = "
      f"{np.exp(-np.pi * params.eta / (4 * spec.epsilon)):.7f}")

print("\nexchange-time scaling (eps*mu = 0.05, eta = 1e-3):")
print(f"{'N':>3} {'analytic':>14} {'numeric':>14} {'rel.err':>9} "
      f"{'lambda_eff':>12}")
for n in (3, 4, 5, 6):
    s = ChainSpec(n=n, omega_end=10.0, omega_mid=1010.0, lambda_end=1.0,
                  epsilon=50.0, gamma_mid=1e-3)
    p = scaled_params(s)
    analytic = analytic_tau_ex(n, p, s.epsilon)
    sd_n = decompose(build_general(build_chain(s)))
    numeric = exchange_time_numeric(sd_n, (0.5 * analytic, 1.6 * analytic))
    rel = abs(analytic - numeric.tau_ex) / numeric.tau_ex
    lam_eff = effective_coupling(n, p, s.epsilon)
    print(f"{n:3d} {analytic:14.1f} {numeric.tau_ex:14.1f} {rel:9.2%} "
          f"{lam_eff:12.3e}")
