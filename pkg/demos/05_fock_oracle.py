#!/usr/bin/env python3
"""Cross-checking the coherent algebra against brute force.

The fast path never touches a Hilbert space: branch amplitudes flow
through Theta(tau) and every probability is a closed-form overlap.
Here the same damped three-mode network is integrated in a truncated
number basis with fixed-step RK4 and the two routes are compared
point by point.  Kept small (cutoff 6) so it runs in a few seconds;
the acceptance suite runs the full cutoff-10 version.
"""

import numpy as np

from qpst import (
    CoherentSuperposition,
    NetworkTopology,
    build_general,
    decompose,
    encode_coherent,
    evolve,
    fock_overlap,
    initial_reduced,
    lindblad_scan,
    make_cat,
    partial_trace,
    reduce_mode,
    reduced_overlap,
    theta_at,
)
from qpst.fockoracle import FockDensity

lam = 0.25
top = NetworkTopology(3, [0.05, 0.15, 0.05],
                      [[0, lam, 0], [lam, 0, lam], [0, lam, 0]],
                      np.diag([0.0, 0.06, 0.0]))
cat = make_cat(3, 1, alpha=0.4)
taus = np.linspace(0.0, 6.0, 13)
cutoff = 6

rho0 = encode_coherent(cat, cutoff)
print(f"truncation defect of the encoded cat: {rho0.truncation_defect:.2e}")
sender_cat = CoherentSuperposition(cat.lambdas, cat.betas[:, :1], cat.norm)
red0 = encode_coherent(sender_cat, cutoff)


def probe(matrix):
    live = FockDensity(cutoff, 3, matrix)
    return (fock_overlap(partial_trace(live, 3), red0),
            fock_overlap(partial_trace(live, 1), red0))


fock, _ = lindblad_scan(rho0, top, taus, probe)

sd = decompose(build_general(top))
target = initial_reduced(cat, 1)
print(f"\n{'tau':>6} {'p_ex fock':>12} {'p_ex exact':>12} {'diff':>10}")
worst = 0.0
for (p_fock, _), tau in zip(fock, taus):
    ev = evolve(cat, theta_at(sd, float(tau)))
    p_exact = reduced_overlap(target, reduce_mode(ev, 3))
    worst = max(worst, abs(p_fock - p_exact))
    print(f"{tau:6.2f} {p_fock:12.8f} {p_exact:12.8f} "
          f"{abs(p_fock - p_exact):10.2e}")
print(f"\nworst disagreement: {worst:.2e}")
