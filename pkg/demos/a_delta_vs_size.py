"""How a(eps) and delta(eps) change with the size of the ring.

Fast equilibration needs a distribution of gaps for which some eps gives
a(eps) of order one and delta(eps) small.  We follow both for a uniform
Ising ring with the system in |+x> and the bath maximally mixed (see
gap_histograms.py for why |up> gives no dynamics for sigma_x).
"""
import numpy as np

from eqtime.gaps import a_delta, build_gap_distribution, sigma_spectral
from eqtime.models import PAULI, embed_system_observable, ising_ring, system_state
from eqtime.spectral import diagonalize, to_eigenbasis

eps_values = (3.26, 1.65, 0.5, 0.05, 0.02)
print(f"{'L':>3} {'sigma_G':>8} " + " ".join(f"{'a/delta @ ' + str(e):>20}" for e in eps_values))
for L in (3, 5, 7, 9):
    m = ising_ring(L)
    dec = diagonalize(m.H)
    rho = np.kron(system_state("plus"), np.eye(m.d_B) / m.d_B)
    A = embed_system_observable(PAULI["x"], m)
    dist = build_gap_distribution(to_eigenbasis(rho, dec), to_eigenbasis(A, dec), dec)
    cells = []
    for e in eps_values:
        a, d = a_delta(dist, e)
        cells.append(f"{a:9.3f}/{d:<10.4f}")
    print(f"{L:3d} {sigma_spectral(dist):8.3f} " + " ".join(f"{c:>20}" for c in cells))
