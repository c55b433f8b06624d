"""Gap distributions of an Ising ring as the ring grows.

The first spin of a transverse-field Ising ring is the system; the rest is
the bath.  Every pair of energy levels (j, k) contributes a weight
|rho_jk A_kj| at gap E_j - E_k.  For small rings the weight sits on a few
isolated gaps; as L grows the histogram fills in and becomes smooth.

The ring conserves the product of all sigma_z.  Starting the system in
|up> with the bath maximally mixed gives an even state, and sigma_x on the
system is odd, so every weight vanishes and the expectation value never
moves.  Starting from |+x> instead breaks that selection rule.
"""
import numpy as np

from eqtime.gaps import build_gap_distribution, count_local_maxima, histogram
from eqtime.models import PAULI, embed_system_observable, ising_ring, system_state
from eqtime.spectral import diagonalize, to_eigenbasis


def distribution(L, state):
    m = ising_ring(L, omega=1.0, gamma=1.1)
    dec = diagonalize(m.H)
    rho = np.kron(system_state(state), np.eye(m.d_B) / m.d_B)
    A = embed_system_observable(PAULI["x"], m)
    return build_gap_distribution(to_eigenbasis(rho, dec), to_eigenbasis(A, dec), dec)


for L in (3, 5, 7, 9):
    print(f"L={L}: Q from |up> = {distribution(L, 'up').Q:.1e}")

print()
for L in (3, 5, 7, 9):
    dist = distribution(L, "plus")
    centers, probs, _ = histogram(dist, n_bins=40, value_range=(-10, 10))
    print(f"L={L}: Q={dist.Q:.3f}, {dist.n_atoms} distinct gaps, {count_local_maxima(probs)} local maxima")
    for c, p in zip(centers, probs):
        if p > 0.005:
            print(f"   gap {c:+6.2f}  {'#' * int(round(200 * p))}")
