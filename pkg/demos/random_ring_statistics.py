"""Disorder averages of a(eps) and delta(eps) for rings with random couplings.

Each realisation draws couplings K_l ~ Normal(1, 0.2).  Disorder lifts the
gap degeneracies of the uniform ring, so delta(eps) falls faster with L.
"""
import numpy as np

from eqtime.gaps import a_delta, build_gap_distribution
from eqtime.models import PAULI, embed_system_observable, random_ring, system_state
from eqtime.spectral import diagonalize, to_eigenbasis

eps = np.array([0.05, 0.2, 1.0])
n_seeds = 40
for L in (3, 4, 5, 6, 7):
    a_all, d_all = [], []
    for seed in range(n_seeds):
        m = random_ring(L, seed=seed)
        dec = diagonalize(m.H)
        rho = np.kron(system_state("plus"), np.eye(m.d_B) / m.d_B)
        A = embed_system_observable(PAULI["x"], m)
        dist = build_gap_distribution(to_eigenbasis(rho, dec), to_eigenbasis(A, dec), dec)
        a, d = a_delta(dist, eps)
        a_all.append(a)
        d_all.append(d)
    a_all, d_all = np.array(a_all), np.array(d_all)
    cells = [f"{a_all[:, i].mean():.3f}+-{a_all[:, i].std(ddof=1):.3f} / {d_all[:, i].mean():.4f}" for i in range(eps.size)]
    print(f"L={L}:  " + "   ".join(f"eps={e}: {c}" for e, c in zip(eps, cells)))
