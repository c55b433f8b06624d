"""Truncating a system+bath state to a window of the full Hamiltonian.

The bath starts in a microcanonical window of its own Hamiltonian.  Once
the interaction is switched on, the state is no longer confined to a window
of H, but it leaks only a little outside a window widened by
eta = sqrt(8 d_S) ||H_I|| K.  The truncated state is within 2/K in trace
norm, and the number of levels kept can be far below the full dimension.
"""
import numpy as np

from eqtime.bounds import central_window, theorem4_bound, truncate
from eqtime.dynamics import exact_time_average
from eqtime.models import PAULI, InitialStateSpec, build_initial_state, embed_system_observable, ising_ring, system_state
from eqtime.spectral import diagonalize, fit_density_of_states, to_eigenbasis

m = ising_ring(8, gamma=0.02)
bath = diagonalize(m.h_bath)
window = central_window(bath)
rho_S = system_state("up")
rho = build_initial_state(InitialStateSpec(rho_S, "microcanonical", window.E_B, window.Delta), m, bath)
A = embed_system_observable(PAULI["z"], m)
dec = diagonalize(m.H)
fit = fit_density_of_states(bath)
print(f"bath window: centre {window.E_B:.3f}, width {window.Delta:.3f}, {window.d_B_window} levels")
print(f"fitted bath density of states: beta = {fit.beta:.3f}")

print(f"\n{'K':>4} {'eta':>7} {'leakage':>10} {'||rho-PrP||':>12} {'d_trunc':>8} {'count bd':>9} {'Q2':>7}")
for K in (5, 10, 20, 50):
    r = truncate(m, rho, window, K, A, fit, rho_S, dec)
    print(f"{K:4d} {r.eta:7.3f} {r.leakage:10.2e} {r.trace_dist:12.2e} {r.d_trunc_exact:8d} {r.d_trunc_count_bound:9.1f} {r.Q2:7.3f}")

re, ae = to_eigenbasis(rho, dec), to_eigenbasis(A, dec)
Ts = np.array([1.0, 10.0, 100.0])
res = theorem4_bound(m, rho, window, 20, 0.2, Ts, A, fit, rho_S, dec)
print("\nT, exact average, bath bound (K = 20, eps = 0.2):")
for T, b in zip(Ts, res.bound):
    print(f"  {T:6.1f} {exact_time_average(re, ae, dec, T):.5f} {b:.4f}")
