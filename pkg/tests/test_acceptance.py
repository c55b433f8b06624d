"""Acceptance gate: one test per criterion, each reporting a pass/fail line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""
import time

import numpy as np

from eqtime.bounds import (
    central_window,
    commutator_value,
    proposition1_bound,
    theorem3_bound,
    theorem4_bound,
    truncate,
    truncated_closeness,
)
from eqtime.dynamics import (
    expectation_by_conjugation,
    expectation_trace,
    exact_time_average,
    haar_typicality,
    lorentzian_average,
    make_time_grid,
    time_average,
    time_average_spectral,
)
from eqtime.gaps import (
    GapDistribution,
    a_delta,
    binomial_distribution,
    build_gap_distribution,
    omega_rank,
    q_purity_bound,
    sigma_commutator,
    sigma_spectral,
    xi,
    xi_bruteforce,
)
from eqtime.models import (
    PAULI,
    InitialStateSpec,
    build_initial_state,
    embed_system_observable,
    free_spin,
    ising_ring,
    system_state,
)
from eqtime.spectral import diagonalize, fit_density_of_states, spectral_norm, to_eigenbasis

from conftest import random_density, random_hermitian, record_acceptance

SLACK = 1e-10


def _report(number, failures, detail):
    ok = not failures
    record_acceptance(number, ok, detail if ok else f"{detail}; {failures[0]}")
    assert ok, failures[:5]


def test_criterion_1_uniform_ring_spot_values():
    """Quoted eps per L with target delta and a window for a."""
    targets = {3: (3.26, 1.0), 5: (1.65, 0.62), 7: (0.05, 0.02), 9: (0.02, 0.006)}
    failures, got = [], []
    for L, (eps, delta_target) in targets.items():
        m = ising_ring(L, omega=1.0, gamma=1.1)
        dec = diagonalize(m.H)
        rho = np.kron(system_state("up"), np.eye(m.d_B) / m.d_B)
        A = embed_system_observable(PAULI["x"], m)
        dist = build_gap_distribution(to_eigenbasis(rho, dec), to_eigenbasis(A, dec), dec)
        if dist.equilibrated:
            a = delta = 0.0
        else:
            a, delta = a_delta(dist, eps)
        got.append(f"L={L}: Q={dist.Q:.3g} delta={delta:.3g} a={a:.3g}")
        if not abs(delta - delta_target) <= 0.25 * delta_target:
            failures.append(f"L={L} delta={delta:.4g} outside {delta_target}+-25% (Q={dist.Q:.3g})")
        if not 0.7 <= a <= 1.3:
            failures.append(f"L={L} a={a:.4g} outside [0.7, 1.3]")
    _report(1, failures, "; ".join(got))


def test_criterion_2_binomial_a_range():
    dist = binomial_distribution(2_000_000)
    eps = np.arange(1, 2001, dtype=float)
    a, _ = a_delta(dist, eps)
    bad = eps[(a <= 0.2) | (a >= 0.8)]
    failures = [f"a outside (0.2, 0.8) at eps={bad[:5].tolist()}"] if bad.size else []
    _report(2, failures, f"sigma={sigma_spectral(dist):.2f}, a in [{a.min():.4f}, {a.max():.4f}] over eps=1..2000")


def _random_instance(rng, d, kind):
    if kind == "degenerate":
        # integer spectrum in a random basis: many coinciding gaps
        U, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        H = (U * rng.integers(-3, 4, d)) @ U.conj().T
    else:
        H = random_hermitian(rng, d, 1 / np.sqrt(d))
    A = random_hermitian(rng, d)
    rank = {"pure": 1, "low": max(1, d // 4)}.get(kind, d)
    return (H + H.conj().T) / 2, A, random_density(rng, d, rank)


def test_criterion_3_inequality_suite():
    rng = np.random.default_rng(3)
    T_grid = np.geomspace(0.1, 100.0, 20)
    eps_values = (0.05, 0.3, 1.0)
    kinds = ("full", "pure", "low", "degenerate")
    failures = []
    n_inst = 0
    worst = np.inf
    for i in range(120):
        d = int(rng.integers(4, 33))
        H, A, rho = _random_instance(rng, d, kinds[i % len(kinds)])
        dec = diagonalize(H)
        re, ae = to_eigenbasis(rho, dec), to_eigenbasis(A, dec)
        dist = build_gap_distribution(re, ae, dec)
        n_inst += 1
        if dist.equilibrated:
            continue
        grid = make_time_grid(T_grid[-1], float(np.ptp(dec.energies)), 2000)
        trace = expectation_trace(re, ae, dec, grid)
        exact = np.array([time_average(trace, T) for T in T_grid])
        p1 = proposition1_bound(dist, T_grid)
        comm = commutator_value(re, ae, dec)
        worst = min(worst, float(np.min(p1 - exact)))
        if np.any(p1 < exact - SLACK):
            failures.append(f"instance {i}: proposition bound below exact average")
        for eps in eps_values:
            s_form, _ = theorem3_bound(dist, eps, T_grid, comm)
            if np.any(s_form < p1 - SLACK):
                failures.append(f"instance {i}: sigma form below proposition bound at eps={eps}")
        s2 = sigma_spectral(dist) ** 2
        sc2 = sigma_commutator(rho, H, A, dist.Q) ** 2
        if s2 < sc2 - SLACK * max(1.0, s2):
            failures.append(f"instance {i}: sigma_spectral^2 {s2:.6g} < sigma_commutator^2 {sc2:.6g}")
        if dist.Q > q_purity_bound(re, omega_rank(re)) + SLACK:
            failures.append(f"instance {i}: Q above purity bound")
        spec = time_average_spectral(dist, T_grid)
        lor = lorentzian_average(dist, T_grid)
        if np.any(spec > 5 * np.pi / 4 * lor + SLACK):
            failures.append(f"instance {i}: box average above 5pi/4 Lorentzian average")
    _report(3, failures, f"{n_inst} instances x 20 T; min(proposition bound - exact) = {worst:.3e}")


def _bath_instance(L, gamma, state, axis):
    m = ising_ring(L, gamma=gamma)
    bd = diagonalize(m.h_bath)
    w = central_window(bd)
    rS = system_state(state)
    rho = build_initial_state(InitialStateSpec(rS, "microcanonical", w.E_B, w.Delta), m, bd)
    A = embed_system_observable(PAULI[axis], m)
    return m, bd, w, rS, rho, A


def test_criterion_4_truncation_suite():
    T_grid = np.geomspace(0.1, 100.0, 20)
    times = np.linspace(0.0, 100.0, 50)
    failures = []
    checked = skipped = 0
    for L in (6, 7, 8):
        for gamma in (1.1, 0.05):
            for state, axis in (("up", "z"), ("plus", "x")):
                m, bd, w, rS, rho, A = _bath_instance(L, gamma, state, axis)
                dec = diagonalize(m.H)
                re, ae = to_eigenbasis(rho, dec), to_eigenbasis(A, dec)
                fit = fit_density_of_states(bd)
                grid = make_time_grid(T_grid[-1], float(np.ptp(dec.energies)), 2000)
                trace = expectation_trace(re, ae, dec, grid)
                exact = np.array([time_average(trace, T) for T in T_grid])
                for K in (5.0, 10.0, 20.0):
                    rep = truncate(m, rho, w, K, A, fit, rS, dec, re)
                    tag = f"L={L} gamma={gamma} {state}/{axis} K={K:g}"
                    if not rep.precondition_holds:
                        skipped += 1
                        continue
                    checked += 1
                    if rep.trace_dist > 2 / K:
                        failures.append(f"{tag}: trace distance {rep.trace_dist:.3g} > 2/K")
                    close = truncated_closeness(rep, re, ae, dec, times)
                    if close.max() > 1 / K ** 2:
                        failures.append(f"{tag}: truncated evolution differs by {close.max():.3g} > 1/K^2")
                    if rep.d_trunc_exact > rep.d_trunc_count_bound:
                        failures.append(f"{tag}: d_trunc {rep.d_trunc_exact} above count bound")
                    for eps in (0.05, 0.5, 2.0):
                        res = theorem4_bound(m, rho, w, K, eps, T_grid, A, fit, rS, dec, rep)
                        if np.any(res.bound < exact - SLACK):
                            failures.append(f"{tag} eps={eps}: exact average above bound")
    _report(4, failures, f"{checked} (instance, K) cases checked, {skipped} skipped by the leakage precondition")


def test_criterion_5_haar_typicality():
    m = ising_ring(8)
    bd = diagonalize(m.h_bath)
    w = central_window(bd)
    t0 = time.perf_counter()
    rep = haar_typicality(m, w, 200, 2024, 20.0, system_state("plus"), PAULI["x"], bath_decomp=bd)
    elapsed = time.perf_counter() - t0
    failures = [f"{rep.violations} grid times violate the bound"] if rep.violations else []
    margin = float(np.min(rep.bound_curve - rep.mean_curve))
    _report(
        5,
        failures,
        f"200 samples, d_B^window={rep.d_B_window}, {rep.times.size} grid times, min margin {margin:.3e}, {elapsed:.1f}s",
    )


def test_criterion_6_oracle_cross_checks():
    rng = np.random.default_rng(6)
    failures = []
    evo_err = 0.0
    for _ in range(10):
        d = int(rng.integers(2, 17))
        H, A, rho = random_hermitian(rng, d), random_hermitian(rng, d), random_density(rng, d)
        dec = diagonalize(H)
        times = rng.uniform(0, 30, 50)
        tr = expectation_trace(to_eigenbasis(rho, dec), to_eigenbasis(A, dec), dec, times)
        evo_err = max(evo_err, float(np.abs(tr.expectation - expectation_by_conjugation(rho, A, dec, times)).max()))
    if evo_err > 1e-9:
        failures.append(f"evolution routes differ by {evo_err:.3g}")

    xi_mismatch = 0
    for _ in range(200):
        lattice = rng.random() < 0.5
        values = rng.integers(-20, 20, 50) / 4 if lattice else rng.normal(size=50)
        dist = GapDistribution.from_atoms(values, rng.random(50))
        for x in rng.uniform(0, 3, 5).tolist() + [0.0, 0.25, 0.5]:
            if abs(xi(dist, x) - xi_bruteforce(dist.gaps, dist.probs, x)) > 1e-12:
                xi_mismatch += 1
    if xi_mismatch:
        failures.append(f"{xi_mismatch} xi mismatches")

    rel_err = 0.0
    for _ in range(10):
        d = int(rng.integers(2, 17))
        H, A, rho = random_hermitian(rng, d), random_hermitian(rng, d), random_density(rng, d)
        dec = diagonalize(H)
        re, ae = to_eigenbasis(rho, dec), to_eigenbasis(A, dec)
        dist = build_gap_distribution(re, ae, dec)
        for T in (0.3, 3.0, 30.0):
            q = exact_time_average(re, ae, dec, T)
            s = time_average_spectral(dist, T)
            rel_err = max(rel_err, abs(q - s) / s)
    if rel_err > 1e-6:
        failures.append(f"quadrature vs spectral relative error {rel_err:.3g}")
    _report(6, failures, f"evolution max err {evo_err:.2e}; xi mismatches {xi_mismatch}/1600; averages max rel err {rel_err:.2e}")


def test_criterion_7_single_spin_sentinel():
    m = free_spin(1, omega=1.0)
    dec = diagonalize(m.H)
    dist = build_gap_distribution(to_eigenbasis(system_state("plus"), dec), to_eigenbasis(PAULI["x"], dec), dec)
    eps = np.concatenate((np.geomspace(1e-6, 1e3, 400), [1.0, 1.999999, 2.0, 3.999, 4.0]))
    _, delta = a_delta(dist, eps)
    failures = []
    if np.any(delta < 0.5):
        failures.append(f"delta below 1/2 at eps={eps[delta < 0.5][:3].tolist()}")
    below = eps < 2.0
    if not np.all(delta[below] == 0.5):
        failures.append("delta not exactly 1/2 below eps = 2 Omega")
    _report(7, failures, f"gaps {dist.gaps.tolist()}, delta in [{delta.min()}, {delta.max()}] over {eps.size} eps values")


if __name__ == "__main__":
    import sys

    import conftest

    code = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                code = 1
    for n in sorted(conftest.ACCEPTANCE_LINES):
        print(conftest.ACCEPTANCE_LINES[n])
    sys.exit(code)
