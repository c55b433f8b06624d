import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqtime.bounds import (
    PI,
    TIGHT,
    NoSecondOrderMotion,
    PreconditionViolated,
    TruncationWindowEmpty,
    _sinh_ratio,
    best_eps,
    bound_report,
    central_window,
    commutator_value,
    default_window,
    microcanonical_window,
    proposition1_bound,
    system_commutator_value,
    t_eq,
    theorem3_bound,
    theorem4_bound,
    truncate,
    truncated_closeness,
)
from eqtime.dynamics import exact_time_average, time_average_spectral
from eqtime.gaps import GapDistribution, a_delta, build_gap_distribution, xi
from eqtime.models import (
    PAULI,
    EmptyWindowError,
    InitialStateSpec,
    build_initial_state,
    embed_system_observable,
    free_spin,
    ising_ring,
    system_state,
)
from eqtime.spectral import diagonalize, fit_density_of_states, spectral_norm, to_eigenbasis

from conftest import random_density, random_hermitian


def _instance(seed, d):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, d)
    A = random_hermitian(rng, d)
    rho = random_density(rng, d)
    dec = diagonalize(H)
    return H, A, rho, dec, to_eigenbasis(rho, dec), to_eigenbasis(A, dec)


def test_tight_constant_value():
    assert TIGHT == pytest.approx(0.98876 * np.pi, rel=1e-4)


def test_proposition1_trivial_cases():
    empty = GapDistribution.from_atoms([], [])
    assert proposition1_bound(empty, 1.0) == 0
    dist = GapDistribution.from_atoms([-1.0, 1.0, 1.5], [0.2, 0.5, 0.3])
    # for T beyond 1/min spacing only the largest atom fits
    assert proposition1_bound(dist, 1e6, Q=2.0) == pytest.approx(PI * 4 * 0.5)
    assert proposition1_bound(dist, 1e6, tight=True, Q=2.0) == pytest.approx(TIGHT * 4 * 0.5)
    with pytest.raises(ValueError):
        proposition1_bound(dist, 0.0)


@pytest.mark.parametrize("seed", range(4))
def test_proposition1_above_exact_average(seed):
    H, A, rho, dec, re, ae = _instance(seed, 16)
    dist = build_gap_distribution(re, ae, dec)
    for T in (1.0, 10.0, 100.0):
        exact = exact_time_average(re, ae, dec, T)
        assert proposition1_bound(dist, T) >= exact - 1e-10
        assert proposition1_bound(dist, T, tight=True) >= exact - 1e-10


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), d=st.integers(3, 12), eps=st.floats(0.01, 5.0))
def test_theorem3_ordering_and_monotonicity(seed, d, eps):
    H, A, rho, dec, re, ae = _instance(seed, d)
    dist = build_gap_distribution(re, ae, dec)
    comm = commutator_value(re, ae, dec)
    Ts = np.geomspace(0.01, 1000, 20)
    s, c = theorem3_bound(dist, eps, Ts, comm)
    assert np.all(s <= c * (1 + 1e-10))
    assert np.all(np.diff(s) <= 1e-12)
    assert np.all(proposition1_bound(dist, Ts) <= s * (1 + 1e-10))


def test_theorem3_zero_commutator_is_infinite():
    dist = GapDistribution.from_atoms([-1.0, 1.0], [0.5, 0.5], symmetric=True)
    s, c = theorem3_bound(dist, 0.5, 2.0, 0.0, norm_A=1.0)
    assert np.isfinite(s) and c == np.inf


def test_commutator_value_matches_matrix_form():
    H, A, rho, dec, re, ae = _instance(9, 7)
    direct = np.trace((rho @ H - H @ rho) @ (H @ A - A @ H)).real
    assert commutator_value(re, ae, dec) == pytest.approx(direct, rel=1e-10)


def test_t_eq_formula_and_errors():
    # Q = sqrt(2), a = 1, ||A|| = 1: T_eq = 2^(5/4) pi / sqrt|comm|
    assert t_eq(1.0, 1.0, np.sqrt(2), 3.0) == pytest.approx(2 ** 1.25 * np.pi / np.sqrt(3.0))
    with pytest.raises(NoSecondOrderMotion):
        t_eq(1.0, 1.0, 1.0, 0.0)


def _t_eq_for(H, A, rho, eps):
    dec = diagonalize(H)
    re, ae = to_eigenbasis(rho, dec), to_eigenbasis(A, dec)
    dist = build_gap_distribution(re, ae, dec)
    a, _ = a_delta(dist, eps)
    return t_eq(a, spectral_norm(A), dist.Q, commutator_value(re, ae, dec))


def test_t_eq_invariances():
    H, A, rho, *_ = _instance(11, 8)
    base = _t_eq_for(H, A, rho, 0.3)
    assert _t_eq_for(H, 3.7 * A, rho, 0.3) == pytest.approx(base, rel=1e-10)
    assert _t_eq_for(H + 5.0 * np.eye(8), A, rho, 0.3) == pytest.approx(base, rel=1e-10)
    assert _t_eq_for(2.0 * H, A, rho, 0.6) == pytest.approx(base / 2, rel=1e-10)


def test_system_commutator_equals_full_for_system_observable():
    m = ising_ring(5, gamma=0.4)
    bd = diagonalize(m.h_bath)
    w = default_window(bd)
    rho = build_initial_state(InitialStateSpec(system_state("plus"), "microcanonical", w.E_B, w.Delta), m, bd)
    A = embed_system_observable(PAULI["x"], m)
    dec = diagonalize(m.H)
    full = commutator_value(to_eigenbasis(rho, dec), to_eigenbasis(A, dec), dec)
    assert system_commutator_value(m, rho, A) == pytest.approx(full, rel=1e-9)


def test_bound_report_serialises():
    H, A, rho, dec, re, ae = _instance(3, 6)
    r = bound_report(re, ae, dec, 0.5, np.geomspace(0.1, 10, 5))
    d = json.loads(json.dumps(r.to_dict()))
    assert d["Q"] == pytest.approx(r.Q)
    assert r.Q <= r.Q_purity_bound + 1e-12
    assert r.sigma_commutator <= r.sigma_spectral * (1 + 1e-10)
    assert r.bound_curve.shape == (5, 3)
    assert r.T_eq > 0


def test_best_eps_is_grid_minimum():
    H, A, rho, dec, re, ae = _instance(5, 8)
    dist = build_gap_distribution(re, ae, dec)
    grid = np.geomspace(0.01, 5, 30)
    eps, val = best_eps(dist, 10.0, eps_grid=grid)
    vals = [theorem3_bound(dist, e, 10.0, 0.0)[0] for e in grid]
    assert val == pytest.approx(min(vals))
    assert eps in grid


def test_windows():
    bd = diagonalize(ising_ring(6).h_bath)
    E = bd.energies
    w = default_window(bd)
    assert w.E_B == pytest.approx(np.median(E)) and w.Delta == pytest.approx(np.ptp(E) / 4)
    c = central_window(bd)
    assert c.Delta == pytest.approx(np.ptp(E) / 2)
    assert c.d_B_window == c.projector_B.rank >= 1
    with pytest.raises(EmptyWindowError):
        microcanonical_window(bd, 1e3, 0.1)


def _bath_setup(model, state="up", axis="z", window=central_window):
    bd = diagonalize(model.h_bath)
    w = window(bd)
    rS = system_state(state)
    rho = build_initial_state(InitialStateSpec(rS, "microcanonical", w.E_B, w.Delta), model, bd)
    A = embed_system_observable(PAULI[axis], model)
    return bd, w, rS, rho, A


def test_truncation_without_interaction_is_exact():
    m = free_spin(5)
    bd, w, rS, rho, A = _bath_setup(m, "plus", "x")
    rep = truncate(m, rho, w, 10.0, A)
    assert rep.eta == 0 and rep.eta_prime == 0
    assert rep.leakage == pytest.approx(0, abs=1e-12)
    assert rep.trace_dist == pytest.approx(0, abs=1e-12)
    assert rep.Q_trunc == pytest.approx(rep.Q)


def test_truncation_argument_errors():
    m = ising_ring(4, gamma=0.05)
    bd, w, rS, rho, A = _bath_setup(m)
    with pytest.raises(ValueError):
        truncate(m, rho, w, 1.0)
    far = dataclasses.replace(w, E_B=1e3)
    with pytest.raises(TruncationWindowEmpty):
        truncate(m, rho, far, 5.0)


@pytest.mark.parametrize("L,gamma", [(6, 0.05), (7, 0.02), (6, 1.1)])
def test_truncation_guarantees(L, gamma):
    m = ising_ring(L, gamma=gamma)
    bd, w, rS, rho, A = _bath_setup(m)
    dec = diagonalize(m.H)
    fit = fit_density_of_states(bd)
    for K in (5.0, 10.0, 20.0):
        rep = truncate(m, rho, w, K, A, fit, rS, dec)
        assert rep.precondition_holds
        assert rep.trace_dist <= 2 / K
        assert rep.d_trunc_exact <= rep.d_trunc_count_bound
        assert rep.Q_trunc <= rep.Q + 1e-12
        assert rep.Q2 <= rep.Q2_purity_route + 1e-10
        assert rep.Q2_purity_route <= rep.Q2_count_route + 1e-10
        json.dumps(rep.to_dict())


def test_precondition_violation_is_reported():
    m = ising_ring(4, gamma=0.05)
    bd, w, rS, rho, A = _bath_setup(m)
    rep = truncate(m, rho, w, 5.0, A)
    bad = dataclasses.replace(rep, leakage=0.5, precondition_holds=False)
    with pytest.raises(PreconditionViolated, match="gentle-measurement precondition violated"):
        bad.require_precondition()
    rep.require_precondition()


def test_truncated_evolution_stays_close():
    m = ising_ring(7, gamma=0.05)
    bd, w, rS, rho, A = _bath_setup(m)
    dec = diagonalize(m.H)
    re, ae = to_eigenbasis(rho, dec), to_eigenbasis(A, dec)
    for K in (5.0, 10.0):
        rep = truncate(m, rho, w, K, A, decomp=dec)
        close = truncated_closeness(rep, re, ae, dec, np.linspace(0, 50, 50))
        assert close.max() <= 1 / K ** 2


def test_theorem4_decreases_with_K_without_interaction():
    m = free_spin(5)
    bd, w, rS, rho, A = _bath_setup(m, "plus", "x")
    dec = diagonalize(m.H)
    vals = [theorem4_bound(m, rho, w, K, 0.5, 10.0, A, decomp=dec).bound for K in (2, 5, 20, 1e4)]
    assert np.all(np.diff(vals) < 0)
    re, ae = to_eigenbasis(rho, dec), to_eigenbasis(A, dec)
    dist = build_gap_distribution(re, ae, dec)
    limit = theorem3_bound(dist, 0.5, 10.0, commutator_value(re, ae, dec))[1]
    assert vals[-1] == pytest.approx(limit, rel=1e-3)


def test_theorem4_above_exact_on_ring():
    m = ising_ring(6, gamma=0.05)
    bd, w, rS, rho, A = _bath_setup(m)
    dec = diagonalize(m.H)
    re, ae = to_eigenbasis(rho, dec), to_eigenbasis(A, dec)
    Ts = np.geomspace(0.1, 100, 8)
    res = theorem4_bound(m, rho, w, 10.0, 0.2, Ts, A, fit_density_of_states(bd), rS, dec)
    exact = np.array([exact_time_average(re, ae, dec, T) for T in Ts])
    assert np.all(res.bound >= exact - 1e-10)
    assert np.all(res.bound <= res.bound_purity_route + 1e-10)
    alt = theorem4_bound(m, rho, w, 10.0, 0.2, Ts, A, decomp=dec, use_truncated=True)
    assert alt.distribution == "truncated"


def test_sinh_ratio_limits():
    assert _sinh_ratio(0.0, 3.0, 1.0) == pytest.approx(3.0)
    assert _sinh_ratio(1e-3, 3.0, 1.0) == pytest.approx(np.sinh(3e-3) / np.sinh(1e-3))
    assert _sinh_ratio(2.0, 3.0, 1.0) == pytest.approx(np.sinh(6.0) / np.sinh(2.0))
    assert _sinh_ratio(-2.0, 3.0, 1.0) == pytest.approx(np.sinh(6.0) / np.sinh(2.0))
    assert _sinh_ratio(300.0, 3.0, 1.0) == pytest.approx(np.exp(600.0))
