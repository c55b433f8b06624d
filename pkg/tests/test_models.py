import numpy as np
import pytest

from eqtime.models import (
    PAULI,
    EmptyWindowError,
    InitialStateSpec,
    build_initial_state,
    embed_system_observable,
    free_spin,
    haar_bath_vector,
    ising_ring,
    pauli_site,
    random_ring,
    system_state,
)
from eqtime.spectral import diagonalize


def test_pauli_site_places_operator():
    op = pauli_site(3, 2, "x")
    expected = np.kron(np.kron(np.eye(2), PAULI["x"]), np.eye(2))
    assert np.allclose(op, expected)


@pytest.mark.parametrize("site", [0, 4])
def test_pauli_site_rejects_bad_site(site):
    with pytest.raises(ValueError):
        pauli_site(3, site, "z")


def test_two_site_ring_spectrum_matches_blocks():
    # The two periodic bonds coincide for L = 2, so the coupling is 2*gamma.
    gamma = 1.1
    m = ising_ring(2, omega=1.0, gamma=gamma)
    E = np.linalg.eigvalsh(m.H)
    a = 2 * np.sqrt(1 + gamma ** 2)
    assert np.allclose(E, [-a, -2 * gamma, 2 * gamma, a])


@pytest.mark.parametrize("L", [3, 4, 5])
def test_ring_decomposes_into_parts(L):
    m = ising_ring(L, gamma=0.7)
    H = sum(pauli_site(L, s, "z") for s in range(1, L + 1))
    H = H + sum(0.7 * pauli_site(L, s, "x") @ pauli_site(L, s % L + 1, "x") for s in range(1, L + 1))
    assert np.allclose(m.H, H)
    # H_B acts trivially on the system spin, H_I contains both bonds through site 1
    assert np.allclose(m.H_B, np.kron(np.eye(2), m.h_bath))
    bonds = 0.7 * (pauli_site(L, 1, "x") @ pauli_site(L, 2, "x") + pauli_site(L, L, "x") @ pauli_site(L, 1, "x"))
    assert np.allclose(m.H_I, bonds)
    assert m.norm_HS() == pytest.approx(1.0)


def test_ring_conserves_parity():
    L = 4
    m = ising_ring(L)
    P = pauli_site(L, 1, "z")
    for s in range(2, L + 1):
        P = P @ pauli_site(L, s, "z")
    assert np.allclose(P @ m.H, m.H @ P)


def test_random_ring_reproducible_and_recorded():
    a = random_ring(4, seed=3)
    b = random_ring(4, seed=3)
    c = random_ring(4, seed=4)
    assert np.array_equal(a.couplings, b.couplings)
    assert not np.array_equal(a.couplings, c.couplings)
    assert a.params["couplings"] == a.couplings.tolist()
    expected = 1.0 + 0.2 * np.random.default_rng(3).standard_normal(4)
    assert np.allclose(a.couplings, expected)


def test_free_spin_is_decoupled():
    m = free_spin(1)
    assert m.dim == 2 and m.d_B == 1
    assert m.norm_HI() == 0
    m3 = free_spin(3)
    assert np.allclose(m3.H_I, 0)
    assert m3.d_B == 4


def test_embed_system_observable():
    m = ising_ring(3)
    A = embed_system_observable(PAULI["x"], m)
    assert np.allclose(A, pauli_site(3, 1, "x"))
    with pytest.raises(ValueError):
        embed_system_observable(np.eye(3), m)


def test_system_states_are_densities():
    for name in ("up", "down", "plus", "minus", "plus_y", "mixed"):
        rho = system_state(name)
        assert np.isclose(np.trace(rho).real, 1)
        assert np.linalg.eigvalsh(rho).min() > -1e-12
    assert np.allclose(system_state("up"), [[1, 0], [0, 0]])
    with pytest.raises(ValueError):
        system_state("sideways")


def test_initial_state_kinds(rng):
    m = ising_ring(4)
    bd = diagonalize(m.h_bath)
    mixed = build_initial_state(InitialStateSpec(system_state("up")), m)
    assert np.allclose(mixed, np.kron(system_state("up"), np.eye(8) / 8))
    E = bd.energies
    mc = build_initial_state(InitialStateSpec(system_state("up"), "microcanonical", 0.0, 2.0), m, bd)
    inside = np.count_nonzero(np.abs(E) <= 1.0 + 1e-9)
    assert np.isclose(np.trace(mc).real, 1)
    assert np.isclose(np.trace(mc @ mc).real, 1 / inside)
    h1 = build_initial_state(InitialStateSpec(system_state("up"), "haar", 0.0, 2.0, seed=5), m, bd)
    h2 = build_initial_state(InitialStateSpec(system_state("up"), "haar", 0.0, 2.0, seed=5), m, bd)
    assert np.array_equal(h1, h2)
    assert np.isclose(np.trace(h1 @ h1).real, 1)


def test_haar_vector_lives_in_window(rng):
    m = ising_ring(5)
    bd = diagonalize(m.h_bath)
    phi = haar_bath_vector(bd, 0.0, 3.0, rng)
    coeff = bd.vectors.conj().T @ phi
    outside = np.abs(bd.energies) > 1.5 + 1e-9
    assert np.allclose(coeff[outside], 0, atol=1e-12)
    assert np.isclose(np.linalg.norm(phi), 1)


def test_empty_window_lists_nearest_levels():
    m = ising_ring(3)
    bd = diagonalize(m.h_bath)
    with pytest.raises(EmptyWindowError, match="nearest"):
        build_initial_state(InitialStateSpec(system_state("up"), "microcanonical", 100.0, 0.1), m, bd)


def test_initial_spec_validation():
    with pytest.raises(ValueError):
        InitialStateSpec(np.eye(2), "mixed")
    with pytest.raises(ValueError):
        InitialStateSpec(system_state("up"), "microcanonical")
    with pytest.raises(ValueError):
        InitialStateSpec(system_state("up"), "canonical", 0.0, 1.0)
