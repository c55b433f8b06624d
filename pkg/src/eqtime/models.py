"""Dense spin-chain models split into a one-spin system and a bath.

Site 1 is always the system and is the leftmost tensor factor, so every
full-space operator is laid out as ``system (x) bath`` with ``d_S = 2`` and
``d_B = 2**(L-1)``.

The Hamiltonians are

.. math ::
    H = \\Omega \\sum_l \\sigma^z_l + \\Omega \\sum_l K_l \\sigma^x_l \\sigma^x_{l+1}

with periodic closure ``sigma_{L+1} = sigma_1``.  For the uniform ring
``K_l = gamma``; for the disordered ring ``K_l ~ Normal(gamma, w)``.

Random couplings are drawn with ``numpy.random.default_rng(seed)``, i.e. the
PCG64 bit generator followed by numpy's ziggurat standard-normal sampler, and
the drawn values are stored on the model so they can always be replayed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Optional

import numpy as np

__all__ = [
    "PAULI",
    "EmptyWindowError",
    "SystemBathModel",
    "InitialStateSpec",
    "pauli_site",
    "ising_ring",
    "random_ring",
    "free_spin",
    "embed_system_observable",
    "build_initial_state",
    "haar_bath_vector",
    "system_state",
]

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

RNG_ALGORITHM = "numpy PCG64 + ziggurat standard normal"


class EmptyWindowError(ValueError):
    """Raised when an energy window holds no bath levels."""


def _kron_all(ops):
    return reduce(np.kron, ops)


def pauli_site(L: int, site: int, axis: str) -> np.ndarray:
    """Pauli matrix ``axis`` acting on spin ``site`` (1-based) of ``L`` spins."""
    if not 1 <= site <= L:
        raise ValueError(f"site must lie in 1..{L}, got {site}")
    try:
        p = PAULI[axis]
    except KeyError:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}") from None
    ops = [np.eye(2, dtype=complex)] * L
    ops[site - 1] = p
    return _kron_all(ops)


@dataclass(frozen=True)
class SystemBathModel:
    """A Hamiltonian ``H = H_S + H_B + H_I`` on ``d_S * d_B`` dimensions.

    ``h_system`` and ``h_bath`` are the factor-space blocks; ``H_S`` and
    ``H_B`` are the same operators embedded in the full space.
    """

    L: int
    d_S: int
    d_B: int
    h_system: np.ndarray
    h_bath: np.ndarray
    H_I: np.ndarray
    omega: float
    couplings: np.ndarray
    description: str
    params: dict = field(default_factory=dict)

    @property
    def H_S(self) -> np.ndarray:
        return np.kron(self.h_system, np.eye(self.d_B))

    @property
    def H_B(self) -> np.ndarray:
        return np.kron(np.eye(self.d_S), self.h_bath)

    @property
    def H(self) -> np.ndarray:
        return self.H_S + self.H_B + self.H_I

    @property
    def dim(self) -> int:
        return self.d_S * self.d_B

    def norm_HS(self) -> float:
        return float(np.linalg.norm(self.h_system, 2))

    def norm_HI(self) -> float:
        if not np.any(self.H_I):
            return 0.0
        return float(np.linalg.norm(self.H_I, 2))


def _bond(L, a, b):
    return pauli_site(L, a, "x") @ pauli_site(L, b, "x")


def _ring(L, omega, couplings, description, params):
    if L < 2:
        raise ValueError(f"a ring needs L >= 2 spins, got {L}")
    d_B = 2 ** (L - 1)
    h_system = omega * PAULI["z"]

    # Bonds l -> l+1 (1-based); bond L closes the ring back to site 1.
    H_I = np.zeros((2 ** L, 2 ** L), dtype=complex)
    H_bath_full = np.zeros_like(H_I)
    for lam in range(1, L + 1):
        nxt = lam % L + 1
        term = omega * couplings[lam - 1] * _bond(L, lam, nxt)
        if lam == 1 or nxt == 1:
            H_I += term
        else:
            H_bath_full += term
    for lam in range(2, L + 1):
        H_bath_full += omega * pauli_site(L, lam, "z")

    # H_bath_full = 1_S (x) h_bath; read the block off the |up> sector.
    h_bath = H_bath_full[:d_B, :d_B].copy()
    return SystemBathModel(
        L=L,
        d_S=2,
        d_B=d_B,
        h_system=h_system,
        h_bath=h_bath,
        H_I=H_I,
        omega=float(omega),
        couplings=np.asarray(couplings, dtype=float),
        description=description,
        params=params,
    )


def ising_ring(L: int, omega: float = 1.0, gamma: float = 1.1) -> SystemBathModel:
    """Uniform transverse-field Ising ring with coupling ``gamma * omega``.

    For ``L = 2`` the periodic sum visits the single bond twice, so the
    coupling is effectively doubled.
    """
    couplings = np.full(L, float(gamma))
    return _ring(
        L,
        omega,
        couplings,
        f"ising_ring(L={L}, omega={omega}, gamma={gamma})",
        {"kind": "ising_ring", "L": L, "omega": omega, "gamma": gamma},
    )


def random_ring(
    L: int, omega: float = 1.0, gamma_mean: float = 1.0, width: float = 0.2, seed: int = 0
) -> SystemBathModel:
    """Ising ring with Gaussian couplings ``K_l ~ Normal(gamma_mean, width)``.

    The Gaussian is not truncated, so negative couplings can occur.
    """
    if width < 0:
        raise ValueError("width must be non-negative")
    if L < 2:
        raise ValueError(f"a ring needs L >= 2 spins, got {L}")
    rng = np.random.default_rng(seed)
    couplings = gamma_mean + width * rng.standard_normal(L)
    return _ring(
        L,
        omega,
        couplings,
        f"random_ring(L={L}, omega={omega}, gamma={gamma_mean}, w={width}, seed={seed})",
        {
            "kind": "random_ring",
            "L": L,
            "omega": omega,
            "gamma": gamma_mean,
            "width": width,
            "seed": seed,
            "rng": RNG_ALGORITHM,
            "couplings": couplings.tolist(),
        },
    )


def free_spin(L: int = 1, omega: float = 1.0, gamma: float = 1.1) -> SystemBathModel:
    """System spin ``omega * sigma_z`` decoupled from an open Ising chain bath.

    ``L = 1`` gives a bare spin with a one-dimensional trivial bath.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    n_bath = L - 1
    d_B = 2 ** n_bath
    if n_bath == 0:
        h_bath = np.zeros((1, 1), dtype=complex)
    else:
        h_bath = sum(omega * pauli_site(n_bath, s, "z") for s in range(1, n_bath + 1))
        for s in range(1, n_bath):
            h_bath = h_bath + omega * gamma * _bond(n_bath, s, s + 1)
    return SystemBathModel(
        L=L,
        d_S=2,
        d_B=d_B,
        h_system=omega * PAULI["z"],
        h_bath=np.asarray(h_bath, dtype=complex),
        H_I=np.zeros((2 * d_B, 2 * d_B), dtype=complex),
        omega=float(omega),
        couplings=np.full(max(n_bath - 1, 0), float(gamma)),
        description=f"free_spin(L={L}, omega={omega}, gamma={gamma})",
        params={"kind": "free_spin", "L": L, "omega": omega, "gamma": gamma},
    )


def embed_system_observable(A_S: np.ndarray, model: SystemBathModel) -> np.ndarray:
    """Return ``A_S (x) 1_B``."""
    A_S = np.asarray(A_S)
    if A_S.shape != (model.d_S, model.d_S):
        raise ValueError(f"system observable must be {model.d_S}x{model.d_S}, got {A_S.shape}")
    return np.kron(A_S, np.eye(model.d_B))


def system_state(name) -> np.ndarray:
    """Named single-qubit density matrices: up, down, plus, minus, mixed.

    ``up`` is the +1 eigenvector of sigma_z.  An explicit 2x2 matrix is passed
    through after validation.
    """
    if not isinstance(name, str):
        rho = np.asarray(name, dtype=complex)
        _check_density(rho)
        return rho
    vecs = {
        "up": [1, 0],
        "down": [0, 1],
        "plus": [1, 1],
        "minus": [1, -1],
        "plus_y": [1, 1j],
    }
    if name == "mixed":
        return np.eye(2, dtype=complex) / 2
    if name not in vecs:
        raise ValueError(f"unknown system state {name!r}")
    v = np.asarray(vecs[name], dtype=complex)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def _check_density(rho, tol=1e-12):
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix must be Hermitian")
    if abs(np.trace(rho).real - 1) > tol:
        raise ValueError("density matrix must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix must be positive semidefinite")


@dataclass(frozen=True)
class InitialStateSpec:
    """Product initial state ``rho_S (x) rho_B``.

    ``bath_kind`` is ``"mixed"`` (maximally mixed), ``"microcanonical"``
    (normalized projector onto bath levels in ``[center - width/2,
    center + width/2]``) or ``"haar"`` (a Haar-random pure state in that
    window, drawn from ``seed``).
    """

    system_state: np.ndarray
    bath_kind: str = "mixed"
    center: Optional[float] = None
    width: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        _check_density(np.asarray(self.system_state))
        if self.bath_kind not in ("mixed", "microcanonical", "haar"):
            raise ValueError(f"unknown bath kind {self.bath_kind!r}")
        if self.bath_kind != "mixed" and (self.center is None or self.width is None):
            raise ValueError(f"{self.bath_kind} bath needs center and width")


def _window_columns(bath_spectral, center, width):
    E = bath_spectral.energies
    lo, hi = center - width / 2, center + width / 2
    tol = bath_spectral.degeneracy_tol
    idx = np.flatnonzero((E >= lo - tol) & (E <= hi + tol))
    if idx.size == 0:
        nearest = E[np.argsort(np.abs(E - center))[:3]]
        raise EmptyWindowError(
            f"empty microcanonical window [{lo:.6g}, {hi:.6g}]; "
            f"nearest bath levels: {np.sort(nearest).tolist()}"
        )
    return bath_spectral.vectors[:, idx]


def haar_bath_vector(bath_spectral, center, width, rng) -> np.ndarray:
    """Haar-random unit vector in the span of bath levels inside the window."""
    cols = _window_columns(bath_spectral, center, width)
    n = cols.shape[1]
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    z /= np.linalg.norm(z)
    return cols @ z


def build_initial_state(spec: InitialStateSpec, model: SystemBathModel, bath_spectral=None) -> np.ndarray:
    """Full-space density matrix for ``spec`` on ``model``.

    ``bath_spectral`` is the decomposition of ``model.h_bath``; it is computed
    on demand when a window is needed and none is supplied.
    """
    rho_S = np.asarray(spec.system_state, dtype=complex)
    if rho_S.shape != (model.d_S, model.d_S):
        raise ValueError("system state dimension does not match the model")
    if spec.bath_kind == "mixed":
        rho_B = np.eye(model.d_B, dtype=complex) / model.d_B
    else:
        if bath_spectral is None:
            from .spectral import diagonalize

            bath_spectral = diagonalize(model.h_bath)
        if spec.bath_kind == "microcanonical":
            cols = _window_columns(bath_spectral, spec.center, spec.width)
            rho_B = cols @ cols.conj().T / cols.shape[1]
        else:
            rng = np.random.default_rng(spec.seed)
            phi = haar_bath_vector(bath_spectral, spec.center, spec.width, rng)
            rho_B = np.outer(phi, phi.conj())
    return np.kron(rho_S, rho_B)
