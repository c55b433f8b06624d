"""Exact unitary dynamics of expectation values in the energy basis.

With ``M_jk = rho_jk A_kj`` the expectation value is

    Tr(rho_t A) = sum_jk M_jk exp(-i (E_j - E_k) t),

whose constant (zero-gap) part is ``Tr(omega A)``.  The oscillating part is
evaluated for many times at once as ``phase^T M conj(phase)`` so the cost per
time point is one dense matrix-vector product.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gaps import GapDistribution
from .models import SystemBathModel, _window_columns, embed_system_observable, haar_bath_vector
from .spectral import SpectralDecomposition, Projector, diagonalize, spectral_norm, to_eigenbasis

__all__ = [
    "EvolutionTrace",
    "TypicalityReport",
    "PairCapExceeded",
    "make_time_grid",
    "expectation_trace",
    "expectation_by_conjugation",
    "time_average",
    "exact_time_average",
    "time_average_spectral",
    "infinite_time_limit",
    "lorentzian_phase",
    "lorentzian_average",
    "distinguishability",
    "distinguishability_bound",
    "distinguishability_time_average",
    "haar_typicality",
]

PAIR_CAP = 4000
MAX_GRID_POINTS = 2_000_000


class PairCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class EvolutionTrace:
    """``Tr(rho_t A)`` and the weak distinguishability on a uniform time grid.

    ``end_slopes`` holds d/dt of ``weak_dist`` at the first and last grid
    point; :func:`time_average` uses it for an endpoint-corrected trapezoid.
    """

    times: np.ndarray
    expectation: np.ndarray
    equilibrium_value: float
    weak_dist: np.ndarray
    running_avg: np.ndarray
    norm_A: float
    end_slopes: Optional[tuple] = None

    def as_columns(self):
        return {
            "t": self.times,
            "expectation": self.expectation,
            "weak_dist": self.weak_dist,
            "running_avg": self.running_avg,
        }


def make_time_grid(T: float, max_gap: float, n_points: int = 2000) -> np.ndarray:
    """Uniform grid on ``[0, T]`` with spacing at most ``min(pi/(10 max_gap), T/1000)``."""
    if not T > 0:
        raise ValueError("T must be positive")
    h = T / 1000
    if max_gap > 0:
        h = min(h, np.pi / (10 * max_gap))
    n = max(int(n_points), int(np.ceil(T / h)) + 1)
    if n > MAX_GRID_POINTS:
        raise ValueError(f"time grid would need {n} points; use the spectral average instead")
    return np.linspace(0.0, T, n)


def _split_amplitudes(rho0_eig, A_eig, decomp):
    M = rho0_eig * A_eig.T
    deg = decomp.degenerate_mask()
    eq = complex(np.sum(M[deg]))
    M_osc = np.where(deg, 0, M)
    return M_osc, eq


def _oscillating_sum(M_osc, energies, times, chunk=512):
    """``sum_jk M_jk exp(-i (E_j - E_k) t)`` for every ``t``."""
    E = energies - energies.mean()
    out = np.empty(times.size, dtype=complex)
    for s in range(0, times.size, chunk):
        t = times[s : s + chunk]
        P = np.exp(-1j * np.outer(E, t))
        out[s : s + chunk] = np.sum(P * (M_osc @ P.conj()), axis=0)
    return out


def _cumulative_average(times, f):
    out = np.empty_like(f)
    out[0] = f[0]
    if times.size > 1:
        integral = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(times) * (f[1:] + f[:-1]))))
        out[1:] = integral[1:] / times[1:]
    return out


def expectation_trace(
    rho0_eig: np.ndarray,
    A_eig: np.ndarray,
    decomp: SpectralDecomposition,
    times,
    norm_A: Optional[float] = None,
) -> EvolutionTrace:
    """Evolve ``Tr(rho_t A)`` exactly at the requested times.

    ``running_avg`` is the cumulative trapezoid average of ``weak_dist`` from
    ``times[0]``; it is only a time average when the grid starts at 0.
    """
    times = np.asarray(times, dtype=float)
    if norm_A is None:
        norm_A = spectral_norm(A_eig)
    M_osc, eq = _split_amplitudes(rho0_eig, A_eig, decomp)
    z = _oscillating_sum(M_osc, decomp.energies, times)
    scale = 4 * norm_A ** 2
    wd = np.abs(z) ** 2 / scale
    slopes = None
    if times.size >= 2:
        G = decomp.gaps()
        dz = _oscillating_sum(-1j * G * M_osc, decomp.energies, times[[0, -1]])
        zz = z[[0, -1]]
        slopes = tuple(2 * np.real(zz.conj() * dz) / scale)
    return EvolutionTrace(
        times=times,
        expectation=np.real(eq + z),
        equilibrium_value=float(np.real(eq)),
        weak_dist=wd,
        running_avg=_cumulative_average(times, wd),
        norm_A=float(norm_A),
        end_slopes=slopes,
    )


def expectation_by_conjugation(rho0, A, decomp: SpectralDecomposition, times) -> np.ndarray:
    """Independent route: ``Tr(U rho0 U^dagger A)`` with ``U = V exp(-iEt) V^dagger``."""
    V = decomp.vectors
    out = np.empty(len(times))
    for n, t in enumerate(times):
        U = (V * np.exp(-1j * decomp.energies * t)) @ V.conj().T
        out[n] = np.real(np.trace(U @ rho0 @ U.conj().T @ A))
    return out


def time_average(trace: EvolutionTrace, T: Optional[float] = None) -> float:
    """``(1/T) * integral_0^T weak_dist dt`` by the trapezoid rule.

    Over the full grid the first Euler-Maclaurin endpoint term is subtracted,
    which makes the rule fourth order for these smooth oscillatory integrands.
    """
    t = trace.times
    f = trace.weak_dist
    if t[0] != 0:
        raise ValueError("time averages need a grid starting at t = 0")
    if T is None:
        T = float(t[-1])
    if T <= 0:
        raise ValueError("T must be positive")
    if T > t[-1] * (1 + 1e-12):
        raise ValueError("T lies beyond the trace")
    if abs(T - t[-1]) <= 1e-12 * T:
        h = np.diff(t)
        integral = float(np.sum(0.5 * h * (f[1:] + f[:-1])))
        if trace.end_slopes is not None and np.allclose(h, h[0], rtol=1e-9, atol=0):
            integral -= h[0] ** 2 / 12 * (trace.end_slopes[1] - trace.end_slopes[0])
        return integral / T
    n = np.searchsorted(t, T, side="right")
    tt = np.concatenate((t[:n], [T]))
    ff = np.concatenate((f[:n], [np.interp(T, t, f)]))
    return float(np.sum(0.5 * np.diff(tt) * (ff[1:] + ff[:-1]))) / T


def exact_time_average(
    rho0_eig, A_eig, decomp: SpectralDecomposition, T: float, n_points: int = 2000, norm_A=None
) -> float:
    """Quadrature ``<D>_T`` on a grid with the Nyquist guard."""
    max_gap = float(decomp.energies[-1] - decomp.energies[0])
    grid = make_time_grid(T, max_gap, n_points)
    return time_average(expectation_trace(rho0_eig, A_eig, decomp, grid, norm_A))


def _phi(x):
    """Finite-time average of ``exp(-i nu t)`` over ``[0, T]`` with ``x = nu T``."""
    out = np.ones_like(x, dtype=complex)
    small = np.abs(x) < 1e-8
    xs = x[~small]
    out[~small] = (1 - np.exp(-1j * xs)) / (1j * xs)
    out[small] = 1 - 0.5j * x[small]
    return out


def _pair_sum(dist: GapDistribution, kernel, pair_cap: int, block: int = 512) -> float:
    if dist.equilibrated:
        return 0.0
    if dist.n_atoms > pair_cap:
        raise PairCapExceeded(f"{dist.n_atoms} atoms exceeds pair_cap={pair_cap}")
    w = dist.atom_amplitudes
    g = dist.gaps
    total = 0.0
    for s in range(0, g.size, block):
        nu = g[s : s + block, None] - g[None, :]
        total += float(np.real(np.sum((w[s : s + block, None] * w.conj()[None, :]) * kernel(nu))))
    return total / 4


def time_average_spectral(dist: GapDistribution, T, pair_cap: int = PAIR_CAP):
    """Closed-form ``<D>_T = (1/4) sum v_a v_b^* phi((G_a - G_b) T)``."""
    Ts = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(Ts <= 0):
        raise ValueError("T must be positive")
    out = np.array([_pair_sum(dist, lambda nu, T=T_: _phi(nu * T_), pair_cap) for T_ in Ts])
    return out if np.ndim(T) else float(out[0])


def infinite_time_limit(dist: GapDistribution) -> float:
    """``lim_{T->inf} <D>_T = (1/4) sum_a |v_a|^2`` over merged atoms."""
    if dist.equilibrated:
        return 0.0
    return float(np.sum(np.abs(dist.atom_amplitudes) ** 2) / 4)


def lorentzian_phase(nu, T: float):
    """Lorentzian average of ``exp(-i nu t)`` centred at ``T/2`` with width ``T``."""
    nu = np.asarray(nu, dtype=float)
    return np.exp(-0.5j * nu * T - np.abs(nu) * T)


def lorentzian_average(dist: GapDistribution, T, pair_cap: int = PAIR_CAP):
    """Lorentzian time average of the weak distinguishability, in closed form."""
    Ts = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(Ts <= 0):
        raise ValueError("T must be positive")
    out = np.array([_pair_sum(dist, lambda nu, T=T_: lorentzian_phase(nu, T_), pair_cap) for T_ in Ts])
    return out if np.ndim(T) else float(out[0])


def _as_matrices(projectors):
    return [p.matrix if isinstance(p, Projector) else np.asarray(p) for p in projectors]


def _check_measurement(mats, tol=1e-10):
    d = mats[0].shape[0]
    if np.abs(sum(mats) - np.eye(d)).max() > tol:
        raise ValueError("projectors do not sum to the identity")
    for i, P in enumerate(mats):
        if np.abs(P @ P - P).max() > tol:
            raise ValueError(f"operator {i} is not a projector")
        for Q in mats[i + 1 :]:
            if np.abs(P @ Q).max() > tol:
                raise ValueError("projectors are not mutually orthogonal")


def distinguishability(projectors, rho_t, omega) -> float:
    """``(1/2) sum_i |Tr(P_i rho) - Tr(P_i omega)|`` for a complete projective measurement."""
    mats = _as_matrices(projectors)
    _check_measurement(mats)
    return 0.5 * sum(abs(np.trace(P @ (rho_t - omega)).real) for P in mats)


def distinguishability_bound(per_projector_avgs: Sequence[float], N: Optional[int] = None) -> float:
    """``sqrt(N) * sqrt(sum_i <D_{P_i}>_T)``."""
    vals = np.asarray(per_projector_avgs, float)
    N = vals.size if N is None else N
    return float(np.sqrt(N) * np.sqrt(vals.sum()))


def distinguishability_time_average(projectors, rho0_eig, decomp, T: float, n_points: int = 2000):
    """Quadrature ``<D_M>_T`` and the per-projector ``<D_{P_i}>_T``."""
    mats = _as_matrices(projectors)
    _check_measurement(mats)
    max_gap = float(decomp.energies[-1] - decomp.energies[0])
    grid = make_time_grid(T, max_gap, n_points)
    dm = np.zeros(grid.size)
    per = []
    for P in mats:
        tr = expectation_trace(rho0_eig, to_eigenbasis(P, decomp), decomp, grid, norm_A=1.0)
        dm += 0.5 * np.abs(tr.expectation - tr.equilibrium_value)
        per.append(time_average(tr))
    avg = float(np.sum(0.5 * np.diff(grid) * (dm[1:] + dm[:-1])) / T)
    return avg, per


@dataclass(frozen=True)
class TypicalityReport:
    n_samples: int
    seed: int
    d_S: int
    d_B_window: int
    correction: float
    times: np.ndarray
    per_sample_avg: np.ndarray
    mc_mean: float
    mc_stderr: float
    reference_avg: float
    mean_curve: np.ndarray
    stderr_curve: np.ndarray
    reference_curve: np.ndarray
    window: tuple = field(default=(0.0, 0.0))

    @property
    def bound_curve(self) -> np.ndarray:
        return self.reference_curve + self.correction + 3 * self.stderr_curve

    @property
    def violations(self) -> int:
        return int(np.count_nonzero(self.mean_curve > self.bound_curve))


def haar_typicality(
    model: SystemBathModel,
    window,
    n_samples: int,
    seed: int,
    T: float,
    rho_S: np.ndarray,
    A_S: np.ndarray,
    n_times: int = 2000,
    workers: int = 1,
    decomp: Optional[SpectralDecomposition] = None,
    bath_decomp: Optional[SpectralDecomposition] = None,
) -> TypicalityReport:
    """Monte Carlo over Haar-random pure bath states in a microcanonical window.

    ``window`` is a :class:`~eqtime.bounds.MicrocanonicalWindow` or a
    ``(center, width)`` pair on the bath spectrum.  Sample ``i`` draws from
    ``numpy.random.default_rng([seed, i])``, so each one is reproducible on
    its own and the result does not depend on ``workers``.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    center, width = (window.E_B, window.Delta) if hasattr(window, "E_B") else window
    if bath_decomp is None:
        bath_decomp = diagonalize(model.h_bath)
    if decomp is None:
        decomp = diagonalize(model.H)
    A = embed_system_observable(A_S, model)
    A_eig = to_eigenbasis(A, decomp)
    norm_A = spectral_norm(A_S)
    grid = make_time_grid(T, float(decomp.energies[-1] - decomp.energies[0]), n_times)

    cols = _window_columns(bath_decomp, center, width)
    d_win = cols.shape[1]
    rho_mc = np.kron(rho_S, cols @ cols.conj().T / d_win)
    ref = expectation_trace(to_eigenbasis(rho_mc, decomp), A_eig, decomp, grid, norm_A)

    def one(i):
        rng = np.random.default_rng([seed, i])
        phi = haar_bath_vector(bath_decomp, center, width, rng)
        rho0 = np.kron(rho_S, np.outer(phi, phi.conj()))
        tr = expectation_trace(to_eigenbasis(rho0, decomp), A_eig, decomp, grid, norm_A)
        return tr.weak_dist, time_average(tr)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n_samples)))
    else:
        results = [one(i) for i in range(n_samples)]
    curves = np.array([r[0] for r in results])
    avgs = np.array([r[1] for r in results])
    return TypicalityReport(
        n_samples=n_samples,
        seed=seed,
        d_S=model.d_S,
        d_B_window=d_win,
        correction=model.d_S / d_win,
        times=grid,
        per_sample_avg=avgs,
        mc_mean=float(avgs.mean()),
        mc_stderr=float(avgs.std(ddof=1) / np.sqrt(n_samples)),
        reference_avg=time_average(ref),
        mean_curve=curves.mean(axis=0),
        stderr_curve=curves.std(axis=0, ddof=1) / np.sqrt(n_samples),
        reference_curve=ref.weak_dist,
        window=(float(center), float(width)),
    )
