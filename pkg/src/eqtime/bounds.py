"""Upper bounds on the time-averaged weak distinguishability.

All bounds act on a :class:`~eqtime.gaps.GapDistribution`.  The basic bound
is ``c Q^2 xi(1/T)``; linearising ``xi(x) <= a x / sigma + delta`` gives the
``sigma``-form, and replacing ``sigma`` by its double-commutator lower bound
gives a form that needs no diagonalisation.  For a system coupled to a bath
in a microcanonical window, :func:`truncate` restricts the state to a widened
energy window of the full Hamiltonian and :func:`theorem4_bound` charges the
truncation error.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .gaps import GapDistribution, a_delta, build_gap_distribution, effective_dimension, omega_rank, sigma_spectral, xi
from .models import EmptyWindowError, SystemBathModel
from .spectral import (
    DensityFit,
    Projector,
    SpectralDecomposition,
    diagonalize,
    spectral_norm,
    to_eigenbasis,
    trace_distance,
    window_projector,
)

__all__ = [
    "PI",
    "TIGHT",
    "NoSecondOrderMotion",
    "PreconditionViolated",
    "TruncationWindowEmpty",
    "BoundReport",
    "MicrocanonicalWindow",
    "TruncationReport",
    "Theorem4Result",
    "proposition1_bound",
    "theorem3_bound",
    "commutator_value",
    "system_commutator_value",
    "t_eq",
    "bound_report",
    "microcanonical_window",
    "default_window",
    "central_window",
    "truncate",
    "truncated_closeness",
    "theorem4_bound",
    "best_eps",
]

PI = np.pi
# Sharper constant obtained by averaging against a smooth window instead of a box.
TIGHT = 5 * np.pi / (8 * (1 - np.exp(-1)))
DEFAULT_K = 10.0


class NoSecondOrderMotion(ValueError):
    """The double commutator vanishes, so the commutator route gives no time scale."""


class PreconditionViolated(RuntimeError):
    pass


class TruncationWindowEmpty(EmptyWindowError):
    pass


def _constant(tight: bool) -> float:
    return TIGHT if tight else PI


def proposition1_bound(dist: GapDistribution, T, tight: bool = False, Q: Optional[float] = None):
    """``c Q^2 xi(1/T)`` with ``c = pi`` or the tight constant."""
    T_arr = np.asarray(T, dtype=float)
    if np.any(T_arr <= 0):
        raise ValueError("T must be positive")
    Q = dist.Q if Q is None else Q
    if Q == 0:
        return np.zeros_like(T_arr) if np.ndim(T) else 0.0
    val = _constant(tight) * Q ** 2 * xi(dist, 1.0 / T_arr)
    return val if np.ndim(T) else float(val)


def theorem3_bound(
    dist: GapDistribution,
    eps: float,
    T,
    commutator: float,
    norm_A: Optional[float] = None,
    tight: bool = False,
    sigma: Optional[float] = None,
):
    """``(sigma_form, commutator_form)`` at fixed ``eps``.

    sigma form:       ``c Q^2 (a/(sigma T) + delta)``
    commutator form:  ``c a ||A||^(1/2) Q^(5/2) / (T sqrt|comm|) + c delta Q^2``

    The commutator form is infinite when ``comm == 0`` and ``Q > 0``.
    """
    T_arr = np.asarray(T, dtype=float)
    if np.any(T_arr <= 0):
        raise ValueError("T must be positive")
    Q = dist.Q
    if Q == 0:
        z = np.zeros_like(T_arr) if np.ndim(T) else 0.0
        return z, z
    if norm_A is None:
        norm_A = dist.norm_A
    c = _constant(tight)
    sigma = sigma_spectral(dist) if sigma is None else sigma
    a, delta = a_delta(dist, eps, sigma)
    s_form = c * Q ** 2 * (a / (sigma * T_arr) + delta)
    comm = abs(commutator)
    if comm == 0:
        c_form = np.full_like(T_arr, np.inf)
    else:
        c_form = c * a * np.sqrt(norm_A) * Q ** 2.5 / (T_arr * np.sqrt(comm)) + c * delta * Q ** 2
    if np.ndim(T):
        return s_form, c_form
    return float(s_form), float(c_form)


def commutator_value(rho0_eig: np.ndarray, A_eig: np.ndarray, decomp: SpectralDecomposition) -> float:
    """``Tr([[rho0, H], H] A) = sum_jk (E_j - E_k)^2 rho_jk A_kj`` in the energy basis."""
    G = decomp.gaps()
    return float(np.real(np.sum(G ** 2 * rho0_eig * A_eig.T)))


def system_commutator_value(model: SystemBathModel, rho0: np.ndarray, A: np.ndarray) -> float:
    """Double commutator with ``H_S + H_I`` only.

    Equal to the full-``H`` value whenever ``H_B`` commutes with both the
    state and the observable, e.g. for ``A_S (x) 1`` and a bath state diagonal
    in the bath energy basis.
    """
    Hs = model.H_S + model.H_I
    c1 = rho0 @ Hs - Hs @ rho0
    c2 = Hs @ A - A @ Hs
    return float(np.real(np.sum(c1 * c2.T)))


def t_eq(a: float, norm_A: float, Q: float, commutator: float, constant: float = PI) -> float:
    """``c a ||A||^(1/2) Q^(5/2) / sqrt|comm|``."""
    comm = abs(commutator)
    if comm == 0:
        raise NoSecondOrderMotion("double commutator vanishes: no second-order motion")
    return float(constant * a * np.sqrt(norm_A) * Q ** 2.5 / np.sqrt(comm))


@dataclass(frozen=True)
class BoundReport:
    Q: float
    Q_purity_bound: float
    sigma_spectral: float
    sigma_commutator: float
    commutator_value: float
    eps: float
    a: float
    delta: float
    T_eq: float
    T_grid: np.ndarray
    proposition1_curve: np.ndarray
    sigma_form_curve: np.ndarray
    commutator_form_curve: np.ndarray
    constant_variant: float
    d_eff: float
    norm_A: float
    discarded_mass: float = 0.0
    provenance: dict = field(default_factory=dict)

    @property
    def bound_curve(self) -> np.ndarray:
        """Columns ``T, sigma_form, commutator_form``."""
        return np.column_stack((self.T_grid, self.sigma_form_curve, self.commutator_form_curve))

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def bound_report(
    rho0_eig: np.ndarray,
    A_eig: np.ndarray,
    decomp: SpectralDecomposition,
    eps: float,
    T_grid,
    dist: Optional[GapDistribution] = None,
    tight: bool = False,
    provenance: Optional[dict] = None,
) -> BoundReport:
    """Evaluate every observable-dependent bound for one state and observable."""
    from .gaps import q_purity_bound

    if dist is None:
        dist = build_gap_distribution(rho0_eig, A_eig, decomp)
    T_grid = np.asarray(T_grid, dtype=float)
    norm_A = dist.norm_A
    comm = commutator_value(rho0_eig, A_eig, decomp)
    c = _constant(tight)
    if dist.equilibrated:
        a = delta = sig = sig_c = 0.0
        T_eq_val = 0.0
    else:
        sig = sigma_spectral(dist)
        sig_c = float(np.sqrt(abs(comm) / (dist.Q * norm_A)))
        a, delta = a_delta(dist, eps, sig)
        T_eq_val = t_eq(a, norm_A, dist.Q, comm, c) if comm != 0 else float("inf")
    s_form, c_form = theorem3_bound(dist, eps, T_grid, comm, norm_A, tight, sig or None)
    return BoundReport(
        Q=dist.Q,
        Q_purity_bound=q_purity_bound(rho0_eig, omega_rank(rho0_eig)),
        sigma_spectral=sig,
        sigma_commutator=sig_c,
        commutator_value=comm,
        eps=float(eps),
        a=float(a),
        delta=float(delta),
        T_eq=T_eq_val,
        T_grid=T_grid,
        proposition1_curve=np.asarray(proposition1_bound(dist, T_grid, tight)),
        sigma_form_curve=np.asarray(s_form),
        commutator_form_curve=np.asarray(c_form),
        constant_variant=c,
        d_eff=effective_dimension(rho0_eig),
        norm_A=norm_A,
        discarded_mass=dist.discarded_mass,
        provenance=dict(provenance or {}),
    )


@dataclass(frozen=True)
class MicrocanonicalWindow:
    E_B: float
    Delta: float
    d_B_window: int
    projector_B: Projector = field(repr=False)
    bath_energies: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"E_B": self.E_B, "Delta": self.Delta, "d_B_window": self.d_B_window}


def microcanonical_window(bath_decomp: SpectralDecomposition, E_B: float, Delta: float) -> MicrocanonicalWindow:
    P = window_projector(bath_decomp, E_B, Delta, basis_tag="H_B")
    if P.rank == 0:
        E = bath_decomp.energies
        nearest = np.sort(E[np.argsort(np.abs(E - E_B))[:3]])
        raise EmptyWindowError(
            f"empty microcanonical window centred at {E_B:.6g} with width {Delta:.6g}; "
            f"nearest bath levels: {nearest.tolist()}"
        )
    return MicrocanonicalWindow(float(E_B), float(Delta), P.rank, P, bath_decomp.energies)


def default_window(bath_decomp: SpectralDecomposition) -> MicrocanonicalWindow:
    """Centred at the median bath level, width a quarter of the bath span."""
    E = bath_decomp.energies
    return microcanonical_window(bath_decomp, float(np.median(E)), float(E[-1] - E[0]) / 4)


def central_window(bath_decomp: SpectralDecomposition) -> MicrocanonicalWindow:
    """The central half of the bath spectrum: midpoint centre, half-span width."""
    E = bath_decomp.energies
    return microcanonical_window(bath_decomp, float(E[0] + E[-1]) / 2, float(E[-1] - E[0]) / 2)


@dataclass(frozen=True)
class TruncationReport:
    K: float
    eta: float
    eta_prime: float
    window_full: tuple
    Pi: Projector = field(repr=False)
    leakage: float
    trace_dist: float
    precondition_holds: bool
    d_trunc_exact: int
    count_window: tuple
    bath_levels_counted: int
    d_trunc_count_bound: float
    d_trunc_exp_bound: float
    d_trunc_exp_loose: float
    purity: float
    Q: float
    Q_trunc: float
    Q2: float
    Q2_purity_route: float
    Q2_count_route: float
    Q2_thermal_bound: float
    fit_beta: float = float("nan")

    def require_precondition(self):
        if not self.precondition_holds:
            raise PreconditionViolated(
                f"gentle-measurement precondition violated: leakage {self.leakage:.3e} "
                f"> 1/(2K^2) = {1 / (2 * self.K ** 2):.3e}"
            )

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "Pi"}
        d["Pi_rank"] = self.Pi.rank
        return _jsonable(d)


def _sinh_ratio(beta, num_arg, den_arg):
    """``sinh(beta x) / sinh(beta y)`` with the ``beta -> 0`` limit ``x / y``."""
    if abs(beta) * max(num_arg, den_arg) < 1e-8:
        return num_arg / den_arg
    bx, by = abs(beta) * num_arg, abs(beta) * den_arg
    # exp(bx - by) * (1 - e^{-2bx}) / (1 - e^{-2by}) avoids overflow.
    return float(np.exp(bx - by) * (-np.expm1(-2 * bx)) / (-np.expm1(-2 * by)))


def truncate(
    model: SystemBathModel,
    rho0: np.ndarray,
    window: MicrocanonicalWindow,
    K: float = DEFAULT_K,
    A: Optional[np.ndarray] = None,
    fit: Optional[DensityFit] = None,
    rho_S: Optional[np.ndarray] = None,
    decomp: Optional[SpectralDecomposition] = None,
    rho0_eig: Optional[np.ndarray] = None,
) -> TruncationReport:
    """Project ``rho0`` onto full-Hamiltonian levels in the widened window.

    The window has centre ``E_B`` and width ``Delta + 2||H_S|| + eta`` with
    ``eta = sqrt(8 d_S) ||H_I|| K``.  ``A`` enables ``Q_trunc``; ``fit`` (an
    exponential density of states for the bath) enables the exponential
    dimension bounds; together with ``rho_S`` it enables the thermal ``Q_2``.
    """
    if not K > 1:
        raise ValueError(f"K must exceed 1, got {K}")
    if decomp is None:
        decomp = diagonalize(model.H)
    if rho0_eig is None:
        rho0_eig = to_eigenbasis(rho0, decomp)
    nHS, nHI = model.norm_HS(), model.norm_HI()
    d_S = model.d_S
    eta = np.sqrt(8 * d_S) * nHI * K
    eta_p = 2 * K * nHI
    width = window.Delta + 2 * nHS + eta
    Pi = window_projector(decomp, window.E_B, width, basis_tag="H")
    if Pi.rank == 0:
        raise TruncationWindowEmpty(
            f"truncation window empty: centre {window.E_B:.6g}, width {width:.6g}"
        )
    keep = np.zeros(decomp.dim, dtype=bool)
    keep[Pi.indices] = True
    rho_t_eig = np.where(keep[:, None] & keep[None, :], rho0_eig, 0)
    leakage = max(float(1 - np.real(np.trace(rho_t_eig))), 0.0)
    rho_trunc = Pi.columns @ rho_t_eig[np.ix_(Pi.indices, Pi.indices)] @ Pi.columns.conj().T
    tdist = trace_distance(rho0, rho_trunc)
    ok = leakage <= 1 / (2 * K ** 2) + 1e-12

    reach = (1 + np.sqrt(2 * d_S)) * K * nHI + nHS
    lo, hi = window.E_B - window.Delta / 2 - reach, window.E_B + window.Delta / 2 + reach
    E_bath = window.bath_energies if window.bath_energies is not None else np.linalg.eigvalsh(model.h_bath)
    tol = 1e-9 * max(np.abs(E_bath).max(), 1e-300)
    n_levels = int(np.count_nonzero((E_bath >= lo - tol) & (E_bath <= hi + tol)))
    pref = 1 / (1 - 1 / K)
    count_bound = d_S * pref * n_levels

    exp_bound = exp_loose = q2_thermal = beta = float("nan")
    if fit is not None:
        beta = fit.beta
        half = window.Delta / 2
        exp_bound = d_S * window.d_B_window * pref * _sinh_ratio(beta, half + reach, half)
        if beta > 0:
            exponent = beta * reach
            loose_den = -np.expm1(-beta * window.Delta)
            exp_loose = d_S * window.d_B_window * pref * np.exp(exponent) / loose_den
            if rho_S is not None:
                pur_S = float(np.real(np.sum(rho_S * rho_S.T)))
                q2_thermal = float(np.sqrt(d_S * pur_S * np.exp(exponent) * pref / loose_den) + 2 / K)

    purity = float(np.real(np.sum(rho0_eig * rho0_eig.T)))
    Q = Q_trunc = float("nan")
    if A is not None:
        A_eig = to_eigenbasis(A, decomp)
        norm_A = spectral_norm(A)
        Q = build_gap_distribution(rho0_eig, A_eig, decomp, norm_A=norm_A).Q
        Q_trunc = build_gap_distribution(rho_t_eig, A_eig, decomp, norm_A=norm_A).Q
    return TruncationReport(
        K=float(K),
        eta=float(eta),
        eta_prime=float(eta_p),
        window_full=(float(window.E_B), float(width)),
        Pi=Pi,
        leakage=leakage,
        trace_dist=tdist,
        precondition_holds=bool(ok),
        d_trunc_exact=Pi.rank,
        count_window=(float(lo), float(hi)),
        bath_levels_counted=n_levels,
        d_trunc_count_bound=float(count_bound),
        d_trunc_exp_bound=float(exp_bound),
        d_trunc_exp_loose=float(exp_loose),
        purity=purity,
        Q=float(Q),
        Q_trunc=float(Q_trunc),
        Q2=float(Q_trunc + 2 / K),
        Q2_purity_route=float(np.sqrt(purity * Pi.rank) + 2 / K),
        Q2_count_route=float(np.sqrt(purity * count_bound) + 2 / K),
        Q2_thermal_bound=q2_thermal,
        fit_beta=float(beta),
    )


def truncated_closeness(
    report: TruncationReport, rho0_eig: np.ndarray, A_eig: np.ndarray, decomp: SpectralDecomposition, times
) -> np.ndarray:
    """``|Tr((rho_t - Pi rho_t Pi) A)|^2 / (4 ||A||^2)`` at each time.

    ``Pi`` commutes with ``H``, so ``Pi rho_t Pi`` is the evolution of the
    truncated state and the difference evolves as one operator.
    """
    from .dynamics import expectation_trace

    keep = np.zeros(decomp.dim, dtype=bool)
    keep[report.Pi.indices] = True
    diff = np.where(keep[:, None] & keep[None, :], 0, rho0_eig)
    norm_A = spectral_norm(A_eig)
    tr = expectation_trace(diff, A_eig, decomp, times, norm_A)
    return tr.expectation ** 2 / (4 * norm_A ** 2)


@dataclass(frozen=True)
class Theorem4Result:
    eps: float
    a: float
    delta: float
    commutator_value: float
    T: np.ndarray
    bound: np.ndarray
    bound_purity_route: np.ndarray
    bound_count_route: np.ndarray
    bound_thermal_route: np.ndarray
    truncation: TruncationReport = field(repr=False)
    distribution: str = "untruncated"

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "truncation"}
        d["truncation"] = self.truncation.to_dict()
        return _jsonable(d)


def _thm4(a, delta, Q2, norm_A, comm, K, T):
    first = np.inf if comm == 0 else PI * a * np.sqrt(norm_A) * Q2 ** 2.5 / (T * np.sqrt(abs(comm)))
    return first + PI * delta * Q2 ** 2 + 18 / K ** 2


def theorem4_bound(
    model: SystemBathModel,
    rho0: np.ndarray,
    window: MicrocanonicalWindow,
    K: float,
    eps: float,
    T,
    A: np.ndarray,
    fit: Optional[DensityFit] = None,
    rho_S: Optional[np.ndarray] = None,
    decomp: Optional[SpectralDecomposition] = None,
    report: Optional[TruncationReport] = None,
    use_truncated: bool = False,
) -> Theorem4Result:
    """Bath bound ``pi a ||A||^(1/2) Q2^(5/2)/(T sqrt|comm|) + pi delta Q2^2 + 18/K^2``.

    The commutator always uses the untruncated ``rho0``.  ``a`` and ``delta``
    come from the untruncated gap distribution unless ``use_truncated``.
    """
    if np.any(np.asarray(T, dtype=float) <= 0):
        raise ValueError("T must be positive")
    if decomp is None:
        decomp = diagonalize(model.H)
    rho0_eig = to_eigenbasis(rho0, decomp)
    A_eig = to_eigenbasis(A, decomp)
    if report is None:
        report = truncate(model, rho0, window, K, A, fit, rho_S, decomp, rho0_eig)
    norm_A = spectral_norm(A)
    if use_truncated:
        keep = np.zeros(decomp.dim, dtype=bool)
        keep[report.Pi.indices] = True
        src = np.where(keep[:, None] & keep[None, :], rho0_eig, 0)
    else:
        src = rho0_eig
    dist = build_gap_distribution(src, A_eig, decomp, norm_A=norm_A)
    a, delta = a_delta(dist, eps) if not dist.equilibrated else (0.0, 0.0)
    comm = commutator_value(rho0_eig, A_eig, decomp)
    T_arr = np.asarray(T, dtype=float)
    K = report.K
    return Theorem4Result(
        eps=float(eps),
        a=float(a),
        delta=float(delta),
        commutator_value=comm,
        T=T_arr,
        bound=_thm4(a, delta, report.Q2, norm_A, comm, K, T_arr),
        bound_purity_route=_thm4(a, delta, report.Q2_purity_route, norm_A, comm, K, T_arr),
        bound_count_route=_thm4(a, delta, report.Q2_count_route, norm_A, comm, K, T_arr),
        bound_thermal_route=_thm4(a, delta, report.Q2_thermal_bound, norm_A, comm, K, T_arr),
        truncation=report,
        distribution="truncated" if use_truncated else "untruncated",
    )


def best_eps(
    dist: GapDistribution,
    T: float,
    commutator: Optional[float] = None,
    eps_grid=None,
    form: str = "sigma",
) -> tuple:
    """Heuristic: the grid ``eps`` minimising the chosen bound at fixed ``T``.

    Returns ``(eps, bound_value)``.  Not an optimiser; a finer grid can only
    lower the value.
    """
    from .gaps import default_eps_grid

    if dist.equilibrated:
        return float("nan"), 0.0
    eps_grid = default_eps_grid(dist) if eps_grid is None else np.asarray(eps_grid, float)
    if form not in ("sigma", "commutator"):
        raise ValueError("form must be 'sigma' or 'commutator'")
    if form == "commutator" and commutator is None:
        raise ValueError("commutator form needs the commutator value")
    sigma = sigma_spectral(dist)
    vals = np.array(
        [theorem3_bound(dist, e, T, commutator or 0.0, sigma=sigma)[0 if form == "sigma" else 1] for e in eps_grid]
    )
    i = int(np.argmin(vals))
    return float(eps_grid[i]), float(vals[i])
