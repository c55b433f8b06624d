"""Distribution of energy gaps weighted by their dynamical significance.

For a state ``rho`` and observable ``A`` written in the energy basis, every
ordered pair of levels ``(j, k)`` with ``E_j != E_k`` contributes an amplitude

    v_jk = rho_jk * A_kj / ||A||

at gap ``G = E_j - E_k``.  ``Q = sum |v|`` and ``p = |v| / Q``.  The
concentration function ``xi(x)`` is the largest probability that fits in a
closed interval of length ``x``; ``a(eps)`` and ``delta(eps)`` linearise it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .spectral import SpectralDecomposition, spectral_norm

__all__ = [
    "GapDistribution",
    "XiProfile",
    "build_gap_distribution",
    "xi",
    "xi_bruteforce",
    "a_delta",
    "sigma_spectral",
    "sigma_commutator",
    "double_commutator_trace",
    "q_purity_bound",
    "omega_rank",
    "effective_dimension",
    "histogram",
    "count_local_maxima",
    "xi_profile",
    "binomial_distribution",
]

AMPLITUDE_FLOOR = 1e-14
GAP_AGG_RTOL = 1e-9


@dataclass(frozen=True)
class GapDistribution:
    """Merged atoms ``(gaps, probs)`` plus the raw per-pair amplitudes.

    ``atom_amplitudes`` holds the signed sum of ``v`` over the pairs merged
    into each atom, which is what the closed-form time averages need.  An
    empty distribution (``Q == 0``) means the state is already equilibrated
    with respect to the observable.
    """

    gaps: np.ndarray
    probs: np.ndarray
    Q: float
    gap_agg_tol: float
    atom_amplitudes: Optional[np.ndarray] = None
    pair_rows: Optional[np.ndarray] = field(default=None, repr=False)
    pair_cols: Optional[np.ndarray] = field(default=None, repr=False)
    pair_gaps: Optional[np.ndarray] = field(default=None, repr=False)
    amplitudes: Optional[np.ndarray] = field(default=None, repr=False)
    discarded_mass: float = 0.0
    norm_A: float = 1.0
    symmetric: bool = True

    @property
    def equilibrated(self) -> bool:
        return self.Q == 0 or self.gaps.size == 0

    @property
    def n_atoms(self) -> int:
        return int(self.gaps.size)

    @property
    def n_pairs(self) -> int:
        return 0 if self.amplitudes is None else int(self.amplitudes.size)

    @classmethod
    def from_atoms(cls, values, weights, symmetric: bool = False, agg_tol: float = 0.0):
        """Distribution over arbitrary atoms, e.g. a synthetic test distribution."""
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        keep = weights > 0
        values, weights = values[keep], weights[keep]
        total = float(weights.sum())
        if total == 0:
            return cls(np.empty(0), np.empty(0), 0.0, agg_tol, symmetric=symmetric)
        g, p, _ = _merge(values, weights, None, agg_tol)
        return cls(g, p / total, total, agg_tol, symmetric=symmetric)


def _merge(gaps, weights, amps, tol):
    """Sort and merge runs of atoms whose consecutive spacing is <= tol."""
    order = np.argsort(gaps, kind="stable")
    g = gaps[order]
    w = weights[order]
    new = np.empty(g.size, dtype=bool)
    if g.size:
        new[0] = True
        new[1:] = np.diff(g) > tol
    label = np.cumsum(new) - 1
    n = int(label[-1]) + 1 if g.size else 0
    wsum = np.bincount(label, weights=w, minlength=n)
    # Offsets from each cluster's first value keep exact duplicates exact.
    g0 = g[new]
    off = g - g0[label]
    counts = np.bincount(label, minlength=n)
    plain = np.bincount(label, weights=off, minlength=n) / np.maximum(counts, 1)
    wmean = np.bincount(label, weights=w * off, minlength=n) / np.where(wsum > 0, wsum, 1)
    centers = g0 + np.where(wsum > 0, wmean, plain)
    merged_amps = None
    if amps is not None:
        a = amps[order]
        merged_amps = np.bincount(label, weights=a.real, minlength=n) + 1j * np.bincount(
            label, weights=a.imag, minlength=n
        )
    return centers, wsum, merged_amps


def build_gap_distribution(
    rho0_eig: np.ndarray,
    A_eig: np.ndarray,
    decomp: SpectralDecomposition,
    gap_agg_tol: Optional[float] = None,
    amplitude_floor: float = AMPLITUDE_FLOOR,
    norm_A: Optional[float] = None,
    block_rows: int = 256,
) -> GapDistribution:
    """Enumerate all pairs with a non-zero gap and build ``p``.

    Amplitudes with ``|v| < amplitude_floor`` are dropped; their total is
    reported as ``discarded_mass``.  Gaps closer than ``gap_agg_tol``
    (default ``1e-9 * ||H||``) are merged into one atom.
    """
    d = decomp.dim
    if rho0_eig.shape != (d, d) or A_eig.shape != (d, d):
        raise ValueError("state, observable and decomposition dimensions differ")
    if norm_A is None:
        norm_A = spectral_norm(A_eig)
    if norm_A == 0:
        raise ValueError("observable must be non-zero")
    if gap_agg_tol is None:
        gap_agg_tol = GAP_AGG_RTOL * max(decomp.norm, 1e-300)
    E = decomp.energies
    At = A_eig.T
    rows, cols, gl, vl = [], [], [], []
    discarded = 0.0
    # Row blocks keep the peak memory at O(block_rows * d).
    for r0 in range(0, d, block_rows):
        r1 = min(r0 + block_rows, d)
        v = rho0_eig[r0:r1] * At[r0:r1] / norm_A
        G = E[r0:r1, None] - E[None, :]
        nonzero_gap = np.abs(G) > decomp.degeneracy_tol
        mag = np.abs(v)
        keep = nonzero_gap & (mag >= amplitude_floor)
        discarded += float(mag[nonzero_gap & ~keep].sum())
        rr, cc = np.nonzero(keep)
        rows.append(rr + r0)
        cols.append(cc)
        gl.append(G[rr, cc])
        vl.append(v[rr, cc])
    rows = np.concatenate(rows) if rows else np.empty(0, int)
    cols = np.concatenate(cols) if cols else np.empty(0, int)
    pair_gaps = np.concatenate(gl) if gl else np.empty(0)
    amps = np.concatenate(vl) if vl else np.empty(0, complex)
    mags = np.abs(amps)
    Q = float(np.sum(mags))
    if Q == 0:
        return GapDistribution(
            np.empty(0), np.empty(0), 0.0, float(gap_agg_tol), np.empty(0, complex),
            rows, cols, pair_gaps, amps, discarded, float(norm_A),
        )
    g, w, atom_amps = _merge(pair_gaps, mags, amps, gap_agg_tol)
    return GapDistribution(
        gaps=g,
        probs=w / Q,
        Q=Q,
        gap_agg_tol=float(gap_agg_tol),
        atom_amplitudes=atom_amps,
        pair_rows=rows,
        pair_cols=cols,
        pair_gaps=pair_gaps,
        amplitudes=amps,
        discarded_mass=discarded,
        norm_A=float(norm_A),
    )


def _slack(scale, length):
    # Gap differences carry rounding error; treat lengths within a few ulps as equal.
    return 4 * np.finfo(float).eps * max(scale, length)


def xi(dist: GapDistribution, x):
    """Largest probability inside any closed interval of length ``x``.

    Only intervals whose left edge sits on an atom need checking; for each
    such start the right edge is located by binary search on the sorted
    atoms, which is the two-pointer sweep done in one vectorised pass.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise ValueError("interval length must be non-negative")
    g = dist.gaps
    if g.size == 0:
        out = np.zeros_like(xs)
    else:
        cum = np.concatenate(([0.0], np.cumsum(dist.probs)))
        out = np.empty_like(xs)
        scale = max(np.abs(g).max(), 1e-300)
        for n, length in enumerate(xs):
            right = np.searchsorted(g, g + length + _slack(scale, length), side="right")
            out[n] = min(float(np.max(cum[right] - cum[:-1])), 1.0)
    return out if np.ndim(x) else float(out[0])


def xi_bruteforce(values: Sequence[float], probs: Sequence[float], x: float) -> float:
    """Check every interval between two atoms; O(n^3), for testing only.

    Uses the same few-ulp length tolerance as :func:`xi`.
    """
    values = np.asarray(values, float)
    probs = np.asarray(probs, float)
    tol = _slack(max(np.abs(values).max(), 1e-300), x) if values.size else 0.0
    best = 0.0
    for lo in values:
        for hi in values:
            if lo <= hi and hi - lo <= x + tol:
                inside = (values >= lo) & (values <= hi)
                best = max(best, float(probs[inside].sum()))
    return best


def sigma_spectral(dist: GapDistribution) -> float:
    """Standard deviation of the gaps under ``p``.

    Gap distributions are symmetric, so their mean must vanish; this is
    checked rather than subtracted.  Non-symmetric distributions (e.g.
    synthetic ones built with :meth:`GapDistribution.from_atoms`) get the
    ordinary centred standard deviation.
    """
    if dist.equilibrated:
        return 0.0
    m2 = float(np.sum(dist.probs * dist.gaps ** 2))
    mean = float(np.sum(dist.probs * dist.gaps))
    if dist.symmetric:
        if abs(mean) > 1e-9 * np.sqrt(m2) + 1e-14:
            raise ValueError(f"gap distribution is not symmetric (mean gap {mean:.3e})")
        return float(np.sqrt(m2))
    return float(np.sqrt(max(m2 - mean ** 2, 0.0)))


def a_delta(dist: GapDistribution, eps, sigma: Optional[float] = None):
    """``(a, delta)`` with ``delta = xi(eps)`` and ``a = xi(eps) * sigma / eps``."""
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(eps_arr <= 0):
        raise ValueError("eps must be positive")
    if sigma is None:
        sigma = sigma_spectral(dist)
    delta = xi(dist, eps_arr)
    a = delta * sigma / eps_arr
    if np.ndim(eps):
        return a, delta
    return float(a), float(delta)


def double_commutator_trace(rho0: np.ndarray, H: np.ndarray, A: np.ndarray) -> float:
    """``Tr([[rho0, H], H] A)``, computed as ``Tr([rho0, H][H, A])``."""
    c1 = rho0 @ H - H @ rho0
    c2 = H @ A - A @ H
    return float(np.real(np.sum(c1 * c2.T)))


def sigma_commutator(rho0, H, A, Q: float, norm_A: Optional[float] = None) -> float:
    """Lower bound on ``sigma_G`` from the double commutator; no diagonalisation."""
    if Q == 0:
        # Q = 0 forces every rho_jk A_kj with E_j != E_k to vanish, so the trace does too.
        return 0.0
    if norm_A is None:
        norm_A = spectral_norm(A)
    value = abs(double_commutator_trace(rho0, H, A))
    return float(np.sqrt(value / (Q * norm_A)))


def q_purity_bound(rho0: np.ndarray, rank_omega: int) -> float:
    """``sqrt(d * Tr rho0^2)`` with ``d`` the number of populated levels."""
    if rank_omega < 1:
        raise ValueError("rank_omega must be >= 1")
    purity = float(np.real(np.sum(rho0 * rho0.T)))
    return float(np.sqrt(rank_omega * purity))


def omega_rank(rho0_eig: np.ndarray, rtol: float = 1e-12) -> int:
    """Number of energy levels populated by the state (support of omega)."""
    pop = np.real(np.diag(rho0_eig))
    return int(np.count_nonzero(pop > rtol * max(pop.max(), 1e-300)))


def effective_dimension(rho0_eig: np.ndarray) -> float:
    pop = np.real(np.diag(rho0_eig))
    return float(1.0 / np.sum(pop ** 2))


def histogram(dist: GapDistribution, n_bins: int = 60, value_range: Optional[Tuple[float, float]] = None):
    """Equal-width histogram of ``p`` over ``[min gap, max gap]``.

    Returns ``(bin_centers, bin_probabilities, bin_edges)``.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if dist.equilibrated:
        return np.empty(0), np.empty(0), np.empty(0)
    if value_range is None:
        value_range = (float(dist.gaps.min()), float(dist.gaps.max()))
    probs, edges = np.histogram(dist.gaps, bins=n_bins, range=value_range, weights=dist.probs)
    centers = 0.5 * (edges[1:] + edges[:-1])
    return centers, probs, edges


def count_local_maxima(values: np.ndarray, smooth: int = 3) -> int:
    """Strict local maxima of a moving-average-smoothed profile.

    A reporting heuristic for unimodality, not a test of it.
    """
    y = np.asarray(values, float)
    if y.size == 0:
        return 0
    if smooth > 1 and y.size >= smooth:
        y = np.convolve(y, np.ones(smooth) / smooth, mode="same")
    # Collapse plateaus so a flat top counts once.
    keep = np.concatenate(([True], np.abs(np.diff(y)) > 1e-15 * max(y.max(), 1e-300)))
    y = y[keep]
    if y.size == 1:
        return 1
    left = np.concatenate(([-np.inf], y[:-1]))
    right = np.concatenate((y[1:], [-np.inf]))
    return int(np.count_nonzero((y > left) & (y > right)))


@dataclass(frozen=True)
class XiProfile:
    eps_grid: np.ndarray
    xi_values: np.ndarray
    a_values: np.ndarray
    delta_values: np.ndarray
    sigma_G: float

    def rows(self):
        return zip(self.eps_grid, self.xi_values, self.a_values, self.delta_values)


def default_eps_grid(dist: GapDistribution, n_points: int = 200) -> np.ndarray:
    g = dist.gaps
    if g.size < 2:
        return np.array([1.0]) if g.size else np.empty(0)
    spacing = np.diff(g)
    lo = float(spacing[spacing > 0].min()) / 10
    hi = float(g[-1] - g[0])
    return np.geomspace(lo, hi, n_points)


def xi_profile(dist: GapDistribution, eps=None, n_points: int = 200) -> XiProfile:
    """``xi``, ``a`` and ``delta`` on a log grid (or at the given ``eps``)."""
    eps = default_eps_grid(dist, n_points) if eps is None else np.asarray(eps, dtype=float)
    sigma = sigma_spectral(dist)
    vals = xi(dist, eps) if eps.size else np.empty(0)
    with np.errstate(divide="ignore"):
        a = vals * sigma / eps
    return XiProfile(eps, vals, a, vals.copy(), sigma)


def binomial_distribution(n_bits: int = 2_000_000) -> GapDistribution:
    """Distribution of the number of ones among ``n_bits`` fair random bits."""
    from scipy.stats import binom

    k = np.arange(n_bits + 1)
    pmf = binom.pmf(k, n_bits, 0.5)
    return GapDistribution.from_atoms(k.astype(float), pmf, symmetric=False)
