"""Eigendecomposition, energy windows, dephasing and density-of-states fits."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "SpectralDecomposition",
    "Projector",
    "DensityFit",
    "InsufficientSpectralData",
    "diagonalize",
    "to_eigenbasis",
    "dephase",
    "window_projector",
    "trace_distance",
    "fit_density_of_states",
    "spectral_norm",
]

DEGENERACY_RTOL = 1e-9


class InsufficientSpectralData(ValueError):
    pass


def spectral_norm(X: np.ndarray) -> float:
    X = np.asarray(X)
    if not np.any(X):
        return 0.0
    if np.allclose(X, X.conj().T, rtol=0, atol=1e-14 * np.abs(X).max()):
        return float(np.abs(np.linalg.eigvalsh(X)).max())
    return float(np.linalg.norm(X, 2))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending energies and the matching orthonormal eigenvector columns."""

    energies: np.ndarray
    vectors: np.ndarray
    degeneracy_tol: float

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def norm(self) -> float:
        return float(np.abs(self.energies).max()) if self.dim else 0.0

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.energies) @ self.vectors.conj().T

    def gaps(self) -> np.ndarray:
        """Matrix of ``E_j - E_k``."""
        return self.energies[:, None] - self.energies[None, :]

    def degenerate_mask(self) -> np.ndarray:
        """Boolean matrix marking pairs whose gap is within ``degeneracy_tol``."""
        return np.abs(self.gaps()) <= self.degeneracy_tol


def _canonical_phases(vectors, energies, tol):
    d = vectors.shape[0]
    thresh = 1e-8 / np.sqrt(max(d, 1))
    mags = np.abs(vectors)
    first = np.argmax(mags > thresh, axis=0)
    phase = vectors[first, np.arange(vectors.shape[1])]
    vectors = vectors * (np.abs(phase) / phase)[None, :]
    # Within degenerate clusters order the columns by that leading index.
    order = np.arange(energies.size)
    start = 0
    for i in range(1, energies.size + 1):
        if i == energies.size or energies[i] - energies[i - 1] > tol:
            if i - start > 1:
                block = order[start:i]
                order[start:i] = block[np.argsort(first[block], kind="stable")]
            start = i
    return vectors[:, order], energies[order]


def diagonalize(H: np.ndarray, degeneracy_tol: Optional[float] = None) -> SpectralDecomposition:
    """Full Hermitian eigendecomposition with a deterministic phase convention.

    Each eigenvector's first component with modulus above ``1e-8/sqrt(d)`` is
    made real and positive.  Columns inside a degenerate cluster (consecutive
    energies within ``degeneracy_tol``) are ordered by the index of that
    component.  ``degeneracy_tol`` defaults to ``1e-9 * ||H||``.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("Hamiltonian must be square")
    scale = np.abs(H).max() if H.size else 0.0
    if scale and np.abs(H - H.conj().T).max() > 1e-12 * max(scale, 1.0):
        raise ValueError("Hamiltonian is not Hermitian")
    E, V = np.linalg.eigh(H)
    if degeneracy_tol is None:
        degeneracy_tol = DEGENERACY_RTOL * max(float(np.abs(E).max()) if E.size else 0.0, 1e-300)
    V, E = _canonical_phases(V.astype(complex), E, degeneracy_tol)
    return SpectralDecomposition(E, V, float(degeneracy_tol))


def to_eigenbasis(X: np.ndarray, decomp: SpectralDecomposition) -> np.ndarray:
    """``V^dagger X V``."""
    X = np.asarray(X)
    if X.shape != (decomp.dim, decomp.dim):
        raise ValueError(f"operator shape {X.shape} does not match dimension {decomp.dim}")
    V = decomp.vectors
    return V.conj().T @ X @ V


def from_eigenbasis(X_eig: np.ndarray, decomp: SpectralDecomposition) -> np.ndarray:
    V = decomp.vectors
    return V @ X_eig @ V.conj().T


def dephase(rho_eig: np.ndarray, decomp: SpectralDecomposition) -> np.ndarray:
    """Equilibrium state: keep only entries inside degenerate energy blocks."""
    return np.where(decomp.degenerate_mask(), rho_eig, 0)


@dataclass(frozen=True)
class Projector:
    matrix: np.ndarray
    rank: int
    window: Tuple[float, float]
    basis_tag: str = "H"
    columns: np.ndarray = field(default=None, repr=False)
    indices: np.ndarray = field(default=None, repr=False)


def window_projector(
    decomp: SpectralDecomposition, center: float, width: float, basis_tag: str = "H"
) -> Projector:
    """Projector onto eigenvectors with ``|E - center| <= width / 2``.

    The closed window is padded by ``degeneracy_tol`` so levels sitting on an
    edge are not lost to rounding.
    """
    if width < 0:
        raise ValueError("window width must be non-negative")
    E = decomp.energies
    tol = decomp.degeneracy_tol
    idx = np.flatnonzero((E >= center - width / 2 - tol) & (E <= center + width / 2 + tol))
    cols = decomp.vectors[:, idx]
    return Projector(
        matrix=cols @ cols.conj().T,
        rank=int(idx.size),
        window=(float(center), float(width)),
        basis_tag=basis_tag,
        columns=cols,
        indices=idx,
    )


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Trace norm ``||rho - sigma||_1`` (no factor 1/2; orthogonal pure states give 2)."""
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValueError("trace_distance needs operators of equal shape")
    return float(np.abs(np.linalg.eigvalsh(rho - sigma)).sum())


@dataclass(frozen=True)
class DensityFit:
    """Exponential density of states ``nu(E) = norm_const * exp(beta * E)``."""

    beta: float
    norm_const: float
    fit_window: Tuple[float, float]
    residual: float
    n_bins_used: int
    n_bins_dropped: int

    def count(self, lo: float, hi: float) -> float:
        """Integral of the fitted density over ``[lo, hi]``."""
        if abs(self.beta) < 1e-12:
            return self.norm_const * (hi - lo)
        return self.norm_const * (np.exp(self.beta * hi) - np.exp(self.beta * lo)) / self.beta


def fit_density_of_states(levels, fit_window=None, n_bins: int = 20) -> DensityFit:
    """Least-squares fit of ``log(count / bin_width)`` against bin centre.

    ``levels`` is a :class:`SpectralDecomposition` or an array of energies.
    Bins are equal width over ``fit_window`` (default: the full spectrum);
    empty bins are dropped and counted in ``n_bins_dropped``.
    """
    E = levels.energies if isinstance(levels, SpectralDecomposition) else np.asarray(levels, float)
    if fit_window is None:
        fit_window = (float(E.min()), float(E.max()))
    lo, hi = map(float, fit_window)
    if not hi > lo or n_bins < 1:
        raise InsufficientSpectralData("fit window must have positive width and n_bins >= 1")
    counts, edges = np.histogram(E, bins=n_bins, range=(lo, hi))
    width = edges[1] - edges[0]
    centers = 0.5 * (edges[1:] + edges[:-1])
    keep = counts > 0
    if keep.sum() < 2:
        raise InsufficientSpectralData(
            f"insufficient spectral data: {int(keep.sum())} non-empty bin(s) in [{lo}, {hi}]"
        )
    y = np.log(counts[keep] / width)
    x = centers[keep]
    beta, log_n = np.polyfit(x, y, 1)
    resid = y - (beta * x + log_n)
    return DensityFit(
        beta=float(beta),
        norm_const=float(np.exp(log_n)),
        fit_window=(lo, hi),
        residual=float(np.sqrt(np.mean(resid ** 2))),
        n_bins_used=int(keep.sum()),
        n_bins_dropped=int((~keep).sum()),
    )
