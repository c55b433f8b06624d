"""Concentration of a binomial distribution.

Count the ones among two million fair random bits.  The distribution is
close to a Gaussian of width sigma = sqrt(n)/2, so the largest probability
in an interval of length eps grows linearly, xi(eps) ~ eps / (sqrt(2 pi) sigma),
until eps approaches sigma.  The linearisation coefficient a(eps) therefore
starts near sqrt(2/pi) ~ 0.8 and drifts down slowly; delta(eps) = xi(eps)
stays small while eps << sigma.
"""
import numpy as np

from eqtime.gaps import a_delta, binomial_distribution, sigma_spectral

dist = binomial_distribution(2_000_000)
sigma = sigma_spectral(dist)
print(f"atoms kept: {dist.n_atoms}, sigma = {sigma:.3f} (sqrt(n)/2 = {np.sqrt(2e6) / 2:.3f})")

eps = np.array([1, 2, 5, 10, 50, 100, 500, 1000, 2000], dtype=float)
a, delta = a_delta(dist, eps)
print(f"{'eps':>8} {'a(eps)':>10} {'delta(eps)':>12}")
for e, ai, di in zip(eps, a, delta):
    print(f"{e:8.0f} {ai:10.4f} {di:12.6f}")

all_eps = np.arange(1, 2001, dtype=float)
a_all, _ = a_delta(dist, all_eps)
print(f"\nover eps = 1..2000: a ranges over [{a_all.min():.4f}, {a_all.max():.4f}]")
