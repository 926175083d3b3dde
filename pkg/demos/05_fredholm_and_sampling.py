"""Count distributions two ways: Fredholm determinants and exact sampling.

For a finite kernel matrix K with spectrum in [0, 1], det(I + (z - 1) K) is
the generating function of the number of points.  Inverting it on the unit
circle gives the full count law, which we compare with the sizes of exact
DPP samples.  The same determinant on a discretized sine kernel gives the
gap probability of an interval.

Run:  python3 demos/05_fredholm_and_sampling.py
"""
import numpy as np

from dpfield import KernelSpec
from dpfield.ensembles import spectral_dpp_sampler
from dpfield.operators import DiscretizedOperator, count_distribution, counting_cumulants, discretize, fredholm_generating
from dpfield.stats import total_variation

rng = np.random.default_rng(0)
q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
k = (q * np.array([0.95, 0.7, 0.4, 0.1])) @ q.T
op = DiscretizedOperator.from_matrix(k)

law = count_distribution(op)[:5]
draw = spectral_dpp_sampler(op)
sizes = np.array([draw(rng).size for _ in range(20000)])
emp = np.bincount(sizes, minlength=law.size) / sizes.size
print("P(N = k) Fredholm:", np.round(law, 4))
print("P(N = k) sampled: ", np.round(emp, 4))
print(f"total variation {total_variation(emp, law):.4f}")

rep = counting_cumulants(op, 4)
print("cumulants:", np.round(rep.cumulants, 6))

sine = discretize(KernelSpec("sine"), (0.0, 1.0))
print(f"sine kernel: P(no point in a unit interval) = {fredholm_generating(sine, 0.0):.6f}")
