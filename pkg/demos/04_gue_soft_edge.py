"""From GUE matrices to the Airy field.

Rescale the largest GUE eigenvalues as y = 2 n^{2/3} (lambda - 1) and count
those above -T.  The mean and variance of that count approach the Airy
operator values Tr A and Tr A - Tr A^2 on (-T, +inf).

Run:  python3 demos/04_gue_soft_edge.py
"""
from dpfield.experiments import ExperimentConfig, gue_edge_clt

cfg = ExperimentConfig("gue_edge_clt", ensemble="gue", n=300, grid=(2.0, 4.0, 8.0),
                       replicas=600, seed=5, sampler="tridiagonal")
res = gue_edge_clt(cfg)
print("  T    mean  (Airy)     var  (Airy)   lattice KS")
for row in res.rows:
    d = dict(zip(res.columns, row))
    print(f"{d['T']:3.0f}  {d['mean']:6.3f} ({d['expected_mean']:6.3f})  {d['variance']:6.3f} "
          f"({d['expected_variance']:6.3f})  {d['lattice_ks']:.4f}")
print("variance increases with T:", res.extra["variance_increasing"])
