"""The hard edge: Bessel field, sine-kernel identities and the Laguerre map.

* For alpha = +1/2 and -1/2 the Bessel kernel in unfolded coordinates is
  exactly the odd and even sine kernel.
* The variance in (0, T) grows like 1/(4 pi^2) log T for every alpha, but
  slowly: at alpha = 1/2 the fit over T = 10^2..10^5 is still 12% high.
* Laguerre eigenvalues near zero, multiplied by 4 n^2, follow the Bessel
  field; we check the scale by comparing smallest-eigenvalue medians.

Run:  python3 demos/02_bessel_hard_edge.py
"""
import math

import numpy as np

from dpfield import KernelSpec
from dpfield.experiments import ExperimentConfig, hard_edge_scale_check, variance_scan
from dpfield.kernels import even_odd_sine_kernel, unfolded_kernel

odd = KernelSpec("bessel", alpha=0.5, coordinates="unfolded")
z = np.linspace(0.1, 20, 40)
gap = max(abs(unfolded_kernel(odd, a, b) - even_odd_sine_kernel(-1, a, b)) for a in z for b in z[::5])
print(f"alpha = 1/2 vs odd sine kernel: max difference {gap:.1e}")

target = 1 / (4 * math.pi ** 2)
for alpha in (0.0, 0.5, 2.0):
    r = variance_scan(KernelSpec("bessel", alpha=alpha), [1e2, 1e3, 1e4, 1e5])
    v = r.column("variance")
    local = (v[-1] - v[-2]) / math.log(10)
    print(f"alpha={alpha:3.1f}  slope {r.fit.slope:.5f}  (last-decade slope {local:.5f}, target {target:.5f})")

cfg = ExperimentConfig("hard_edge_scale_check", ensemble="lue", n=60, alpha=0.0, replicas=800, seed=3)
check = hard_edge_scale_check(cfg)
for name, emp, se, expected in check.rows:
    print(f"map {name:4s}: median {emp:10.4f} +- {se:.4f}   Bessel median {expected:.4f}")
print("selected map:", check.extra["selected"])
