"""Critical Besov regularity of white noise, estimated from wavelet levels.

Space-time white noise in one space dimension has parabolic regularity just
below -|s|/2 = -3/2, and spatial white noise in three dimensions just below
-d/2 = -3/2.  The estimator regresses the level aggregates of the wavelet
transform against the level index.
"""

from mshe.noise import Grid, regularity_study
from mshe.wavelet import build_basis

basis = build_basis(2)

g1 = Grid(d=1, L=4.0, N=512, T=1.0, M=4096)
res = regularity_study(g1, "spacetime", basis, seeds=range(6), n_min=1, n_max=5)
print(f"space-time white noise, d=1: alpha_hat = {res['alpha_hat']:.3f} "
      f"+- {res['ci_halfwidth']:.3f}   (critical value -1.5)")

g3 = Grid(d=3, L=1.0, N=64)
res = regularity_study(g3, "spatial", basis, seeds=range(6), n_min=1, n_max=4)
print(f"spatial white noise,   d=3: alpha_hat = {res['alpha_hat']:.3f} "
      f"+- {res['ci_halfwidth']:.3f}   (critical value -1.5)")
