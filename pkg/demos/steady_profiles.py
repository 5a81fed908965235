"""
Nonconstant steady states
=========================

Besides the constant states there are monotone stationary profiles,
found here by shooting from w(0). They exist only below a diffusion
threshold, which matches the first mode threshold of the dispersion relation.
Gluing reflected copies gives n-mode patterns at D_w / n^2.
"""

import numpy as np

from rdspike import KineticParams, ModelParams, periodic_profile, shoot_monotone
from rdspike.stability import critical_diffusion
from rdspike.steady_bvp import NoMonotoneSolution, existence_threshold

kin = KineticParams(2.0, 1.0, 3.0)

for d_w in (0.01, 0.1, 0.4):
    prof = shoot_monotone(ModelParams(kin, d_w))
    w = prof.w.values
    print(f"D_w={d_w}: w from {w[0]:.4f} to {w[-1]:.4f}, max residual {np.abs(prof.residual()).max():.1e}")

print("existence threshold:", existence_threshold(ModelParams(kin, 1.0)))
print("mode-1 critical D_w:", critical_diffusion(kin, 1))

try:
    shoot_monotone(ModelParams(kin, 6.0))
except NoMonotoneSolution as exc:
    print("D_w=6:", exc)

base = shoot_monotone(ModelParams(kin, 0.4), n_grid=2**12)
for n in (2, 3):
    pat = periodic_profile(base, n)
    turns = np.sum(np.diff(np.sign(np.diff(pat.w.values))) != 0)
    print(f"{n} modes at D_w={pat.params.d_w:.5f}: {turns} turning points, residual {np.abs(pat.residual()).max():.1e}")
