"""
Where the instability comes from
================================

The constant state (u-, w-) is stable for the kinetics alone, but adding
diffusion to w destabilizes it. Unlike classical Turing systems the band
of unstable modes is unbounded: lambda+ tends to a positive limit as k grows.
"""

import math

from rdspike import KineticParams, ModelParams, ddi_report, lambda_pm
from rdspike.kinetics import Branch, classify_kinetic_stability, constant_steady_states
from rdspike.stability import critical_diffusion

kin = KineticParams(2.0, 1.0, 3.0)
for s in constant_steady_states(kin):
    print(f"{s.branch.name:8s} u={s.u_bar:.6f} w={s.w_bar:.6f} kinetic: {classify_kinetic_stability(kin, s).name}")

minus = next(s for s in constant_steady_states(kin) if s.branch is Branch.MINUS)
p = ModelParams(kin, 2.0)
print("\n  k   Re lambda+    Re lambda-")
for k in (0, 1, 2, 3, 5, 10, 50, 500):
    d = lambda_pm(p, minus, k)
    print(f"{k:4d} {complex(d.lambda_plus).real:11.6f} {complex(d.lambda_minus).real:13.2f}")

rep = ddi_report(p)
print("\nDDI:", rep.ddi, "first unstable mode:", rep.first_unstable_mode, "limit:", rep.lambda_limit)

# mode k turns unstable once D_w exceeds its threshold; thresholds fall like 1/k^2
print("\ncritical D_w per mode (cos(pi k x) modes, and k^2 scaling)")
for k in range(1, 6):
    d_phys = critical_diffusion(kin, k)
    d_unit = critical_diffusion(kin, k, mode_scale=1.0)
    print(f"{k}: {d_phys:.6f}  {d_unit:.6f}  ratio {d_unit / d_phys:.6f} (pi^2 = {math.pi**2:.6f})")
