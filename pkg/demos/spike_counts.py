"""
More spikes for smaller diffusion
=================================

Shrinking D_w by n^2 below the first critical value shortens the
characteristic length, so the same bump breaks into more spikes.
Each run takes several seconds; pass a worker count to run them in parallel.
"""

import sys

from rdspike import harness

threads = int(sys.argv[1]) if len(sys.argv) > 1 else 1
print(f"D_w,1 = {harness.unit_critical_diffusion():.10f}")
print(harness.spike_counts_csv(threads=threads))
