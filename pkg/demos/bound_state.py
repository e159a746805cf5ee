"""
Two particles on a chain with a contact attraction.

At K = 0 the pair band is [0, 4] and the attraction pulls a single level
below it. The level solves z (z - 4) = 1, so it sits at 2 - sqrt(5). This
script shows the computed level converging to that value as the grid grows,
and shows the same operator built in coordinates giving the same eigenvalues.
"""

import math

import numpy as np

from lattice_hvz import (GridParams, TorusGrid, build_fiber_coordinate, build_fiber_momentum,
                         classify_levels, hvz_spectrum, model_l1)

exact = 2 - math.sqrt(5)
m = model_l1()
print(f"exact bound state: {exact:.15f}\n")

# On coarse grids the level lies within the merge resolution of the band and is not
# reported as discrete; the lowest eigenvalue is shown regardless.
print("  M   essential spectrum   lowest eigenvalue       error     reported as discrete")
for M in (8, 16, 32, 64, 128):
    params = GridParams(M)
    ess = hvz_spectrum(m, [0.0], params)
    levels = classify_levels(m, [0.0], params, ess)
    low = np.linalg.eigvalsh(build_fiber_momentum(m, [0.0], TorusGrid(M)).dense())[0]
    lo, hi = ess.intervals[0]
    status = "no" if not levels else ("borderline" if levels[0].borderline else "yes")
    print(f"{M:4d}   [{lo:.3f}, {hi:.3f}]       {low: .15f}   {abs(low - exact):.1e}   {status}")

# The momentum-space fiber and the periodic coordinate box of the same size are unitarily equivalent.
grid = TorusGrid(9)
for k in (0, 2, 5):
    K = grid.momentum((k,))
    a = np.linalg.eigvalsh(build_fiber_momentum(m, K, grid).dense())
    b = np.linalg.eigvalsh(build_fiber_coordinate(m, K, 4, "periodic").dense())
    print(f"\nK = {K[0]: .4f}: max eigenvalue gap between the two pictures {np.max(np.abs(a - b)):.1e}")
