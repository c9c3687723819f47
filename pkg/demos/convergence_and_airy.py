"""
Manufactured solutions and the Airy data
========================================

Two numerical sanity checks side by side. The least-squares solver on the
annulus converges at second order. The Airy initial-value problem shows
how far a forward RK4 march can follow the decaying solution in double
precision before the growing one swamps it.
"""

import numpy as np

from mixtype import optics, solver

for case in (solver.manufactured_optics_polar(), solver.manufactured_hodge_case3()):
    print(case.name)
    for row in solver.convergence_study(case, [16, 32, 64]):
        order = row.get("order_l2", float("nan"))
        print(f"  n={row['resolution']:3d}  L2 error {row['l2_error']:.3e}  order {order:5.2f}"
              f"  iterations {row['iterations']}")

print("\n   t     series Z          relative gap to RK4")
for t in np.arange(-10, 10.5, 2.0):
    s = optics.airy_series(t)
    gap = optics.state_discrepancy(optics.airy_rk4(t), s)
    print(f"{t:5.1f}  {s.Z: .10e}  {gap:.2e}")
