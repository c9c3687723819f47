"""
Type regions and the Q identity
===============================

Where each built-in system changes type, and why the unperturbed systems
sit exactly on the boundary of positivity.
"""

import numpy as np

from mixtype import assemble_system, classify_point
from mixtype.friedrichs import check_symmetric_positive, compute_Q
from mixtype.mesh import box_grid

# Three probe points: inside, near, and outside the unit circle.
probes = [(0.3, 0.2), (0.7, 0.7), (1.2, -0.4)]
for sid in ("hodge-case1", "hodge-case3", "optics-cartesian"):
    sysm = assemble_system(sid)
    labels = [classify_point(sysm, p).value for p in probes]
    print(f"{sid:18s}", "  ".join(f"{p}: {c}" for p, c in zip(probes, labels)))

# Q is identically zero for these two, so they are symmetric positive
# only in the degenerate sense.
for sid, p in (("hodge-case3", (0.4, -0.9)), ("optics-polar", (0.8, 2.0))):
    print(sid, "Q =", compute_Q(assemble_system(sid), p).tolist())

# Small shifts of B buy strict positivity while y^2 < 1.
pert = assemble_system("hodge-perturbed", {"eps1": 0.01, "eps2": 0, "eps3": 0, "eps4": 0.01})
y = np.sqrt(0.99)
ok = check_symmetric_positive(pert, box_grid((-0.9, 0.9), (-y, y), 64))
print("perturbed, y^2 <= 0.99:", "pass" if ok.passed else "fail", "min eig", ok.child("Q >= 0").worst)
bad = check_symmetric_positive(pert, box_grid((-0.9, 0.9), (-1.2, 1.2), 64))
print("perturbed, |y| <= 1.2:", "pass" if bad.passed else "fail", "at", bad.location)
