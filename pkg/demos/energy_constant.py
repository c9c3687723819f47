"""
Energy estimate pieces
======================

The boundary quadratic form, the integrand on characteristic boundary
pieces, and the discrete estimate of the constant K on each fixture domain.
"""

import numpy as np

from mixtype.energy import estimate_basic_constant, gamma_integrand, scan_quadratic_form
from mixtype.geometry import omega1, omega2, omega3

domains = {1: omega1(0.0), 2: omega2(), 3: omega3()}

for case, dom in domains.items():
    r = scan_quadratic_form(case, dom, 128)
    print(f"case {case}: {r.condition} -> {'pass' if r.passed else 'fail'} (worst {r.worst:.4g})")

# A characteristic direction at a point on the tangent line through (1, 0).
p, d = np.array([1.0, 0.5]), np.array([0.0, 1.0])
# w must satisfy w2 dy = -w1 dx there
w = np.array([3.0, 0.0])
print("integrand on a characteristic piece:", [gamma_integrand(c, p, w, d) for c in (1, 2, 3)])

for case, dom in domains.items():
    ks = [estimate_basic_constant(case, dom, n).K for n in (16, 32, 64)]
    print(f"case {case}: K at 16, 32, 64 =", ", ".join(f"{k:.4f}" for k in ks))
