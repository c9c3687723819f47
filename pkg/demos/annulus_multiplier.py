"""
Choosing the multiplier on the annulus
======================================

The polar optics system becomes symmetric positive after a multiplier with
parameter M. The search doubles M until the interior scan and both boundary
decompositions pass, then bisects back.
"""

from mixtype.friedrichs import select_M
from mixtype.geometry import omega5

dom = omega5(0.1)
sel = select_M(c=1.0, eps1=0.1, eps2=0.1, domain=dom, margin=1e-6)
print("trials (M, ok):")
for M, ok in sel.trials:
    print(f"  {M:12.6g}  {ok}")
print("selected M =", sel.M)
for rep in sel.reports:
    print(rep.condition, "pass" if rep.passed else "fail")
    for child in rep.children:
        print(f"   {child.condition:40s} worst={child.worst:.3e}")

# With sigma = tau the outer condition cannot absorb the negative part.
print("sigma = tau = 1 feasible:", select_M(1.0, 0.1, 0.1, dom, sigma=1.0, tau=1.0).feasible)
