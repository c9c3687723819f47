"""Numerical verification toolkit for first-order systems of mixed elliptic-hyperbolic type.

Submodules: ``geometry`` (projective-disc domains), ``operators`` (coefficient
systems and type classification), ``friedrichs`` (symmetric-positive and
admissibility checks), ``energy`` (basic-inequality machinery), ``solver``
(least-squares discretization), ``optics`` (Airy and hodograph checks) and
``cli``.
"""

from .geometry import DomainKind, DomainSpec, SegmentRole, build_domain, validate_domain
from .operators import SystemSpec, TypeClass, adjoint, assemble_system, classify_point
from .report import VerificationReport

__version__ = "0.1.0"

__all__ = [
    "DomainKind", "DomainSpec", "SegmentRole", "build_domain", "validate_domain",
    "SystemSpec", "TypeClass", "adjoint", "assemble_system", "classify_point",
    "VerificationReport",
]
