"""Verification verdicts shared by the checking modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays into JSON-friendly Python objects."""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one checked condition.

    ``passed`` is true when ``worst >= -tol``. Composite checks carry their
    parts in ``children`` and pass only when every child passes.
    """

    condition: str
    passed: bool
    worst: float
    location: tuple[float, ...] | None = None
    resolution: Any = None
    tol: float = 0.0
    details: dict = field(default_factory=dict)
    children: tuple["VerificationReport", ...] = ()

    def __bool__(self) -> bool:
        return bool(self.passed)

    def child(self, name: str) -> "VerificationReport":
        for c in self.children:
            if c.condition == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        out = {
            "condition": self.condition,
            "pass": bool(self.passed),
            "worst": _plain(self.worst),
            "location": _plain(self.location),
            "resolution": _plain(self.resolution),
            "tol": _plain(self.tol),
        }
        if self.details:
            out["details"] = _plain(self.details)
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out


def combine(condition: str, children, resolution=None, tol: float = 0.0) -> VerificationReport:
    """Fold child reports into one; the worst child margin is reported."""
    children = tuple(children)
    if not children:
        raise ValueError("no reports to combine")
    failing = [c for c in children if not c.passed]
    pick = failing[0] if failing else min(children, key=lambda c: c.worst + c.tol)
    return VerificationReport(
        condition=condition,
        passed=not failing,
        worst=pick.worst,
        location=pick.location,
        resolution=resolution if resolution is not None else pick.resolution,
        tol=pick.tol if tol == 0.0 else tol,
        children=children,
    )
