"""First-order 2x2 systems ``L u = A1 u_1 + A2 u_2 + B u`` as coefficient fields.

Every system evaluates its coefficients and the derivative fields
``dA1/dx1`` and ``dA2/dx2`` in closed form at stacked points; ``x1, x2`` are
``(x, y)`` for Cartesian systems and ``(r, theta)`` for polar ones.
Matrices come back with shape ``(..., 2, 2)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

SQRT2 = math.sqrt(2.0)
TWO_PI = 2.0 * math.pi

HODGE_CASES = {
    "hodge-case1": (-2.0, -2.0, 0.0, 0.0),
    "hodge-case2": (-2.0, 0.0, 0.0, 2.0),
    "hodge-case3": (0.0, 0.0, 0.0, 0.0),
}
SYSTEM_IDS = (
    "hodge-case1", "hodge-case2", "hodge-case3", "hodge-perturbed",
    "optics-cartesian", "optics-polar", "optics-polar-perturbed",
)


class TypeClass(str, enum.Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    PARABOLIC = "parabolic"


UNDEFINED = "undefined"


class ClassificationError(ValueError):
    pass


class Coefficients(NamedTuple):
    A1: np.ndarray
    A2: np.ndarray
    B: np.ndarray
    dA1: np.ndarray  # derivative of A1 in the first chart variable
    dA2: np.ndarray  # derivative of A2 in the second chart variable


@dataclass(frozen=True)
class PerturbationParams:
    """Constant shifts of the lower-order matrix.

    Four values give the Cartesian form
    ``B_eps = [[-2x + e1, -2y + e2], [(1-y^2) e3, (1-y^2) e4]]``; two values
    the polar form ``B_eps = [[r + e1, e2], [0, 0]]``.
    """

    eps1: float
    eps2: float
    eps3: float | None = None
    eps4: float | None = None

    @property
    def form(self) -> str:
        return "cartesian" if self.eps3 is not None else "polar"

    def sign_violations(self) -> list[str]:
        """Pointwise-free sign conditions that fail."""
        bad = []
        if not self.eps1 > 0:
            bad.append("eps1 > 0")
        if self.form == "cartesian":
            if self.eps4 is None or not self.eps4 > 0:
                bad.append("eps4 > 0")
        elif not self.eps2 > 0:
            bad.append("eps2 > 0")
        return bad


@dataclass(frozen=True)
class MultiplierSpec:
    """Matrix multiplier ``E = [[a, c(1-r^2)], [c, a]]`` for the polar system.

    ``a(r, theta) = M exp(eps2 theta) + (sqrt2 - eps1) c / eps2`` with theta
    taken in ``(0, 2 pi]``.
    """

    c: float
    M: float
    eps1: float
    eps2: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("multiplier constant c must be positive")
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("multiplier eps1, eps2 must be positive")

    def a(self, r, theta):
        th = wrap_angle(theta)
        return self.M * np.exp(self.eps2 * th) + (SQRT2 - self.eps1) * self.c / self.eps2

    def a_theta(self, r, theta):
        th = wrap_angle(theta)
        return self.M * self.eps2 * np.exp(self.eps2 * th)

    def matrix(self, r, theta):
        r = np.asarray(r, float)
        a = self.a(r, theta)
        c = self.c * np.ones_like(r)
        return _mat(a, c * (1 - r * r), c, a)


def wrap_angle(theta):
    """Map angles into ``(0, 2 pi]``."""
    theta = np.asarray(theta, float)
    return TWO_PI - np.mod(TWO_PI - theta, TWO_PI)


def _mat(a11, a12, a21, a22) -> np.ndarray:
    a11, a12, a21, a22 = np.broadcast_arrays(
        np.asarray(a11, float), np.asarray(a12, float), np.asarray(a21, float), np.asarray(a22, float)
    )
    out = np.empty(a11.shape + (2, 2))
    out[..., 0, 0] = a11
    out[..., 0, 1] = a12
    out[..., 1, 0] = a21
    out[..., 1, 1] = a22
    return out


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A named system with closed-form coefficient evaluators.

    ``coefficients(x1, x2)`` returns a :class:`Coefficients` tuple.
    ``forcing(x1, x2)`` gives the right-hand side with shape ``(..., 2)``.
    """

    system_id: str
    chart: str
    evaluator: Callable[[np.ndarray, np.ndarray], Coefficients] = field(repr=False)
    k: tuple[float, float, float, float] | None = None
    perturbation: PerturbationParams | None = None
    multiplier: MultiplierSpec | None = None
    forcing_fn: Callable | None = field(default=None, repr=False)
    label: str = ""

    @property
    def name(self) -> str:
        return self.label or self.system_id

    def coefficients(self, x1, x2) -> Coefficients:
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        return self.evaluator(x1, x2)

    def at(self, p) -> Coefficients:
        return self.coefficients(p[0], p[1])

    def forcing(self, x1, x2) -> np.ndarray:
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        if self.forcing_fn is None:
            return np.zeros(x1.shape + (2,))
        return np.asarray(self.forcing_fn(x1, x2), float)

    def with_forcing(self, fn) -> "SystemSpec":
        return replace(self, forcing_fn=fn)


# ---------------------------------------------------------------------------
# the concrete families


def _hodge_A(x, y):
    zero = np.zeros_like(x)
    A1 = _mat(1 - x * x, zero, zero, -(1 - y * y))
    A2 = _mat(-2 * x * y, 1 - y * y, 1 - y * y, zero)
    dA1 = _mat(-2 * x, zero, zero, zero)
    dA2 = _mat(-2 * x, -2 * y, -2 * y, zero)
    return A1, A2, dA1, dA2


def _hodge_evaluator(k):
    k1, k2, k3, k4 = k

    def ev(x, y):
        A1, A2, dA1, dA2 = _hodge_A(x, y)
        B = _mat((k1 - 2) * x, (k2 - 2) * y, k3 * x, k4 * y)
        return Coefficients(A1, A2, B, dA1, dA2)

    return ev


def _hodge_perturbed_evaluator(p: PerturbationParams):
    e1, e2, e3, e4 = p.eps1, p.eps2, p.eps3, p.eps4

    def ev(x, y):
        A1, A2, dA1, dA2 = _hodge_A(x, y)
        w = 1 - y * y
        B = _mat(-2.0 * x + e1, -2.0 * y + e2, w * e3, w * e4)
        return Coefficients(A1, A2, B, dA1, dA2)

    return ev


def _optics_cartesian(x, y):
    rho2 = x * x + y * y
    f = rho2 * rho2
    fx = 4 * x * rho2
    fy = 4 * y * rho2
    zero = np.zeros_like(x)
    A1 = _mat(f - x * x, zero, zero, -(f - y * y))
    A2 = _mat(-2 * x * y, f - y * y, f - y * y, zero)
    dA1 = _mat(fx - 2 * x, zero, zero, -fx)
    dA2 = _mat(-2 * x, fy - 2 * y, fy - 2 * y, zero)
    return Coefficients(A1, A2, _mat(zero, zero, zero, zero), dA1, dA2)


def _optics_polar_evaluator(p: PerturbationParams | None):
    e1 = 0.0 if p is None else p.eps1
    e2 = 0.0 if p is None else p.eps2

    def ev(r, th):
        zero = np.zeros_like(r)
        one = np.ones_like(r)
        A1 = _mat(r * r - 1, zero, zero, -one)
        A2 = _mat(zero, one, one, zero)
        B = _mat(r + e1 if p is not None else r, e2 * one, zero, zero)
        dA1 = _mat(2 * r, zero, zero, zero)
        dA2 = _mat(zero, zero, zero, zero)
        return Coefficients(A1, A2, B, dA1, dA2)

    return ev


def assemble_system(system_id: str, params: PerturbationParams | dict | None = None,
                    k: tuple | None = None, forcing: Callable | None = None) -> SystemSpec:
    """Build one of the named systems.

    ``params`` carries the perturbation for the ``*-perturbed`` systems;
    ``k`` overrides the lower-order constants of a Hodge case.
    """
    if isinstance(params, dict):
        params = PerturbationParams(**params)
    if system_id in HODGE_CASES:
        kk = tuple(float(v) for v in (k if k is not None else HODGE_CASES[system_id]))
        if len(kk) != 4:
            raise ValueError("k needs four constants")
        return SystemSpec(system_id, "cartesian", _hodge_evaluator(kk), k=kk, forcing_fn=forcing)
    if system_id == "hodge-perturbed":
        if params is None or params.form != "cartesian" or params.eps4 is None:
            raise ValueError("hodge-perturbed needs (eps1, eps2, eps3, eps4)")
        bad = params.sign_violations()
        if bad:
            raise ValueError(f"invalid perturbation: {', '.join(bad)}")
        return SystemSpec(system_id, "cartesian", _hodge_perturbed_evaluator(params),
                          perturbation=params, forcing_fn=forcing)
    if system_id == "optics-cartesian":
        return SystemSpec(system_id, "cartesian", _optics_cartesian, forcing_fn=forcing)
    if system_id == "optics-polar":
        return SystemSpec(system_id, "polar", _optics_polar_evaluator(None), forcing_fn=forcing)
    if system_id == "optics-polar-perturbed":
        if params is None or params.form != "polar":
            raise ValueError("optics-polar-perturbed needs (eps1, eps2)")
        bad = params.sign_violations()
        if bad:
            raise ValueError(f"invalid perturbation: {', '.join(bad)}")
        return SystemSpec(system_id, "polar", _optics_polar_evaluator(params),
                          perturbation=params, forcing_fn=forcing)
    raise ValueError(f"unknown system id {system_id!r}")


# ---------------------------------------------------------------------------
# type classification


def _pencil(A1, A2):
    """Coefficients ``(a, b, c)`` of ``det(A1 - lam A2) = a lam^2 + b lam + c``."""
    a = A2[..., 0, 0] * A2[..., 1, 1] - A2[..., 0, 1] * A2[..., 1, 0]
    b = -(A1[..., 0, 0] * A2[..., 1, 1] + A1[..., 1, 1] * A2[..., 0, 0]) + (
        A1[..., 0, 1] * A2[..., 1, 0] + A1[..., 1, 0] * A2[..., 0, 1]
    )
    c = A1[..., 0, 0] * A1[..., 1, 1] - A1[..., 0, 1] * A1[..., 1, 0]
    return a, b, c


def characteristic_quadratic(sys: SystemSpec, p):
    co = sys.at(p)
    a, b, c = _pencil(co.A1, co.A2)
    return float(a), float(b), float(c)


def classify_points(sys: SystemSpec, x1, x2, rel_tol: float = 1e-10, strict: bool = True) -> np.ndarray:
    """Vectorized classification; returns an array of ``TypeClass`` values.

    Where the characteristic quadratic vanishes identically this raises, or
    with ``strict=False`` labels the point ``"undefined"``.
    """
    co = sys.coefficients(x1, x2)
    a, b, c = _pencil(co.A1, co.A2)
    disc = b * b - 4 * a * c
    # relative to the pencil's own size: type does not change when L is rescaled
    scale = np.maximum(b * b, 4 * np.abs(a * c))
    degenerate = (np.abs(a) == 0) & (np.abs(b) == 0) & (np.abs(c) == 0)
    if strict and np.any(degenerate):
        raise ClassificationError("characteristic quadratic vanishes identically")
    out = np.where(disc > rel_tol * scale, TypeClass.HYPERBOLIC.value,
                   np.where(disc < -rel_tol * scale, TypeClass.ELLIPTIC.value, TypeClass.PARABOLIC.value))
    return np.where(degenerate, UNDEFINED, out)


def classify_point(sys: SystemSpec, p, rel_tol: float = 1e-10) -> TypeClass:
    """Elliptic, hyperbolic or parabolic by the roots of ``|A1 - lam A2| = 0``."""
    return TypeClass(str(classify_points(sys, p[0], p[1], rel_tol)))


def characteristic_roots(sys: SystemSpec, p, rel_tol: float = 1e-10) -> list[float]:
    """Real roots of ``|A1 - lam A2| = 0`` (an infinite root when ``det A2 = 0``)."""
    cls = classify_point(sys, p, rel_tol)
    a, b, c = characteristic_quadratic(sys, p)
    if cls == TypeClass.ELLIPTIC:
        return []
    if a == 0.0:
        if cls == TypeClass.PARABOLIC:
            return [math.inf]
        return sorted([-c / b, math.inf])
    if cls == TypeClass.PARABOLIC:
        return [-b / (2 * a)]
    sq = math.sqrt(b * b - 4 * a * c)
    q = -0.5 * (b + math.copysign(sq, b))
    r1 = q / a
    r2 = c / q if q != 0.0 else -r1
    return sorted([r1, r2])


# ---------------------------------------------------------------------------
# adjoint and multiplier


def adjoint(sys: SystemSpec) -> SystemSpec:
    """Formal adjoint with the sign convention that keeps ``A1, A2``.

    ``L* w = A1 w_1 + A2 w_2 + (dA1 + dA2 - B^T) w``, i.e. minus the usual
    formal adjoint. For the Hodge cases this is exactly the displayed
    adjoint operator; case 3 is self-adjoint.
    """
    base = sys.evaluator

    def ev(x1, x2):
        co = base(x1, x2)
        Badj = co.dA1 + co.dA2 - np.swapaxes(co.B, -1, -2)
        return Coefficients(co.A1, co.A2, Badj, co.dA1, co.dA2)

    label = sys.name[:-1] if sys.name.endswith("*") else sys.name + "*"
    return SystemSpec(sys.system_id, sys.chart, ev, k=sys.k, perturbation=sys.perturbation,
                      multiplier=sys.multiplier, label=label)


def apply_multiplier(E: MultiplierSpec, sys: SystemSpec) -> SystemSpec:
    """Left-multiply the polar system by ``E``: coefficients ``E A1, E A2, E B``."""
    if sys.system_id not in ("optics-polar", "optics-polar-perturbed"):
        raise ValueError("the matrix multiplier applies to the polar optics systems only")
    if sys.multiplier is not None:
        raise ValueError("system is already multiplied")
    p = sys.perturbation
    if p is not None and (p.eps1 != E.eps1 or p.eps2 != E.eps2):
        raise ValueError("multiplier and perturbation use different eps1, eps2")
    base = sys.evaluator
    fbase = sys.forcing_fn

    def ev(r, th):
        co = base(r, th)
        Em = E.matrix(r, th)
        a_th = E.a_theta(r, th)
        zero = np.zeros_like(r)
        c = E.c * np.ones_like(r)
        E_r = _mat(zero, -2 * c * r, zero, zero)
        E_th = _mat(a_th, zero, zero, a_th)
        A1 = Em @ co.A1
        A2 = Em @ co.A2
        dA1 = E_r @ co.A1 + Em @ co.dA1
        dA2 = E_th @ co.A2 + Em @ co.dA2
        return Coefficients(A1, A2, Em @ co.B, dA1, dA2)

    def forcing(r, th):
        return np.einsum("...ij,...j->...i", E.matrix(r, th), fbase(r, th))

    return SystemSpec(sys.system_id, "polar", ev, perturbation=p, multiplier=E,
                      forcing_fn=forcing if fbase is not None else None, label=f"E*{sys.name}")


def apply_operator(sys: SystemSpec, x1, x2, u, du1, du2) -> np.ndarray:
    """Pointwise ``A1 du1 + A2 du2 + B u`` for given field values and derivatives."""
    co = sys.coefficients(x1, x2)
    mv = lambda M, v: np.einsum("...ij,...j->...i", M, v)  # noqa: E731
    return mv(co.A1, du1) + mv(co.A2, du2) + mv(co.B, u)
