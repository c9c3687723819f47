"""Airy data, eikonal residuals and Legendre/hodograph checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import mpmath
import numpy as np

T_MAX = 20.0
RK4_STEP = 1e-3

# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def lanczos_gamma(z: float) -> float:
    """Gamma function by the Lanczos approximation (reflection for z < 1/2)."""
    z = float(z)
    if z < 0.5:
        return math.pi / (math.sin(math.pi * z) * lanczos_gamma(1.0 - z))
    z -= 1.0
    x = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        x += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2 * math.pi) * t ** (z + 0.5) * math.exp(-t) * x


def airy_initial() -> tuple[float, float]:
    """``Z(0) = 3^(-2/3)/Γ(2/3)`` and ``Z'(0) = -3^(-1/3)/Γ(1/3)``."""
    return 3.0 ** (-2.0 / 3.0) / lanczos_gamma(2.0 / 3.0), -(3.0 ** (-1.0 / 3.0)) / lanczos_gamma(1.0 / 3.0)


class AiryState(NamedTuple):
    t: float
    Z: float
    dZ: float


class OpticsError(ValueError):
    pass


def _check_range(t):
    if not math.isfinite(t) or abs(t) > T_MAX:
        raise OpticsError(f"t = {t!r} outside supported range |t| <= {T_MAX:g}")


def airy_series(t: float, z0: Optional[float] = None, dz0: Optional[float] = None,
                ratio: float = 1e-18) -> AiryState:
    """Taylor series about 0, summed in extended precision.

    ``a_{n+2} = a_{n-1} / ((n+2)(n+1))``; stops once the two most recent
    terms of ``Z`` and ``Z'`` are below ``ratio`` times the partial sums.
    """
    t = float(t)
    _check_range(t)
    if z0 is None or dz0 is None:
        z0, dz0 = airy_initial()
    with mpmath.workdps(60):
        T = mpmath.mpf(t)
        a = [mpmath.mpf(z0), mpmath.mpf(dz0), mpmath.mpf(0)]
        S = a[0] + a[1] * T
        dS = a[1]
        tn = T  # t^(n-1) for the derivative term of a_n
        n = 2
        small = 0
        while True:
            if n >= len(a):
                a.append(a[n - 3] / (n * (n - 1)))
            term = a[n] * tn * T
            dterm = n * a[n] * tn
            S += term
            dS += dterm
            tn *= T
            tiny = (abs(term) <= ratio * abs(S)) and (abs(dterm) <= ratio * abs(dS))
            small = small + 1 if (tiny or a[n] == 0) else 0
            n += 1
            if small >= 3 and n > 2 * abs(t) ** 1.5 + 6:
                break
        return AiryState(t, float(S), float(dS))


def _rk4_steps(t_end: float, h: float):
    n = max(1, math.ceil(abs(t_end) / h - 1e-12))
    return n, t_end / n


def airy_trajectory(t_end: float, h: float = RK4_STEP, z0=None, dz0=None):
    """Classical RK4 for ``Z'' = tZ`` from 0 to ``t_end``.

    Uses ``ceil(|t_end|/h)`` equal steps so the endpoint is hit exactly.
    Returns arrays ``(t, Z, dZ)``.
    """
    t_end = float(t_end)
    _check_range(t_end)
    if z0 is None or dz0 is None:
        z0, dz0 = airy_initial()
    n, k = _rk4_steps(t_end, h)
    ts = np.empty(n + 1)
    Z = np.empty(n + 1)
    dZ = np.empty(n + 1)
    ts[0], Z[0], dZ[0] = 0.0, z0, dz0
    y, v = z0, dz0
    for i in range(n):
        t = i * k
        k1y, k1v = v, t * y
        th = t + 0.5 * k
        k2y, k2v = v + 0.5 * k * k1v, th * (y + 0.5 * k * k1y)
        k3y, k3v = v + 0.5 * k * k2v, th * (y + 0.5 * k * k2y)
        t1 = (i + 1) * k
        k4y, k4v = v + k * k3v, t1 * (y + k * k3y)
        y = y + k / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        v = v + k / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        ts[i + 1], Z[i + 1], dZ[i + 1] = t1, y, v
    return ts, Z, dZ


def airy_rk4(t: float, h: float = RK4_STEP) -> AiryState:
    ts, Z, dZ = airy_trajectory(t, h)
    return AiryState(float(ts[-1]), float(Z[-1]), float(dZ[-1]))


def airy_Z(t: float) -> tuple[float, float]:
    """``(Z(t), Z'(t))`` from the series path."""
    s = airy_series(t)
    return s.Z, s.dZ


def state_discrepancy(a: AiryState, b: AiryState) -> float:
    """Relative distance between two states, measured in the ``(Z, Z')`` norm."""
    num = math.hypot(a.Z - b.Z, a.dZ - b.dZ)
    den = math.hypot(b.Z, b.dZ)
    return num / den


def ode_residual(ts, Z, dZ) -> np.ndarray:
    """``|d(Z')/dt - tZ| / (1 + |Z|)`` at interior trajectory points.

    The derivative of ``Z'`` uses the five-point centered stencil, which
    needs uniform spacing.
    """
    ts, Z, dZ = (np.asarray(a, float) for a in (ts, Z, dZ))
    if len(ts) < 5:
        raise OpticsError("trajectory too short for the five-point stencil")
    k = ts[1] - ts[0]
    d2 = (-dZ[4:] + 8 * dZ[3:-1] - 8 * dZ[1:-3] + dZ[:-4]) / (12 * k)
    mid = slice(2, -2)
    return np.abs(d2 - ts[mid] * Z[mid]) / (1 + np.abs(Z[mid]))


# ---------------------------------------------------------------------------
# scalar fields


@dataclass(frozen=True)
class ScalarField2:
    """Scalar field with optional closed-form gradient and Hessian.

    Missing derivatives fall back to centered differences with step ``fd_step``.
    """

    f: Callable[[float, float], float]
    grad_fn: Optional[Callable] = None
    hess_fn: Optional[Callable] = None
    name: str = ""
    fd_step: float = 1e-5

    def __call__(self, x, y) -> float:
        return float(self.f(x, y))

    def grad(self, x, y) -> np.ndarray:
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(x, y), float)
        h = self.fd_step
        return np.array([(self.f(x + h, y) - self.f(x - h, y)) / (2 * h),
                         (self.f(x, y + h) - self.f(x, y - h)) / (2 * h)])

    def hess(self, x, y) -> np.ndarray:
        if self.hess_fn is not None:
            return np.asarray(self.hess_fn(x, y), float)
        h = self.fd_step * 10
        f = self.f
        c = f(x, y)
        fxx = (f(x + h, y) - 2 * c + f(x - h, y)) / (h * h)
        fyy = (f(x, y + h) - 2 * c + f(x, y - h)) / (h * h)
        fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h)
        return np.array([[fxx, fxy], [fxy, fyy]])

    def shifted(self, c: float) -> "ScalarField2":
        f, name = self.f, self.name
        return ScalarField2(lambda x, y: f(x, y) + c, self.grad_fn, self.hess_fn, f"{name}+{c:g}", self.fd_step)


def constant_field(c: float) -> ScalarField2:
    return ScalarField2(lambda x, y: c, lambda x, y: (0.0, 0.0), lambda x, y: ((0.0, 0.0), (0.0, 0.0)), f"{c:g}")


def linear_field(a: float, b: float, c: float = 0.0) -> ScalarField2:
    return ScalarField2(lambda x, y: a * x + b * y + c, lambda x, y: (a, b),
                        lambda x, y: ((0.0, 0.0), (0.0, 0.0)), f"{a:g}x+{b:g}y+{c:g}")


def radial_field() -> ScalarField2:
    def g(x, y):
        r = math.hypot(x, y)
        return (x / r, y / r)

    def H(x, y):
        r = math.hypot(x, y)
        r3 = r**3
        return ((y * y / r3, -x * y / r3), (-x * y / r3, x * x / r3))

    return ScalarField2(lambda x, y: math.hypot(x, y), g, H, "r")


def quadratic_field(a: float, b: float, c: float) -> ScalarField2:
    """``a x^2/2 + b x y + c y^2/2``."""
    return ScalarField2(lambda x, y: 0.5 * a * x * x + b * x * y + 0.5 * c * y * y,
                        lambda x, y: (a * x + b * y, b * x + c * y),
                        lambda x, y: ((a, b), (b, c)), f"quad({a:g},{b:g},{c:g})")


# ---------------------------------------------------------------------------
# eikonal system and Legendre / hodograph checks


def eikonal_residual(u: ScalarField2, v: ScalarField2, p) -> tuple[float, float]:
    """``(u|∇u|^2 - |∇v|^2 + 1, ∇u·∇v)`` at ``p``."""
    x, y = float(p[0]), float(p[1])
    gu = u.grad(x, y)
    gv = v.grad(x, y)
    r1 = u(x, y) * (gu[0] * gu[0] + gu[1] * gu[1]) - (gv[0] * gv[0] + gv[1] * gv[1]) + 1.0
    r2 = gu[0] * gv[0] + gu[1] * gv[1]
    return float(r1), float(r2)


class HodographError(ValueError):
    pass


def legendre_check(v: ScalarField2, V: ScalarField2, p, threshold: float = 1e-10) -> float:
    """``|V(∇v) - (x v_x + y v_y - v)|`` at ``p``.

    Raises ``HodographError`` when ``det Hess v`` is below ``threshold`` in
    magnitude, i.e. the gradient map is not locally invertible.
    """
    x, y = float(p[0]), float(p[1])
    H = v.hess(x, y)
    J = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
    if abs(J) < threshold:
        raise HodographError(f"gradient map is degenerate at {(x, y)} (Jacobian {J:.3e})")
    g = v.grad(x, y)
    return abs(V(g[0], g[1]) - (x * g[0] + y * g[1] - v(x, y)))


def hodograph_jacobian(V: ScalarField2, pq) -> float:
    """``V_pp V_qq - V_pq^2``."""
    H = V.hess(float(pq[0]), float(pq[1]))
    return float(H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0])


def hodograph_system_check(pq, second) -> tuple[float, float]:
    """Residuals of the linear hodograph system for ``x = V_p``, ``y = V_q``.

    ``second`` is a ``ScalarField2`` or a 2x2 array ``[[x_p, x_q], [y_p, y_q]]``.
    """
    p, q = float(pq[0]), float(pq[1])
    H = second.hess(p, q) if isinstance(second, ScalarField2) else np.asarray(second, float)
    xp, xq, yp, yq = H[0, 0], H[0, 1], H[1, 0], H[1, 1]
    s = (p * p + q * q) ** 2
    r1 = (s - p * p) * xp - 2 * p * q * xq + (s - q * q) * yq
    return float(r1), float(xq - yp)
