import math

import numpy as np
import pytest
import sympy as sp_
from hypothesis import given, settings
from hypothesis import strategies as st

from mixtype.operators import (
    SYSTEM_IDS,
    ClassificationError,
    MultiplierSpec,
    PerturbationParams,
    TypeClass,
    adjoint,
    apply_multiplier,
    assemble_system,
    characteristic_quadratic,
    characteristic_roots,
    classify_point,
    classify_points,
    wrap_angle,
)

coord = st.floats(-3, 3, allow_nan=False)


def off_optics_chart(x, y):
    # the optics system requires f - y^2 != 0 with f = (x^2 + y^2)^2
    return abs((x * x + y * y) ** 2 - y * y) < 1e-9


def _system(sid):
    if sid == "hodge-perturbed":
        return assemble_system(sid, PerturbationParams(0.01, 0, 0, 0.01))
    if sid == "optics-polar-perturbed":
        return assemble_system(sid, PerturbationParams(0.1, 0.1))
    return assemble_system(sid)


def test_hodge_case3_at_origin():
    co = assemble_system("hodge-case3").at((0, 0))
    assert np.array_equal(co.A1, np.diag([1.0, -1.0]))
    assert np.array_equal(co.A2, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(co.B, np.zeros((2, 2)))


def test_optics_polar_at_outer_radius():
    co = assemble_system("optics-polar").at((math.sqrt(2), 0.3))
    assert np.allclose(co.A1, np.diag([1.0, -1.0]))
    assert np.array_equal(co.A2, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(co.B, [[math.sqrt(2), 0], [0, 0]])


def test_perturbed_B_at_origin():
    co = assemble_system("hodge-perturbed", {"eps1": 0.01, "eps2": 0, "eps3": 0, "eps4": 0.01}).at((0, 0))
    assert np.allclose(co.B, np.diag([0.01, 0.01]))


def test_case_constants():
    assert assemble_system("hodge-case1").k == (-2, -2, 0, 0)
    assert assemble_system("hodge-case2").k == (-2, 0, 0, 2)
    assert assemble_system("hodge-case3").k == (0, 0, 0, 0)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        assemble_system("tricomi")
    with pytest.raises(ValueError):
        assemble_system("hodge-perturbed", PerturbationParams(0.0, 0, 0, 0.01))
    with pytest.raises(ValueError):
        assemble_system("optics-polar-perturbed", PerturbationParams(0.1, -0.1))


@pytest.mark.parametrize("sid", SYSTEM_IDS)
@settings(max_examples=30)
@given(x=coord, y=coord)
def test_A_symmetric_everywhere(sid, x, y):
    co = _system(sid).at((x, y))
    assert co.A1[0, 1] == co.A1[1, 0]
    assert co.A2[0, 1] == co.A2[1, 0]


@pytest.mark.parametrize("sid", SYSTEM_IDS)
def test_derivative_fields_match_sympy(sid):
    # symbolic oracle: rebuild A1, A2 from the closed forms and differentiate
    x, y = sp_.symbols("x y")
    if sid.startswith("hodge"):
        A1 = sp_.Matrix([[1 - x**2, 0], [0, -(1 - y**2)]])
        A2 = sp_.Matrix([[-2 * x * y, 1 - y**2], [1 - y**2, 0]])
    elif sid == "optics-cartesian":
        f = (x**2 + y**2) ** 2
        A1 = sp_.Matrix([[f - x**2, 0], [0, -(f - y**2)]])
        A2 = sp_.Matrix([[-2 * x * y, f - y**2], [f - y**2, 0]])
    else:
        A1 = sp_.Matrix([[x**2 - 1, 0], [0, -1]])
        A2 = sp_.Matrix([[0, 1], [1, 0]])
    sysm = _system(sid)
    rng = np.random.default_rng(3)
    for px, py in rng.uniform(0.2, 1.8, (5, 2)):
        co = sysm.at((px, py))
        sub = {x: px, y: py}
        assert np.allclose(co.A1, np.array(A1.subs(sub), float), rtol=1e-13)
        assert np.allclose(co.A2, np.array(A2.subs(sub), float), rtol=1e-13)
        assert np.allclose(co.dA1, np.array(A1.diff(x).subs(sub), float), rtol=1e-13)
        assert np.allclose(co.dA2, np.array(A2.diff(y).subs(sub), float), rtol=1e-13)


def test_classification_examples():
    assert classify_point(assemble_system("hodge-case3"), (0, 0)) == TypeClass.ELLIPTIC
    assert classify_point(assemble_system("optics-cartesian"), (0.5, 0)) == TypeClass.HYPERBOLIC
    r = 1 / math.sqrt(2)
    assert classify_point(assemble_system("hodge-case3"), (r, r)) == TypeClass.PARABOLIC
    assert classify_point(assemble_system("optics-cartesian"), (r, r)) == TypeClass.PARABOLIC


def test_roots_examples():
    assert characteristic_roots(assemble_system("hodge-case3"), (math.sqrt(2), 0)) == pytest.approx([-1, 1])
    assert characteristic_roots(assemble_system("hodge-case3"), (0, 0)) == []
    s3 = math.sqrt(3)
    assert characteristic_roots(assemble_system("optics-cartesian"), (0.5, 0)) == pytest.approx([-s3, s3])


def test_degenerate_quadratic_raises():
    sysm = assemble_system("hodge-case3")
    with pytest.raises(ClassificationError):
        classify_point(sysm, (1.0, 1.0))
    assert str(classify_points(sysm, 1.0, 1.0, strict=False)) == "undefined"
    with pytest.raises(ClassificationError):
        classify_point(assemble_system("optics-cartesian"), (0.0, 0.0))
    with pytest.raises(ClassificationError):
        classify_point(assemble_system("optics-cartesian"), (0.5, 0.5))


def test_optics_near_degenerate_curve_stays_hyperbolic():
    # on f = y^2 the pencil vanishes; nearby the common factor cancels out
    y = 0.5
    sysm = assemble_system("optics-cartesian")
    for dx in (1e-3, 1e-6, 1e-9):
        assert classify_point(sysm, (0.5 + dx, y)) == TypeClass.HYPERBOLIC


@pytest.mark.parametrize("sid,inside", [("hodge-case3", TypeClass.ELLIPTIC), ("hodge-case1", TypeClass.ELLIPTIC),
                                        ("optics-cartesian", TypeClass.HYPERBOLIC)])
@settings(max_examples=200)
@given(x=st.floats(-1.9, 1.9), y=st.floats(-0.95, 0.95))
def test_type_regions(sid, inside, x, y):
    rho2 = x * x + y * y
    if abs(rho2 - 1) <= 0.01 or rho2 < 1e-4 or off_optics_chart(x, y):
        return
    cls = classify_point(assemble_system(sid), (x, y))
    outside = TypeClass.HYPERBOLIC if inside == TypeClass.ELLIPTIC else TypeClass.ELLIPTIC
    assert cls == (inside if rho2 < 1 else outside)


@settings(max_examples=200)
@given(x=st.floats(-1.9, 1.9), y=st.floats(-0.95, 0.95))
def test_root_count_and_residual(x, y):
    if x * x + y * y < 1e-4 or off_optics_chart(x, y):
        return
    for sid in ("hodge-case3", "optics-cartesian"):
        sysm = assemble_system(sid)
        cls = classify_point(sysm, (x, y))
        roots = characteristic_roots(sysm, (x, y))
        assert len(roots) == {TypeClass.ELLIPTIC: 0, TypeClass.PARABOLIC: 1, TypeClass.HYPERBOLIC: 2}[cls]
        co = sysm.at((x, y))
        scale = 1 + np.abs(co.A1).max() + np.abs(co.A2).max()
        for lam in roots:
            if math.isfinite(lam):
                d = np.linalg.det(co.A1 - lam * co.A2)
                assert abs(d) <= 1e-9 * scale * scale * (1 + lam * lam)


def test_quadratic_matches_hodge_closed_form():
    x, y = 0.4, -0.3
    a, b, c = characteristic_quadratic(assemble_system("hodge-case3"), (x, y))
    w = 1 - y * y
    # |A1 - lam A2| = -(1-y^2)[(1-y^2) lam^2 + 2xy lam + (1-x^2)]
    assert (a, b, c) == pytest.approx((-w * w, -w * 2 * x * y, -w * (1 - x * x)))


def test_adjoint_pairings():
    x, y = 1.0, 1.0
    for c in (1, 2, 3):
        s = assemble_system(f"hodge-case{c}")
        sa = adjoint(s)
        assert np.array_equal(sa.at((0.3, 0.2)).A1, s.at((0.3, 0.2)).A1)
    B1 = adjoint(assemble_system("hodge-case1")).at((x, y)).B
    assert B1[1, 0] == pytest.approx(2.0)
    B2 = adjoint(assemble_system("hodge-case2")).at((0.5, 0.25)).B
    assert B2[1, 1] == pytest.approx(-2 * 0.25)
    B3 = adjoint(assemble_system("hodge-case3"))
    p = (0.37, -0.61)
    assert np.allclose(B3.at(p).B, assemble_system("hodge-case3").at(p).B)


@settings(max_examples=50)
@given(x=coord, y=coord)
def test_adjoint_involution(x, y):
    for sid in SYSTEM_IDS:
        s = _system(sid)
        ss = adjoint(adjoint(s))
        a, b = s.at((x, y)), ss.at((x, y))
        for u, v in zip(a, b):
            assert np.allclose(u, v, rtol=1e-12, atol=1e-12)


def test_multiplier_examples():
    E = MultiplierSpec(c=1.0, M=30.0, eps1=0.1, eps2=0.1)
    sysE = apply_multiplier(E, assemble_system("optics-polar-perturbed", PerturbationParams(0.1, 0.1)))
    r, th = 0.7, 2.0
    a = E.a(r, th)
    co = sysE.at((r, th))
    assert np.allclose(co.A2, [[1 - r * r, a], [a, 1]])
    co1 = sysE.at((1.0, th)).A1
    assert np.allclose(co1, [[0, 0], [0, -E.a(1.0, th)]])
    assert co.A1[0, 1] == co.A1[1, 0]
    assert a == pytest.approx(30 * math.exp(0.2) + (math.sqrt(2) - 0.1) / 0.1)


def test_multiplier_product_rule_derivatives():
    E = MultiplierSpec(c=0.7, M=5.0, eps1=0.1, eps2=0.2)
    sysE = apply_multiplier(E, assemble_system("optics-polar-perturbed", PerturbationParams(0.1, 0.2)))
    h = 1e-6
    for r, th in [(0.4, 1.0), (1.2, 5.5), (0.9, 3.0)]:
        co = sysE.at((r, th))
        d1 = (sysE.at((r + h, th)).A1 - sysE.at((r - h, th)).A1) / (2 * h)
        d2 = (sysE.at((r, th + h)).A2 - sysE.at((r, th - h)).A2) / (2 * h)
        assert np.allclose(co.dA1, d1, atol=1e-6)
        assert np.allclose(co.dA2, d2, atol=1e-6)


def test_wrap_angle_convention():
    assert wrap_angle(0.0) == pytest.approx(2 * math.pi)
    assert wrap_angle(2 * math.pi) == pytest.approx(2 * math.pi)
    assert wrap_angle(-0.5) == pytest.approx(2 * math.pi - 0.5)


def test_multiplier_requires_polar_optics():
    with pytest.raises(ValueError):
        apply_multiplier(MultiplierSpec(1.0, 30.0, 0.1, 0.1), assemble_system("hodge-case3"))
