import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixtype.geometry import (
    DomainError,
    DomainKind,
    Line2,
    PoleAtInfinity,
    SegmentRole,
    SingularMetricError,
    beltrami_metric,
    boundary_normal,
    build_domain,
    characteristic_form,
    characteristic_line,
    chord_endpoints,
    make_segment,
    omega1,
    omega4,
    omega5,
    pole_of_chord,
    tangent_line_at,
    validate_domain,
)

R2 = 1 / math.sqrt(2)
angles = st.floats(0, 2 * math.pi, exclude_max=True)


def test_characteristic_line_examples():
    l0 = characteristic_line(0.0)
    assert np.allclose([l0.c1, l0.c2, l0.c0], [1, 0, 1])
    l1 = characteristic_line(math.pi / 2)
    assert l1.residual((5.0, 1.0)) == pytest.approx(0, abs=1e-15)
    l2 = characteristic_line(math.pi / 4)
    assert np.allclose(l2.foot, [R2, R2])
    assert l2.residual((R2, R2)) == pytest.approx(0, abs=1e-15)


@given(angles)
def test_characteristic_lines_are_tangent(theta):
    line = characteristic_line(theta)
    assert math.hypot(line.c1, line.c2) == pytest.approx(1, abs=1e-15)
    assert abs(line.c0) == pytest.approx(1, abs=1e-15)
    # the direction along the line solves the characteristic equation
    for t in (-2.0, 0.3, 1.7):
        assert characteristic_form(line.point(t), line.direction) == pytest.approx(0, abs=1e-12)


def test_pole_examples():
    assert np.allclose(pole_of_chord((R2, R2), (R2, -R2)), [math.sqrt(2), 0])
    assert np.allclose(pole_of_chord((0, 1), (1, 0)), [1, 1])
    with pytest.raises(PoleAtInfinity):
        pole_of_chord((1, 0), (-1, 0))


@given(angles, angles)
def test_pole_lies_on_both_tangents(a, b):
    if abs(math.sin((a - b) / 2)) < 1e-3 or abs(math.cos((a - b) / 2)) < 1e-3:
        return
    p1 = np.array([math.cos(a), math.sin(a)])
    p2 = np.array([math.cos(b), math.sin(b)])
    P = pole_of_chord(p1, p2)
    scale = 1 + np.hypot(*P)
    assert abs(tangent_line_at(p1).residual(P)) <= 1e-9 * scale
    assert abs(tangent_line_at(p2).residual(P)) <= 1e-9 * scale
    assert np.hypot(*P) > 1


@settings(max_examples=50)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), angles)
def test_metric_orthogonality_matches_pole_condition(x, y, phi):
    # chord through p with direction d1; its Beltrami-orthogonal chord d2
    p = np.array([x, y])
    g = beltrami_metric(p).matrix()
    d1 = np.array([math.cos(phi), math.sin(phi)])
    v = g @ d1
    d2 = np.array([-v[1], v[0]])
    e1, e2 = chord_endpoints(p, d2)
    try:
        P2 = pole_of_chord(e1, e2)
    except PoleAtInfinity as exc:
        # the ideal point lies in the direction of the first chord
        assert abs(d1[0] * exc.direction[1] - d1[1] * exc.direction[0]) < 1e-8
        return
    assert abs(Line2.through(p, p + d1).residual(P2)) <= 1e-8 * (1 + np.hypot(*P2))


def test_metric_examples():
    g = beltrami_metric((0, 0))
    assert (g.g11, g.g12, g.g22, g.det) == (1, 0, 1, 1)
    g = beltrami_metric((0.5, 0))
    assert g.g11 == pytest.approx(16 / 9) and g.g12 == 0 and g.g22 == pytest.approx(4 / 3)
    with pytest.raises(SingularMetricError):
        beltrami_metric((R2, R2))


@given(st.floats(-0.99, 0.99), angles)
def test_metric_determinant(r, phi):
    p = (r * math.cos(phi), r * math.sin(phi))
    g = beltrami_metric(p)
    D = 1 - r * r
    assert g.det == pytest.approx(D**-3, rel=1e-10)
    assert g.det == pytest.approx(g.g11 * g.g22 - g.g12**2, rel=1e-10)


def test_omega1_degenerate_double_characteristic():
    dom = omega1(0.0)
    gam = dom.segments_with_role(SegmentRole.GAMMA)
    assert len(gam) == 1
    assert np.allclose(gam[0].points[:, 0], 1.0)
    for s in (0.0, 0.3 * gam[0].length, gam[0].length):
        assert np.allclose(boundary_normal(gam[0], s), [1, 0])


def test_omega5_circles_and_normals():
    dom = build_domain("omega5", eps0=0.1)
    outer = dom.segments_with_role(SegmentRole.OUTER)[0]
    inner = dom.segments_with_role(SegmentRole.INNER)[0]
    assert np.allclose(np.hypot(*outer.points.T), math.sqrt(2))
    assert np.allclose(np.hypot(*inner.points.T), 0.1)
    k = int(np.argmin(np.abs(outer.points[:, 1]) + (outer.points[:, 0] < 0)))
    assert np.allclose(outer.normals[k], [1, 0])
    k = int(np.argmin(np.abs(inner.points[:, 1]) + (inner.points[:, 0] < 0)))
    assert np.allclose(inner.normals[k], [-1, 0])


def test_omega1_dip_below_box_raises():
    knots = np.array([[R2, R2], [1.0, 0.0], [0.75, -0.8], [R2, -R2]])
    t = np.linspace(0, 1, 61)
    curve = np.column_stack([np.interp(t, np.linspace(0, 1, 4), knots[:, i]) for i in (0, 1)])
    with pytest.raises(DomainError) as exc:
        omega1(math.pi / 4, curve=curve)
    assert exc.value.location[1] < -R2


@pytest.mark.parametrize("kind", [k.value for k in DomainKind])
def test_builders_pass_their_own_validator(kind):
    dom = build_domain(kind)
    assert validate_domain(dom) is dom
    for seg in dom.segments:
        assert np.allclose(np.hypot(*seg.normals.T), 1)
        assert np.allclose(np.einsum("ij,ij->i", seg.normals, seg.tangents), 0, atol=1e-12)
        if seg.role == SegmentRole.GAMMA:
            assert np.max(np.abs(characteristic_form(seg.points, seg.tangents))) <= 1e-10
        if seg.role == SegmentRole.C:
            assert np.all(np.diff(seg.points[:, 1]) <= 0)


@pytest.mark.parametrize("theta", [0.0, 0.2, math.pi / 8, math.pi / 4])
def test_omega1_family(theta):
    dom = omega1(theta)
    pts = dom.all_boundary_points()
    assert pts[:, 0].min() >= R2 - 1e-12 and pts[:, 0].max() <= math.sqrt(2) + 1e-12
    assert pts[:, 1].min() >= -R2 - 1e-12 and pts[:, 1].max() <= R2 + 1e-12


def test_rising_C_is_rejected():
    dom = omega1(0.0)
    seg = dom.segments_with_role(SegmentRole.C)[0]
    bad = make_segment(SegmentRole.C, "C", seg.points[::-1])
    with pytest.raises(DomainError):
        validate_domain(type(dom)(dom.kind, dom.params, (dom.segments[0], bad), dom.chart, dom.lines,
                                  dom.chains, dom.interior_point))


def test_boundary_normal_out_of_range():
    seg = omega5().segments[0]
    with pytest.raises(ValueError):
        boundary_normal(seg, seg.length * 2)


def test_omega4_requires_strip():
    t = np.linspace(0, math.pi, 30)
    F = np.column_stack([np.cos(t - math.pi), 1.2 * np.sin(t - math.pi)])
    with pytest.raises(DomainError):
        omega4(F=F)


def test_omega5_rejects_bad_radius():
    with pytest.raises(DomainError):
        omega5(eps0=1.5)
