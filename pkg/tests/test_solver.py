import numpy as np
import pytest

from mixtype.friedrichs import BoundaryCondition, mixed_condition
from mixtype.geometry import omega1, omega3, omega4, omega5
from mixtype.mesh import box_grid, build_grid, polar_grid
from mixtype.operators import apply_operator, assemble_system
from mixtype.solver import (
    DiscreteField,
    SolverError,
    boundary_rows,
    convergence_study,
    discretize,
    field_errors,
    manufactured_hodge_case3,
    manufactured_optics_polar,
    normal_equation_gradient,
    solve_least_squares,
    solve_manufactured,
)


def test_optics_polar_radial_field():
    sys = assemble_system("optics-polar")
    grid, op = discretize(sys, omega5(0.1), (16, 32))
    u = DiscreteField.from_function(grid, lambda r, t: np.stack([2 * r, 0 * r], -1))
    got = op.apply(u)
    r = op.points[:, 0]
    want = np.column_stack([4 * r * r - 2, 0 * r])
    assert np.max(np.abs(got - want)) <= 10 * grid.h**2


def test_hodge_case3_constant_field():
    sys = assemble_system("hodge-case3")
    grid, op = discretize(sys, omega3(), 16)
    u = DiscreteField.from_function(grid, lambda x, y: np.stack([1 + 0 * x, 0 * x], -1))
    xy = grid.cartesian(op.points)
    want = np.column_stack([-2 * xy[:, 0], 0 * xy[:, 0]])
    np.testing.assert_allclose(op.apply(u), want, atol=1e-12)


def test_zero_field_maps_to_zero():
    grid, op = discretize(assemble_system("hodge-case1"), omega1(0.0), 12)
    assert np.all(op.apply(DiscreteField.zeros(grid)) == 0)


@pytest.mark.parametrize("res", [4, 7])
def test_coarse_resolution_rejected(res):
    with pytest.raises(ValueError, match="at least 8"):
        discretize(assemble_system("hodge-case1"), omega1(0.0), res)


def test_chart_mismatch_rejected():
    with pytest.raises(ValueError):
        discretize(assemble_system("hodge-case1"), omega5(0.1), 16)


# ---------------------------------------------------------------------------
# consistency of the discrete operator


def _poly_field(rng):
    c = rng.normal(size=(2, 10))

    def mono(x, y):
        return np.stack([np.ones_like(x), x, y, x * x, x * y, y * y, x**3, x * x * y, x * y * y, y**3], -1)

    def dx(x, y):
        z, o = np.zeros_like(x), np.ones_like(x)
        return np.stack([z, o, z, 2 * x, y, z, 3 * x * x, 2 * x * y, y * y, z], -1)

    def dy(x, y):
        z, o = np.zeros_like(x), np.ones_like(x)
        return np.stack([z, z, o, z, x, 2 * y, z, x * x, 2 * x * y, 3 * y * y], -1)

    return (lambda x, y: mono(x, y) @ c.T), (lambda x, y: dx(x, y) @ c.T), (lambda x, y: dy(x, y) @ c.T)


def _polar_field(fns):
    # the same polynomial pulled back to (r, theta), so it is periodic in theta
    u, dx, dy = fns

    def xy(r, t):
        return r * np.cos(t), r * np.sin(t)

    def du_r(r, t):
        c, s = np.cos(t)[..., None], np.sin(t)[..., None]
        return dx(*xy(r, t)) * c + dy(*xy(r, t)) * s

    def du_t(r, t):
        c, s = np.cos(t)[..., None], np.sin(t)[..., None]
        rr = np.asarray(r)[..., None]
        return -dx(*xy(r, t)) * rr * s + dy(*xy(r, t)) * rr * c

    return (lambda r, t: u(*xy(r, t))), du_r, du_t


def _consistency_error(sys, grid, fns):
    # cell centres are where a bilinear interpolant is second-order accurate
    u, du1, du2 = fns
    _, op = discretize(sys, grid, rule="center")
    p = op.points
    want = apply_operator(sys, p[:, 0], p[:, 1], u(p[:, 0], p[:, 1]), du1(p[:, 0], p[:, 1]), du2(p[:, 0], p[:, 1]))
    got = op.apply(DiscreteField.from_function(grid, u))
    return np.max(np.abs(got - want))


@pytest.mark.parametrize("seed", range(5))
def test_consistency_order_box(seed):
    fns = _poly_field(np.random.default_rng(seed))
    sys = assemble_system("hodge-case2")
    e = [_consistency_error(sys, box_grid((0.1, 0.6), (-0.5, -0.1), n), fns) for n in (16, 32)]
    assert e[0] / e[1] >= 3.5


@pytest.mark.parametrize("seed", range(5))
def test_consistency_order_polar(seed):
    fns = _polar_field(_poly_field(np.random.default_rng(100 + seed)))
    sys = assemble_system("optics-polar")
    r_out = np.sqrt(2)
    e = [_consistency_error(sys, polar_grid(0.1, r_out, n, 2 * n), fns) for n in (16, 32)]
    assert e[0] / e[1] >= 3.5


def test_polar_period_shift():
    sys = assemble_system("optics-polar")
    grid, op = discretize(sys, omega5(0.1), (16, 32), rule="center")
    rng = np.random.default_rng(3)
    vals = rng.normal(size=(grid.n_nodes, 2))
    n_r, n_t = grid.shape

    def roll(v, k):
        return np.roll(v.reshape(n_r, n_t, 2), -k, axis=1).reshape(-1, 2)

    out = op.apply(DiscreteField(grid, vals))
    assert np.array_equal(op.apply(DiscreteField(grid, roll(vals, n_t))), out)
    shifted = op.apply(DiscreteField(grid, roll(vals, 1)))
    # one point per cell, cells ring by ring
    o = out.reshape(n_r - 1, n_t, 2)
    s = shifted.reshape(n_r - 1, n_t, 2)
    # the wrap-around cells sum their entries in a different order
    np.testing.assert_allclose(s, np.roll(o, -1, axis=1), rtol=0, atol=1e-13)


# ---------------------------------------------------------------------------
# boundary rows


def test_mixed_rows_pick_second_component():
    grid = build_grid(omega5(0.1), 16)
    br = boundary_rows(grid, mixed_condition(1.0, 0.0))
    assert np.all(br.coeffs == np.array([0.0, 1.0]))


def test_tangential_row_where_tangent_points_down():
    grid = build_grid(omega1(0.0), 16)
    br = boundary_rows(grid, BoundaryCondition("tangential"))
    xy = grid.cartesian(grid.nodes[br.nodes])
    i = int(np.argmin(xy[:, 0]))
    np.testing.assert_allclose(br.coeffs[i], [0.0, -1.0], atol=1e-12)


def test_normal_parallel_row_at_vertex():
    grid = build_grid(omega4(), 16)
    br = boundary_rows(grid, BoundaryCondition("normal-parallel"))
    xy = grid.cartesian(grid.nodes[br.nodes])
    i = int(np.argmax(xy[:, 0]))
    np.testing.assert_allclose(xy[i], [1.5, 0.0], atol=1e-12)
    np.testing.assert_allclose(br.coeffs[i], [0.0, -1.0], atol=1e-12)


def test_condition_on_wrong_role():
    grid = build_grid(omega1(0.0), 16)
    with pytest.raises(ValueError, match="belongs on"):
        boundary_rows(grid, BoundaryCondition("tangential"), role="F")


def test_condition_without_nodes():
    grid = build_grid(omega1(0.0), 16)
    with pytest.raises(ValueError):
        boundary_rows(grid, BoundaryCondition("normal-parallel"))


# ---------------------------------------------------------------------------
# least squares


def test_homogeneous_problem_gives_zero():
    case = manufactured_optics_polar()
    grid, op = discretize(case.system, case.domain, 16)
    rows = [boundary_rows(grid, c) for c in case.conditions]
    x0 = DiscreteField(grid, np.random.default_rng(1).normal(size=(grid.n_nodes, 2)))
    u, diag = solve_least_squares(op, np.zeros((op.n_points, 2)), rows, rtol=1e-12, x0=x0)
    assert diag.converged
    assert np.max(np.abs(u.values)) < 1e-6


def test_solution_satisfies_normal_equations():
    case = manufactured_optics_polar()
    u, diag, op = solve_manufactured(case, 16, rtol=1e-12)
    f = DiscreteField.from_function(op.grid, case.forcing)
    from mixtype.solver import _rows_for
    g = normal_equation_gradient(op, u, f, _rows_for(case, op.grid))
    assert np.linalg.norm(g) <= 1e-8 * max(1.0, diag.objective)


def test_exact_start_needs_no_iterations():
    case = manufactured_optics_polar()
    _, diag, _ = solve_manufactured(case, 16, x0_exact=True, discrete_forcing=True)
    assert diag.iterations == 0
    assert diag.converged


def test_cg_failure_raises_with_diagnostics():
    case = manufactured_optics_polar()
    grid, op = discretize(case.system, case.domain, 16)
    rows = [boundary_rows(grid, c) for c in case.conditions]
    with pytest.raises(SolverError) as err:
        solve_least_squares(op, DiscreteField.from_function(grid, case.forcing), rows, maxiter=2)
    assert err.value.diagnostics.iterations == 2
    assert not err.value.diagnostics.converged


def test_failure_can_be_returned():
    case = manufactured_optics_polar()
    grid, op = discretize(case.system, case.domain, 16)
    u, diag = solve_least_squares(op, DiscreteField.from_function(grid, case.forcing), maxiter=2,
                                  raise_on_failure=False)
    assert not diag.converged and diag.n_unknowns == 2 * grid.n_nodes


# ---------------------------------------------------------------------------
# convergence


def test_optics_polar_converges():
    table = convergence_study(manufactured_optics_polar(), [16, 32, 64])
    errs = [row["l2_error"] for row in table]
    assert errs[0] > errs[1] > errs[2]
    assert table[-1]["order_l2"] >= 1.0
    # weighted L2 error bounded by C h with a modest C
    assert max(row["l2_error"] / row["h"] for row in table) < 1.0


def test_hodge_case3_reproduces_representable_field():
    # (1, 0) lies in the discrete space, so every level recovers it to solver accuracy
    case = manufactured_hodge_case3()
    u, diag, _ = solve_manufactured(case, 16)
    e_max, e_l2 = field_errors(case, u)
    assert diag.converged
    assert e_max < 1e-5 and e_l2 < 1e-6


def test_study_needs_two_resolutions():
    with pytest.raises(ValueError):
        convergence_study(manufactured_optics_polar(), [16])
