"""One-step transport, Runge-Kutta marching and the time loop."""

import numpy as np
import numpy.testing as npt
import pytest
from numpy.polynomial import legendre

from eldg_transport.adjoint import VelocityField, build_adjoint_st1, zero_adjoint
from eldg_transport.errors import ConfigError, StepRejected
from eldg_transport.mesh import (
    Mesh1D,
    build_mesh,
    gauss_lobatto_nodes,
    get_basis,
    project_function,
)
from eldg_transport.problems import UNIT_SPEED, catalog_lookup
from eldg_transport.solver import (
    FORWARD_EULER,
    SSP_RK2,
    SSP_RK3,
    RKTableau,
    StageState,
    StepConfig,
    advance_until,
    cfl_time_step,
    default_tableau,
    eldg_step,
    lax_friedrichs_flux,
    march,
    mass_matrix,
    reconstruct_test_polynomial,
    rk_advance,
    sl_project_upstream,
)

SINE_PROBLEM = catalog_lookup("advect1d-sine")
SWIRL = catalog_lookup("swirl")


def test_tableaux_are_consistent():
    assert [t.stages for t in (FORWARD_EULER, SSP_RK2, SSP_RK3)] == [1, 2, 3]
    assert default_tableau(1) is SSP_RK2
    assert default_tableau(3) is SSP_RK3
    with pytest.raises(ValueError):
        RKTableau("bad", ((1.0,), (0.6, 0.6)), ((1.0,), (0.0, 0.5)), (0.0, 1.0))
    with pytest.raises(ValueError):
        RKTableau("bad", ((1.0,), (1.5, -0.5)), ((1.0,), (0.0, 0.5)), (0.0, 1.0))


@pytest.mark.parametrize(
    "tableau,taylor",
    [
        (FORWARD_EULER, [1.0, 1.0]),
        (SSP_RK2, [1.0, 1.0, 0.5]),
        (SSP_RK3, [1.0, 1.0, 0.5, 1.0 / 6.0]),
    ],
)
def test_rk_advance_matches_taylor_polynomial(tableau, taylor):
    lam, dt = -0.8, 0.3
    out = rk_advance(
        np.array([1.0]),
        tableau,
        lambda u, tau: lam * u,
        lambda w, tau: w,
        0.0,
        dt,
    )
    expected = sum(c * (lam * dt) ** p for p, c in enumerate(taylor))
    assert out[0] == pytest.approx(expected, rel=1e-14)


def test_step_config_validation():
    with pytest.raises(ConfigError):
        StepConfig(mode="nope")
    config = StepConfig()
    assert config.order_for(1) == 2
    assert config.order_for(3) == 4
    assert config.tableau_for(2) is SSP_RK3
    assert StepConfig(tableau=FORWARD_EULER).tableau_for(2) is FORWARD_EULER


def test_lax_friedrichs_flux_is_upwind_for_full_dissipation():
    a = np.array([2.0, -2.0])
    flux = lax_friedrichs_flux(a * 1.0, a * 3.0, 1.0, 3.0, np.abs(a))
    npt.assert_allclose(flux, [2.0, -6.0])


def test_cfl_time_step():
    assert cfl_time_step(Mesh1D(0.0, 1.0, 10), 0.5, (3.0,)) == pytest.approx(0.05)
    mesh = build_mesh(((0.0, 1.0), (0.0, 2.0)), 10)
    assert cfl_time_step(mesh, 1.0, (1.0, 2.0)) == pytest.approx(1.0 / 20.0)
    assert cfl_time_step(mesh, 1.0, (0.0, 0.0)) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        cfl_time_step(mesh, 0.0, (1.0, 1.0))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_sldg_unit_shift_is_exact(k):
    mesh = Mesh1D(0.0, 2 * np.pi, 16)
    u = project_function(np.sin, mesh, k)
    config = StepConfig(mode="sldg")
    out = eldg_step(u, UNIT_SPEED, 0.0, mesh.dx, config)
    npt.assert_allclose(out.coeffs, np.roll(u.coeffs, 1, axis=0), atol=1e-12)
    assert out.time == pytest.approx(mesh.dx)


def test_eldg_with_exact_adjoint_equals_sldg():
    mesh = Mesh1D(0.0, 2 * np.pi, 20)
    u = project_function(np.sin, mesh, 2)
    dt = 0.37 * mesh.dx
    eldg = eldg_step(u, UNIT_SPEED, 0.0, dt, StepConfig(mode="eldg-st1"))
    sldg = eldg_step(u, UNIT_SPEED, 0.0, dt, StepConfig(mode="sldg"))
    npt.assert_allclose(eldg.coeffs, sldg.coeffs, atol=1e-13)


@pytest.mark.parametrize("mode", ["eldg-st1", "eldg-st2", "sldg", "rkdg"])
@pytest.mark.parametrize("k", [1, 2])
def test_mass_conservation_1d(mode, k):
    mesh = Mesh1D(0.0, 2 * np.pi, 24)
    u = project_function(lambda x: 1.0 + 0.5 * np.cos(x), mesh, k)
    mass0 = u.total_mass
    dt = 0.25 * mesh.dx
    config = StepConfig(mode=mode)
    for n in range(10):
        u = eldg_step(u, SINE_PROBLEM.velocity, n * dt, dt, config)
        assert u.total_mass == pytest.approx(mass0, rel=1e-12)


@pytest.mark.parametrize("mode", ["eldg-st1", "eldg-st2", "sldg", "rkdg"])
def test_mass_conservation_2d(mode):
    mesh = SWIRL.mesh(12)
    u = SWIRL.project_initial(mesh, 1)
    mass0 = u.total_mass
    dt = cfl_time_step(mesh, 0.3, SWIRL.velocity.max_speeds())
    config = StepConfig(mode=mode)
    for n in range(4):
        u = eldg_step(u, SWIRL.velocity, n * dt, dt, config)
        assert u.is_finite()
    assert u.total_mass == pytest.approx(mass0, rel=1e-10)


def test_mass_conservation_rotation_bell():
    problem = catalog_lookup("rigid-rotation")
    mesh = problem.mesh(16)
    u = problem.project_initial(mesh, 2)
    dt = cfl_time_step(mesh, 0.18, problem.velocity.max_speeds())
    adjoint = build_adjoint_st1(problem.velocity, mesh, dt)
    moments = sl_project_upstream(u, adjoint, problem.velocity, dt)
    assert isinstance(moments, StageState)
    assert moments.time == pytest.approx(0.0)
    mass = np.sum(moments.moments[..., 0]) * mesh.cell_area
    assert mass == pytest.approx(u.total_mass, rel=1e-12)


@pytest.mark.parametrize("mode", ["eldg-st1", "eldg-st2", "sldg", "rkdg"])
def test_one_step_keeps_field_layout(mode):
    line = Mesh1D(0.0, 2 * np.pi, 20)
    u = project_function(np.sin, line, 1)
    out = eldg_step(u, SINE_PROBLEM.velocity, 0.0, 0.5 * line.dx, StepConfig(mode))
    assert out.coeffs.shape == (20, 2)
    assert out.is_finite()

    square = SWIRL.mesh(8)
    v = SWIRL.project_initial(square, 1)
    dt = cfl_time_step(square, 0.5, SWIRL.velocity.max_speeds())
    out = eldg_step(v, SWIRL.velocity, 0.0, dt, StepConfig(mode))
    assert out.coeffs.shape == (8, 8, 3)
    assert out.is_finite()


def test_mass_matrix_is_identity_at_anchor():
    mesh = SWIRL.mesh(6)
    adjoint = build_adjoint_st1(SWIRL.velocity, mesh, 0.5)
    dt = 0.1
    at_anchor = mass_matrix(adjoint, dt, 0.5, 2)
    identity = np.broadcast_to(np.eye(6), at_anchor.shape)
    npt.assert_allclose(at_anchor, identity, atol=1e-14)
    earlier = mass_matrix(adjoint, dt, 0.4, 2)
    assert np.all(np.linalg.eigvalsh(earlier) > 0)
    line = Mesh1D(0.0, 2 * np.pi, 8)
    adjoint = build_adjoint_st1(SINE_PROBLEM.velocity, line, 1.0)
    matrix = mass_matrix(adjoint, 0.2, 0.8, 1)
    assert matrix.shape == (8, 2, 2)
    npt.assert_allclose(matrix[:, 0, 1], 0.0)


def _identity_map(mesh):
    return zero_adjoint(mesh, 1.0).maps(0.1)


def test_test_polynomial_of_identity_map_is_the_basis():
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 3)
    maps = _identity_map(mesh).select(1, 2)
    test = reconstruct_test_polynomial(maps, 2)
    r = np.array([-0.9, 0.1, 0.7])
    s = np.array([0.4, -0.3, 1.0])
    x = maps.xc + 0.5 * maps.hx * r
    y = maps.yc + 0.5 * maps.hy * s
    npt.assert_allclose(test(x, y), get_basis(2, 2).evaluate(r, s), atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_test_polynomial_interpolates_at_mapped_nodes(k):
    mesh = SWIRL.mesh(5)
    adjoint = build_adjoint_st1(SWIRL.velocity, mesh, 0.3)
    maps = adjoint.maps(0.1)
    test = reconstruct_test_polynomial(maps, k)
    nodes = gauss_lobatto_nodes(k + 1)
    rr, ss = np.meshgrid(nodes, nodes, indexing="ij")
    x, y = maps.map_local(rr.ravel(), ss.ravel(), 0.2)
    single = maps.select(2, 3)
    cell = reconstruct_test_polynomial(single, k)
    expected = get_basis(k, 2).evaluate(rr.ravel(), ss.ravel())
    npt.assert_allclose(cell(x[2, 3], y[2, 3]), expected, atol=1e-10)
    npt.assert_allclose(test.coeffs[2, 3], cell.coeffs, atol=1e-10)
    assert test.center.shape == (5, 5, 2)
    npt.assert_allclose(test.center[2, 3], cell.center, atol=1e-12)


def test_step_rejected_for_huge_time_step():
    mesh = Mesh1D(0.0, 2 * np.pi, 20)
    u = project_function(lambda x: 1.0 + 0.0 * x, mesh, 2)
    with pytest.raises(StepRejected) as info:
        eldg_step(u, SINE_PROBLEM.velocity, 0.0, 5.0)
    assert info.value.suggested_dt < 5.0


def test_eldg_step_rejects_bad_dt():
    mesh = Mesh1D(0.0, 1.0, 4)
    u = project_function(lambda x: x, mesh, 1)
    with pytest.raises(ValueError):
        eldg_step(u, UNIT_SPEED, 0.0, 0.0)


def test_march_lands_on_final_and_stop_times():
    mesh = Mesh1D(0.0, 2 * np.pi, 16)
    u = project_function(np.sin, mesh, 1)
    seen = []
    final = march(
        u, UNIT_SPEED, 1.0, 0.3, stop_times=(0.5,), callback=lambda t, v: seen.append(t)
    )
    assert final.time == 1.0
    assert 0.5 in seen
    assert seen == sorted(seen)
    nominal = 0.3 * mesh.dx
    assert len(seen) == int(np.ceil(0.5 / nominal)) * 2


def test_single_step_when_final_time_equals_dt():
    mesh = Mesh1D(0.0, 2 * np.pi, 16)
    u = project_function(np.sin, mesh, 2)
    seen = []
    march(u, UNIT_SPEED, 0.3 * mesh.dx, 0.3, callback=lambda t, v: seen.append(t))
    assert len(seen) == 1


def test_advance_until_halves_rejected_steps():
    mesh = Mesh1D(0.0, 1.0, 4)
    u = project_function(lambda x: x, mesh, 1)
    sizes = []

    def step(v, t, dt):
        if dt > 0.3:
            raise StepRejected(dt, None)
        sizes.append(dt)
        return v

    final = advance_until(u, 1.0, step, lambda v, t: 1.0)
    assert final.time == 1.0
    assert sizes[0] == 0.25
    assert sum(sizes) == pytest.approx(1.0)


def _rkdg_oracle(coeffs, k, dx, dt, steps):
    """Textbook modal RKDG for u_t + (sin(x) u)_x = 0 on [0, 2pi)"""
    n = coeffs.shape[0]
    nodes, weights = legendre.leggauss(k + 2)
    scale = np.sqrt(2 * np.arange(k + 1) + 1.0)
    vander = legendre.legvander(nodes, k) * scale
    deriv = np.zeros((k + 2, k + 1))
    for m in range(k + 1):
        unit = np.zeros(k + 1)
        unit[m] = scale[m]
        deriv[:, m] = legendre.legval(nodes, legendre.legder(unit))
    right = legendre.legvander(np.array([1.0]), k)[0] * scale
    left = legendre.legvander(np.array([-1.0]), k)[0] * scale
    x_nodes = dx * (np.arange(n)[:, None] + 0.5) + 0.5 * dx * nodes[None, :]
    a_nodes = np.sin(x_nodes)
    a_edge = np.sin(dx * (np.arange(n) + 1.0))

    def rhs(c):
        flux_vol = a_nodes * (c @ vander.T)
        out = (flux_vol * weights) @ deriv
        um = c @ right
        up = np.roll(c, -1, axis=0) @ left
        fhat = 0.5 * a_edge * (um + up) - 0.5 * np.abs(a_edge) * (up - um)
        out -= np.outer(fhat, right)
        out += np.outer(np.roll(fhat, 1), left)
        return out / dx

    c = coeffs.copy()
    for _ in range(steps):
        if k == 1:
            c1 = c + dt * rhs(c)
            c = 0.5 * c + 0.5 * (c1 + dt * rhs(c1))
        else:
            c1 = c + dt * rhs(c)
            c2 = 0.75 * c + 0.25 * (c1 + dt * rhs(c1))
            c = c / 3.0 + 2.0 / 3.0 * (c2 + dt * rhs(c2))
    return c


@pytest.mark.parametrize("k", [1, 2])
def test_rkdg_mode_matches_textbook_rkdg(k):
    mesh = Mesh1D(0.0, 2 * np.pi, 20)
    u = project_function(lambda x: 1.0 + 0.3 * np.cos(2 * x), mesh, k)
    dt = 0.2 * mesh.dx
    expected = _rkdg_oracle(np.array(u.coeffs), k, mesh.dx, dt, 10)
    config = StepConfig(mode="rkdg")
    for n in range(10):
        u = eldg_step(u, SINE_PROBLEM.velocity, n * dt, dt, config)
    npt.assert_allclose(u.coeffs, expected, atol=1e-12)


def test_rkdg_2d_needs_periodic_mesh():
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), 4, periodic=False)
    u = project_function(lambda x, y: 1.0 + 0.0 * x, mesh, 1)
    velocity = VelocityField(lambda x, y, t: (1.0, 0.0), 2, (1.0, 0.0))
    with pytest.raises(ConfigError):
        eldg_step(u, velocity, 0.0, 0.01, StepConfig(mode="rkdg"))


@pytest.mark.parametrize("mode", ["eldg-st1", "eldg-st2"])
def test_sine_velocity_converges(mode):
    errors = []
    for n in (20, 40):
        mesh = Mesh1D(0.0, 2 * np.pi, n)
        u = project_function(SINE_PROBLEM.initial, mesh, 2)
        final = march(u, SINE_PROBLEM.velocity, 1.0, 0.18, StepConfig(mode=mode))
        exact = SINE_PROBLEM.exact_at(1.0)
        diff = final.evaluate(mesh.centers) - exact(mesh.centers)
        errors.append(np.max(np.abs(diff)))
    assert errors[1] < errors[0] / 5
