"""Reference error levels at full mesh sizes; run with `pytest -m slow`."""

import numpy as np
import pytest

from eldg_transport.config import RunConfig
from eldg_transport.consts import MODES
from eldg_transport.experiments import (
    cfl_sweep,
    convergence_study,
    max_stable_cfl,
    run_errors,
    run_problem,
)
from eldg_transport.problems import CATALOG
from eldg_transport.rkei import get_model
from eldg_transport.solver import cfl_time_step

pytestmark = pytest.mark.slow


def _column(rows, index):
    return np.array([row[index] for row in rows], dtype=float)


@pytest.mark.parametrize(
    "k,cfl,expected",
    [
        (1, 0.3, [6.08e-4, 1.55e-4, 3.84e-5, 9.77e-6]),
        (2, 0.18, [7.69e-6, 9.45e-7, 1.18e-7, 1.41e-8]),
    ],
)
def test_perturbed_advection_errors(k, cfl, expected):
    base = RunConfig("advect1d-perturbed", k=k, mesh=40, cfl=cfl)
    rows = convergence_study(base, [40, 80, 160, 320])
    np.testing.assert_allclose(_column(rows, 1), expected, rtol=0.2)
    if k == 1:
        np.testing.assert_allclose(
            _column(rows, 2)[1:], [1.97, 2.02, 1.98], atol=0.15
        )


def test_sine_velocity_errors():
    base = RunConfig("advect1d-sine", k=2, mesh=160, cfl=0.18)
    rows = convergence_study(base, [160, 320])
    assert rows[1][1] == pytest.approx(1.02e-7, rel=0.2)
    assert rows[1][2] >= 2.9
    st1 = run_errors(base.replace(mesh=40))["l1"]
    st2 = run_errors(base.replace(mesh=40, mode="eldg-st2"))["l1"]
    assert st1 == pytest.approx(6.45e-5, rel=0.2)
    assert st2 == pytest.approx(5.20e-5, rel=0.2)


def test_vlasov_poisson_reversibility():
    base = RunConfig("vp-strong-landau", k=2, mesh=32, cfl=0.1, integrator="cf3")
    rows = convergence_study(base, [32, 64, 96])
    np.testing.assert_allclose(
        _column(rows, 1), [3.25e-5, 3.82e-6, 1.11e-6], rtol=0.3
    )
    assert min(_column(rows, 2)[1:]) >= 2.8


def test_guiding_center_stationary_errors():
    base = RunConfig("gc-stationary", k=2, mesh=20, cfl=1.0, integrator="cf3")
    rows = convergence_study(base, [20, 40, 60])
    np.testing.assert_allclose(
        _column(rows, 3), [2.02e-3, 2.43e-4, 7.17e-5], rtol=0.3
    )
    assert min(_column(rows, 4)[1:]) >= 2.8
    p1 = convergence_study(base.replace(k=1, integrator="cf2"), [20, 40, 60])
    assert min(_column(p1, 4)[1:]) >= 1.8


def _two_hundred_steps(name, mode):
    spec = CATALOG[name]
    mesh = 32 if spec.dim == 1 else 8
    cfl = 0.1 if mode == "rkdg" else min(spec.cfl_for(1), 1.0)
    integrator = "cf2" if spec.nonlinear else "none"
    config = RunConfig(
        name, k=1, mesh=mesh, cfl=cfl, mode=mode, integrator=integrator
    )
    u0 = spec.project_initial(spec.mesh(mesh), 1)
    if spec.nonlinear:
        speeds = get_model(spec.model).velocity(u0).max_speeds()
    else:
        speeds = spec.velocity.max_speeds()
    dt = cfl_time_step(u0.mesh, cfl, speeds)
    return config.replace(T=200 * dt)


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("name", list(CATALOG))
def test_mass_conservation(name, mode):
    config = _two_hundred_steps(name, mode)
    result = run_problem(config)
    scale = max(abs(result.initial.total_mass), result.initial.mesh.domain_measure)
    drift = abs(result.final.total_mass - result.initial.total_mass) / scale
    # the velocity cutoff lets a little Vlasov-Poisson mass leave the domain
    limit = 1e-8 if name == "vp-strong-landau" else 1e-10
    assert drift < limit


@pytest.mark.parametrize("name", ["rigid-rotation", "swirl"])
def test_two_dimensional_orders(name):
    base = RunConfig(name, k=2, mesh=20, cfl=CATALOG[name].cfl_for(2))
    rows = convergence_study(base, [20, 40, 80])
    assert rows[2][2] >= 2.5
    assert rows[2][6] >= 2.4


def test_stability_limit_grows_with_refinement():
    cfls = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0]
    base = RunConfig("advect1d-sine", k=2, mesh=80, cfl=0.5)
    coarse = max_stable_cfl(cfl_sweep(base, cfls))
    fine = max_stable_cfl(cfl_sweep(base.replace(mesh=320), cfls))
    assert coarse is not None and 2.0 <= coarse <= 4.5
    assert fine is not None and 4.9 <= fine <= 9.1
    assert fine > coarse


def _slope(rows):
    cfl = np.array([row[0] for row in rows])
    error = np.array([row[1] for row in rows], dtype=float)
    return np.polyfit(np.log(cfl), np.log(error), 1)[0]


@pytest.mark.parametrize("integrator,order", [("cf2", 2.0), ("cf3", 3.0)])
def test_exponential_integrator_temporal_order(integrator, order):
    base = RunConfig("gc-kh", k=2, mesh=32, cfl=1.0, T=1.0, integrator=integrator)
    rows = cfl_sweep(base, [1.0, 2.0, 4.0, 20.0])
    assert all(row[2] == "stable" for row in rows)
    assert _slope(rows[:3]) == pytest.approx(order, abs=0.3)
