"""Run drivers, studies and output files."""

import os

import numpy as np
import numpy.testing as npt
import pytest

from eldg_transport.config import RunConfig
from eldg_transport.errors import ConfigError, DistortionError
from eldg_transport.experiments import (
    RunResult,
    cfl_sweep,
    convergence_study,
    history_rows,
    mark_error_growth,
    max_stable_cfl,
    output_stem,
    render_snapshot,
    result_errors,
    run_errors,
    run_problem,
    time_history,
    write_convergence,
    write_snapshots,
)
from eldg_transport.fields import Invariants
from eldg_transport.mesh import Mesh1D, build_mesh, project_function


def _const_config(**changes):
    settings = dict(problem="advect1d-const", k=1, mesh=16, cfl=0.3)
    settings.update(changes)
    return RunConfig(**settings)


def test_output_stem():
    assert output_stem(_const_config(k=2, mode="sldg")) == "advect1d-const_k2_sldg"


def test_max_stable_cfl():
    rows = [(0.5, 1e-3, "stable"), (1.0, None, "unstable"), (0.8, 2e-3, "stable")]
    assert max_stable_cfl(rows) == 0.8
    assert max_stable_cfl([(0.1, None, "unstable")]) is None
    assert max_stable_cfl([(0.1, 1e-4, "stable"), (0.2, 1e-4, "stable")]) == 0.2


def test_history_rows():
    records = [
        Invariants(0.0, 2.0, 4.0, 1.0, energy=10.0, entropy=-2.0, enstrophy=16.0),
        Invariants(1e-15, 2.0, 3.0, 1.0, energy=9.0, entropy=-1.0, enstrophy=9.0),
    ]
    rows = history_rows("gc", [0.0, 0.5], records)
    assert rows[0] == (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    t, mass, l2, energy, entropy, enstrophy = rows[1]
    assert t == 0.5
    # zero initial mass gives an absolute deviation
    assert mass == 1e-15
    assert l2 == pytest.approx(-0.25)
    assert energy == pytest.approx(-0.1)
    assert entropy == pytest.approx(0.5)
    assert enstrophy == pytest.approx(-7.0 / 16.0)
    assert len(history_rows(None, [0.0], records[:1])[0]) == 3


def test_render_snapshot_1d():
    mesh = Mesh1D(0.0, 1.0, 4)
    field = project_function(lambda x: 2.0 + 0.0 * x, mesh, 1)
    lines = render_snapshot(field, "const").splitlines()
    assert lines[:3] == ["# const t=0", "nx 8", "domain 0 1"]
    npt.assert_allclose([float(v) for v in lines[3].split()], 2.0)
    assert len(lines) == 4


def test_render_snapshot_2d():
    mesh = build_mesh(((0.0, 3.0), (-1.0, 1.0)), (3, 2))
    field = project_function(lambda x, y: x + 10.0 * y, mesh, 2).replace(time=0.5)
    lines = render_snapshot(field, "ramp").splitlines()
    assert lines[:4] == ["# ramp t=0.5", "nx 9", "ny 6", "domain 0 3 -1 1"]
    grid = np.array([[float(v) for v in line.split()] for line in lines[4:]])
    assert grid.shape == (6, 9)
    # first row is the lowest y, varying along x
    npt.assert_allclose(grid[0, 1] - grid[0, 0], 1.0 / 3.0, atol=1e-12)
    npt.assert_allclose(grid[1, 0] - grid[0, 0], 10.0 / 3.0, atol=1e-12)


def test_run_problem_lands_on_snapshots():
    result = run_problem(_const_config(snapshots=(1.0, 2.0)))
    assert sorted(result.snapshots) == [1.0, 2.0]
    assert result.final.time == pytest.approx(np.pi)
    assert result.steps > 0
    assert result.final.total_mass == pytest.approx(
        result.initial.total_mass, abs=1e-13
    )


def test_runs_are_deterministic():
    first = run_problem(_const_config(mesh=10)).final
    second = run_problem(_const_config(mesh=10)).final
    npt.assert_array_equal(first.coeffs, second.coeffs)


def test_run_errors_against_exact_solution():
    errors = run_errors(_const_config())
    assert set(errors) == {"l1", "l2", "linf"}
    assert 0.0 < errors["l1"] < 5e-2
    assert errors["l1"] <= errors["linf"]


def test_result_errors_reuse_a_finished_run():
    config = _const_config(mesh=10)
    assert result_errors(run_problem(config)) == run_errors(config)
    gc = RunConfig("gc-kh", k=1, mesh=6, cfl=1.0, integrator="cf2")
    u0 = gc.spec.project_initial(gc.spec.mesh(6), 1)
    with pytest.raises(ConfigError):
        result_errors(RunResult(gc, u0, u0))


def test_convergence_study_second_order():
    rows = convergence_study(_const_config(), [10, 20])
    assert [row[0] for row in rows] == [10, 20]
    assert rows[0][2] is None
    assert rows[1][2] == pytest.approx(2.0, abs=0.4)
    assert rows[1][1] < rows[0][1]


def test_mark_error_growth():
    rows = [
        (0.5, 1e-4, "stable"),
        (2.0, 5e-4, "stable"),
        (4.0, 2e-3, "stable"),
        (8.0, None, "unstable"),
    ]
    marked = mark_error_growth(rows)
    assert [row[2] for row in marked] == ["stable", "stable", "unstable", "unstable"]
    assert max_stable_cfl(marked) == 2.0
    exact = [(0.1, 0.0, "stable"), (1.0, 1e-3, "stable")]
    assert mark_error_growth(exact) == exact


def test_cfl_sweep_beyond_the_eulerian_limit():
    # constant speed: the upstream cells are exact shifts at any CFL
    rows = cfl_sweep(_const_config(mesh=10), [0.3, 2.0])
    assert [row[2] for row in rows] == ["stable", "stable"]
    assert rows[1][1] < 10 * rows[0][1]
    assert max_stable_cfl(rows) == 2.0


def test_cfl_sweep_finds_the_variable_speed_limit():
    config = RunConfig("advect1d-sine", k=2, mesh=80, cfl=0.5)
    rows = cfl_sweep(config, [0.5, 6.0])
    assert [row[2] for row in rows] == ["stable", "unstable"]
    assert rows[1][1] is None or rows[1][1] > 10 * rows[0][1]
    assert max_stable_cfl(rows) == 0.5


def test_linear_sweep_rows_may_not_halve_steps():
    config = RunConfig("advect1d-sine", k=1, mesh=20, cfl=5.0, T=2.0)
    assert np.isfinite(run_errors(config)["linf"])
    with pytest.raises(DistortionError):
        run_errors(config, max_halvings=0)
    rows = cfl_sweep(config, [0.5, 5.0])
    assert rows[0][2] == "stable"
    assert rows[1] == (5.0, None, "unstable")


def test_rkdg_sweep_reports_instability():
    config = _const_config(mesh=10, mode="rkdg", T=20.0)
    rows = cfl_sweep(config, [0.1, 3.0])
    assert rows[0][2] == "stable"
    assert rows[1][2] == "unstable"
    assert max_stable_cfl(rows) == 0.1


def test_written_files(tmp_path):
    config = _const_config(mesh=8, T=1.0, out=str(tmp_path), snapshots=(0.5,))
    path, snapshots = time_history(config)
    assert os.path.basename(path) == "advect1d-const_k1_eldg-st1_history.csv"
    with open(path) as handle:
        lines = handle.read().splitlines()
    assert lines[0] == "time,mass_dev,l2_dev"
    assert lines[1] == "0,0,0"
    assert [os.path.basename(p) for p in snapshots] == [
        "advect1d-const_k1_eldg-st1_t0.5.dat"
    ]
    with open(snapshots[0]) as handle:
        assert handle.readline().startswith("# advect1d-const t=0.5")

    table = write_convergence(config, [(8, 0.1, None, 0.2, None, 0.3, None)])
    with open(table) as handle:
        assert handle.readline().strip() == (
            "mesh,l1,l1_order,l2,l2_order,linf,linf_order"
        )

    assert write_snapshots(config, {}) == []


def test_guiding_center_history_tracks_entropy(tmp_path):
    config = RunConfig(
        "gc-stationary",
        k=1,
        mesh=6,
        cfl=1.0,
        integrator="cf2",
        T=0.2,
        out=str(tmp_path),
    )
    path, _ = time_history(config)
    with open(path) as handle:
        lines = handle.read().splitlines()
    assert lines[0] == "time,mass_dev,l2_dev,energy_dev,entropy_dev,enstrophy_dev"
    assert len(lines) >= 3
    assert all(len(line.split(",")) == 6 for line in lines[1:])
