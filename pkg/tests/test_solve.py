import numpy as np
import pytest

from conftest import BASE_PARAMS, SOLVE_GRID
from sbplab.energy import Params, energy, multiplier
from sbplab.grid import Field, Grid, lp_norm, write_field
from sbplab.solve import (MinimizeResult, Scaling, SolverConfig, best_of, gaussian_lp_unit,
                          gaussian_width, initial_field, minimize, multistart, nls_beta,
                          nls_ground_state, reference_mass, riesz_iterate)


@pytest.mark.parametrize("kw", [dict(tol=0), dict(max_iter=0), dict(backtrack=1.0),
                                dict(armijo=0.0), dict(step0=-1), dict(init="sobol"),
                                dict(init="file"), dict(units="imperial"), dict(mix=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_gaussian_width_helpers():
    p = 2.5
    m = reference_mass(p, 1.5)
    assert gaussian_width(m, p) == pytest.approx(1.5, rel=1e-12)
    # NLS energy of Gaussians of mass m is stationary at that width
    c = gaussian_lp_unit(p)

    def nls(s):
        return 0.75 * m * m / s ** 2 - m ** p * c * s ** (3 - 1.5 * p) / p

    h = 1e-5
    assert (nls(1.5 + h) - nls(1.5 - h)) / (2 * h) == pytest.approx(0.0, abs=1e-6)
    assert nls_beta(2.5) == pytest.approx(-0.4)


def test_scaling_maps_energy_exactly():
    """J(theta-dilated v; params) = theta^(2-2beta) J(v; natural params), on matched grids."""
    params = Params(1.0, 0.5, 2.5)
    sc = Scaling.for_problem(params, SolverConfig())
    g = Grid(32, 8.0)
    v = np.exp(-0.5 * (g.r / 1.5) ** 2)
    v *= sc.m_ref / lp_norm(v, 2, g)
    nat = energy(g, v, sc.natural_params(params))
    phys = energy(sc.physical_grid(g), v * sc.amplitude, params)
    for a, b in [(phys.kinetic, nat.kinetic), (phys.nonlocal_, nat.nonlocal_),
                 (phys.potential, nat.potential)]:
        assert a == pytest.approx(b * sc.energy_factor, rel=1e-11)
    assert multiplier(sc.physical_grid(g), v * sc.amplitude, params) == pytest.approx(
        multiplier(g, v, sc.natural_params(params)) * sc.omega_factor, rel=1e-11)


def test_physical_units_is_identity():
    sc = Scaling.for_problem(BASE_PARAMS, SolverConfig(units="physical"))
    assert sc.theta == 1.0 and sc.natural_params(BASE_PARAMS) == BASE_PARAMS


def test_base_solve(base_result):
    r = base_result
    assert isinstance(r, MinimizeResult)
    assert r.converged and r.residual <= 1e-8
    assert r.J < 0 and r.omega > 0
    assert lp_norm(r.u, 2) == pytest.approx(BASE_PARAMS.rho, abs=1e-10)
    energies = [h[1] for h in r.history]
    # totals are sums over n^3 points; allow their rounding, not an ascent
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(energies, energies[1:]))
    assert energies[-1] < energies[0]
    assert r.summary()["converged"] is True


def test_omega_matches_multiplier(base_result):
    r = base_result
    assert multiplier(r.u.grid, r.u, BASE_PARAMS) == pytest.approx(r.omega, rel=1e-10)
    assert energy(r.u.grid, r.u, BASE_PARAMS).total == pytest.approx(r.J, rel=1e-10)


def test_restart_from_converged_state(base_result):
    again = minimize(SOLVE_GRID, BASE_PARAMS, init=base_result.u)
    assert again.converged and again.iters <= 2
    assert again.J == pytest.approx(base_result.J, rel=1e-12)


def test_riesz_fixed_point(base_result):
    r = riesz_iterate(SOLVE_GRID, BASE_PARAMS, omega0=base_result.omega, init=base_result.u)
    assert r.converged and r.residual <= 1e-8
    assert np.max(np.abs(r.u.values - base_result.u.values)) < 1e-8


@pytest.mark.parametrize("omega0", [0.0, -1.0])
def test_riesz_needs_positive_shift(omega0):
    with pytest.raises(ValueError):
        riesz_iterate(SOLVE_GRID, BASE_PARAMS, omega0=omega0)


def test_p_equal_three_rejected():
    with pytest.raises(ValueError, match="p = 3"):
        minimize(SOLVE_GRID, Params(1.0, 0.5, 3.0))


def test_physical_units_agree_with_natural(base_result):
    sc = base_result.scaling
    pgrid = sc.physical_grid(SOLVE_GRID)
    phys = minimize(pgrid, BASE_PARAMS, SolverConfig(units="physical", sigma=1.5 * sc.length))
    assert phys.converged
    assert phys.J == pytest.approx(base_result.J, rel=1e-8)
    assert phys.omega == pytest.approx(base_result.omega, rel=1e-6)


def test_init_from_file(tmp_path, base_result):
    path = write_field(tmp_path / "u.field", base_result.u_natural)
    cfg = SolverConfig(init="file", init_file=str(path))
    v = initial_field(SOLVE_GRID, 3.0, 2.5, cfg)
    assert lp_norm(v, 2, SOLVE_GRID) == pytest.approx(3.0, rel=1e-13)
    with pytest.raises(ValueError, match="n="):
        initial_field(Grid(16, 16.0), 3.0, 2.5, cfg)


def test_perturbed_init_is_seeded():
    cfg = SolverConfig(init="perturbed", seed=7)
    a = initial_field(SOLVE_GRID, 1.0, 2.5, cfg)
    b = initial_field(SOLVE_GRID, 1.0, 2.5, cfg)
    c = initial_field(SOLVE_GRID, 1.0, 2.5, SolverConfig(init="perturbed", seed=8))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_max_iter_reports_not_converged():
    r = minimize(SOLVE_GRID, BASE_PARAMS, SolverConfig(max_iter=3))
    assert not r.converged and r.iters == 3 and len(r.history) == 4


def test_init_shape_mismatch():
    with pytest.raises(ValueError):
        minimize(SOLVE_GRID, BASE_PARAMS, init=np.zeros((8, 8, 8)))


def test_multistart_and_best_of():
    results = multistart(SOLVE_GRID, BASE_PARAMS, SolverConfig(), [0, 1])
    assert all(r.converged for r in results)
    best = best_of(results)
    assert best.J == min(r.J for r in results)
    assert abs(results[0].J - results[1].J) < 1e-8 * abs(best.J)


def test_nls_ground_state_monotone():
    rhos = [0.3, 0.4, 0.5]
    res = [nls_ground_state(SOLVE_GRID, rho, 2.5) for rho in rhos]
    assert all(r.converged and r.omega > 0 and r.J < 0 for r in res)
    ratios = [r.J / rho ** 2 for r, rho in zip(res, rhos)]
    assert ratios[0] > ratios[1] > ratios[2]
    # NLS scaling: J_rho = rho^(2-2beta) J_1 exactly
    beta = nls_beta(2.5)
    unit = [r.J / rho ** (2 - 2 * beta) for r, rho in zip(res, rhos)]
    assert np.ptp(unit) < 1e-9 * abs(unit[0])


def test_centered_moves_center_of_mass(base_result):
    from sbplab.grid import center_of_mass

    c = base_result.centered()
    assert isinstance(c, Field)
    assert np.max(np.abs(center_of_mass(c))) < 1e-10


def test_critical_point_identity(base_result):
    from sbplab.energy import gradient
    from sbplab.grid import inner_l2

    r = base_result
    g = gradient(r.u.grid, r.u, BASE_PARAMS)
    assert abs(inner_l2(g, r.u) + r.omega * BASE_PARAMS.rho ** 2) < 1e-6
    # sup of the H1 norm along the trajectory bounds the final one
    final = r.u_natural
    from sbplab.grid import grad_norm_sq

    assert r.max_h1_sq >= grad_norm_sq(final) + lp_norm(final, 2) ** 2 - 1e-9


def test_resolution_cross_check(base_result):
    fine = minimize(Grid(64, 16.0), BASE_PARAMS)
    assert fine.converged and abs(fine.J - base_result.J) < 1e-4
