import numpy as np
import pytest

import oracles
from sbplab.energy import (Functional, Params, a_laplacian_phi, coupling, coupling_gap,
                           coupling_gap_bound, energy, exp_coupling, gradient,
                           grad_phi_difference, hls_ratio, measure_hls_constant, multiplier,
                           phi_pde_residual, solve_phi)
from sbplab.grid import Field, Grid, inner_l2


@pytest.mark.parametrize("kw", [dict(a=-1, rho=1, p=2.5), dict(a=1, rho=0, p=2.5),
                                dict(a=1, rho=1, p=2.0), dict(a=1, rho=1, p=10 / 3),
                                dict(a=1, rho=1, p=2.5, q=-1)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        Params(**kw)


@pytest.mark.parametrize("a", [0.0, 0.3, 1.0])
def test_coupling_of_gaussian(gauss_grid, unit_gaussian, a):
    ref = oracles.coulomb_pair(1.0) if a == 0 else oracles.bp_pair(a, 1.0)
    assert coupling(gauss_grid, unit_gaussian, a) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("a", [0.3, 1.0])
def test_exp_coupling_of_gaussian(gauss_grid, unit_gaussian, a):
    assert exp_coupling(gauss_grid, unit_gaussian, a) == pytest.approx(oracles.exp_pair(a, 1.0),
                                                                       rel=1e-10)


def test_exp_coupling_needs_positive_a(gauss_grid, unit_gaussian):
    with pytest.raises(ValueError):
        exp_coupling(gauss_grid, unit_gaussian, 0.0)


@pytest.mark.parametrize("amp, p, a, q", [(0.7, 2.5, 1.0, 1.0), (1.3, 3.2, 0.0, 1.0),
                                          (0.5, 2.2, 0.4, 3.0), (1.0, 2.9, 2.0, 0.0)])
def test_energy_of_gaussian(gauss_grid, amp, p, a, q):
    u = amp * np.exp(-0.5 * gauss_grid.r ** 2)
    e = energy(gauss_grid, u, Params(a, 1.0, p, q))
    assert e.total == pytest.approx(oracles.gaussian_energy(amp, 1.0, p, a, q), rel=1e-10)
    assert e.scaled(2.0).total == pytest.approx(2.0 * e.total)


def test_gradient_matches_directional_derivative(gauss_grid, unit_gaussian, rng):
    g = gauss_grid
    params = Params(0.7, 1.0, 2.5)
    u = unit_gaussian * (1.0 + 0.2 * g.x[:, None, None] / g.L)
    grad = gradient(g, u, params)
    for _ in range(3):
        h = rng.normal(size=g.shape) * np.exp(-0.5 * g.r ** 2)
        eps = 1e-4
        fd = (energy(g, u + eps * h, params).total - energy(g, u - eps * h, params).total) / (2 * eps)
        assert inner_l2(grad, Field(g, h)) == pytest.approx(fd, rel=1e-7)


def test_multiplier_identity(gauss_grid, unit_gaussian):
    params = Params(1.0, 1.0, 2.5)
    lam = multiplier(gauss_grid, unit_gaussian, params)
    # omega = -<J'(u), u>/||u||^2
    grad = gradient(gauss_grid, unit_gaussian, params)
    ref = -inner_l2(grad, Field(gauss_grid, unit_gaussian)) / inner_l2(unit_gaussian, unit_gaussian,
                                                                       gauss_grid)
    assert lam == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        multiplier(gauss_grid, np.zeros(gauss_grid.shape), params)


@pytest.mark.parametrize("lam", [0.0, 0.4])
def test_difference_matches_totals(gauss_grid, unit_gaussian, rng, lam):
    g = gauss_grid
    f = Functional(g, Params(0.5, 1.0, 2.8))
    v = unit_gaussian
    w = v + 0.05 * rng.normal(size=g.shape) * np.exp(-0.5 * g.r ** 2)
    pw, pv = f.phi(w), f.phi(v)
    mass = lambda x: inner_l2(x, x, g)  # noqa: E731
    direct = (f.energy(w).total - 0.5 * lam * mass(w)) - (f.energy(v).total - 0.5 * lam * mass(v))
    assert f.difference(w, v, pw, pv, lam) == pytest.approx(direct, rel=1e-10)


def test_difference_resolves_tiny_steps(gauss_grid, unit_gaussian):
    g = gauss_grid
    f = Functional(g, Params(1.0, 1.0, 2.5))
    v = unit_gaussian
    h = np.exp(-0.5 * g.r ** 2) * g.x[:, None, None]
    slope = inner_l2(f.gradient(v), h, g)
    eps = 1e-9
    w = v + eps * h
    assert f.difference(w, v, f.phi(w), f.phi(v)) == pytest.approx(eps * slope, rel=1e-5)


def test_solve_phi_returns_field(gauss_grid, unit_gaussian):
    phi = solve_phi(gauss_grid, unit_gaussian, 1.0)
    assert isinstance(phi, Field)
    assert np.all(phi.values > 0)


@pytest.mark.parametrize("a", [0.0, 1.0])
def test_phi_pde_residual_converges(a):
    res = []
    for n in (32, 64):
        g = Grid(n, 8.0)
        res.append(phi_pde_residual(g, np.pi ** -0.75 * np.exp(-0.5 * g.r ** 2), a))
    assert res[1] < 1e-3
    # sixth-order stencil: halving dx gains well over a factor 16
    assert res[1] < res[0] / 16


@pytest.mark.parametrize("c, lam", [(2.0, 1.0), (0.5, 1.4), (3.0, 0.7)])
def test_hls_ratio_scale_invariant(gauss_grid, c, lam):
    r = gauss_grid.r
    base = hls_ratio(gauss_grid, np.exp(-0.5 * r ** 2))
    assert hls_ratio(gauss_grid, c * np.exp(-0.5 * (lam * r) ** 2)) == pytest.approx(base, rel=1e-8)


def test_coupling_gap_bound(gauss_grid, unit_gaussian):
    K = measure_hls_constant(gauss_grid)
    for a in (0.5, 0.1, 0.02):
        gap = coupling_gap(gauss_grid, unit_gaussian, a)
        gp, hp = coupling_gap_bound(gauss_grid, unit_gaussian, a, K)
        assert 0 < gap <= gp + hp


def test_potential_gradient_norms(gauss_grid, unit_gaussian):
    g = gauss_grid
    assert grad_phi_difference(g, unit_gaussian, 0.0, unit_gaussian) == 0.0
    # equal-mass Gaussians of widths s1, s2: ||grad(phi_1 - phi_2)||^2 = 4 pi (D11 - 2 D12 + D22)
    # with D(s1, s2) = 2 / sqrt(pi (s1^2 + s2^2))
    s2 = 0.8
    other = (np.pi * s2 ** 2) ** -0.75 * np.exp(-0.5 * (g.r / s2) ** 2)
    pair = lambda x, y: 2.0 / np.sqrt(np.pi * (x * x + y * y))  # noqa: E731
    ref = 4 * np.pi * (pair(1, 1) - 2 * pair(1, s2) + pair(s2, s2))
    assert grad_phi_difference(g, unit_gaussian, 0.0, other) ** 2 == pytest.approx(ref, rel=1e-6)
    small = [a_laplacian_phi(g, unit_gaussian, a) for a in (0.2, 0.1, 0.05)]
    assert small[0] > small[1] > small[2] > 0


def test_potential_examples(gauss_grid, unit_gaussian):
    from scipy.special import erf

    g = gauss_grid
    phi = solve_phi(g, unit_gaussian, 0.0).values
    c = g.n // 2
    assert phi[c, c, c] == pytest.approx(2 / np.sqrt(np.pi), rel=1e-10)
    inner = (g.r <= 0.5 * g.L) & (g.r > 0)
    exact = erf(g.r[inner]) / g.r[inner]
    assert np.max(np.abs(phi[inner] - exact)) / np.max(exact) < 1e-6
    for a in (0.1, 1.0, 5.0):
        assert np.all(solve_phi(g, unit_gaussian, a).values >= 0)


def test_coupling_orderings(gauss_grid, unit_gaussian):
    g, u = gauss_grid, unit_gaussian
    avals = [0.05, 0.2, 0.5, 1.0, 2.0, 8.0]
    d = [coupling(g, u, a) for a in avals]
    d0 = coupling(g, u, 0.0)
    assert all(x <= d0 for x in d)
    assert all(b <= a for a, b in zip(d, d[1:]))
    assert all(x <= 1.0 / a for x, a in zip(d, avals))  # Young, rho = 1
    e = [exp_coupling(g, u, a) for a in avals]
    assert all(b > a for a, b in zip(e, e[1:])) and max(e) <= 1.0


def test_energy_examples(gauss_grid, unit_gaussian):
    g, u = gauss_grid, unit_gaussian
    assert energy(g, np.zeros(g.shape), Params(1.0, 1.0, 2.5)).total == 0.0
    e0 = energy(g, u, Params(0.0, 1.0, 2.5)).total
    assert e0 == pytest.approx(0.75 + 0.25 * np.sqrt(2 / np.pi) - 0.4 * 0.4658, abs=2e-5)
    for a in (0.3, 1.0, 4.0):
        assert energy(g, u, Params(a, 1.0, 2.5)).total <= e0


def test_gradient_examples(gauss_grid, unit_gaussian):
    from sbplab.analysis import radiality_deviation

    g = gauss_grid
    params = Params(1.0, 1.0, 2.5)
    assert np.all(gradient(g, np.zeros(g.shape), params).values == 0.0)
    grad = gradient(g, unit_gaussian, params)
    assert radiality_deviation(g, grad) < 1e-10


def test_multiplier_scaling_identity(gauss_grid, unit_gaussian):
    params = Params(1.0, 1.0, 2.5)
    base = multiplier(gauss_grid, unit_gaussian, params)
    assert multiplier(gauss_grid, 1.0 * unit_gaussian, params) == base
    near = [multiplier(gauss_grid, c * unit_gaussian, params) for c in (0.999, 1.001)]
    assert all(abs(x - base) < 1e-2 * abs(base) for x in near)
