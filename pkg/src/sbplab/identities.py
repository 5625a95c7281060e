"""Self-checks of the kernels, energy and rescaling layers against
independent references (closed forms and 1-D quadrature)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import energy as en
from .energy import Params
from .grid import Grid, grad_norm_sq, lp_norm, lp_power
from .kernels import KernelSpec, coulomb_truncated_ft, kappa, truncated_ft
from .rescale import (Profile, h_beta, h_beta_prime_at_1, lp_exponent,
                      nonlocal_rescaling_check, nonlocal_rescaling_equality, rescale)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    reference: float
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tol)


def _rel(v, ref) -> float:
    return abs(v - ref) / max(abs(ref), 1e-300)


KAPPA_A = (0.1, 0.5, 1.0, 2.0, 10.0)


def kappa_lattice():
    """``(a, r)`` pairs with ``r/a`` spanning [1e-3, 30]."""
    for a in KAPPA_A:
        yield a, a * np.logspace(-3, np.log10(30.0), 200)


def kernel_checks() -> list[Check]:
    out = []
    worst = 0.0
    bound_violation = -np.inf
    for a, r in kappa_lattice():
        k = kappa(a, r)
        worst = max(worst, float(np.max(np.abs(k - (1.0 / r - np.exp(-r / a) / r)) * r)))
        cap = np.minimum(1.0 / r, 1.0 / a)
        bound_violation = max(bound_violation, float(np.max(k - cap)), float(np.max(-k)))
    out.append(Check("kappa = 1/r - exp(-r/a)/r", worst, 0.0, worst, 1e-12))
    out.append(Check("0 < kappa < min(1/r, 1/a)", bound_violation, 0.0,
                     max(bound_violation, 0.0), 0.0))
    T = 10.0
    ks = np.concatenate([[0.0], np.logspace(-3, 1.5, 120)])
    numeric = truncated_ft(KernelSpec("coulomb", T=T), ks)
    closed = coulomb_truncated_ft(T, ks)
    # relative to the sup of the transform, its k = 0 value
    err = float(np.max(np.abs(numeric - closed))) / (2.0 * np.pi * T ** 2)
    out.append(Check("coulomb truncated transform closed form", err, 0.0, err, 1e-12))
    return out


def gaussian_oracles(sigma: float = 1.0, a: float = 1.0) -> dict:
    """Reference values for the unit-mass Gaussian of width ``sigma``.

    The density ``u^2`` is a normal law with variance ``sigma^2/2`` per axis,
    so the pair distance follows a Maxwell law with scale ``sigma``; pair
    integrals reduce to 1-D quadrature over that law.
    """
    maxwell = lambda r: np.sqrt(2.0 / np.pi) * r * r * np.exp(-0.5 * (r / sigma) ** 2) / sigma ** 3
    pair = lambda f: quad(lambda r: maxwell(r) * f(r), 0.0, np.inf, epsabs=1e-15, epsrel=1e-13)[0]
    phi0 = quad(lambda r: 4.0 * np.pi * r * (np.pi * sigma ** 2) ** -1.5 * np.exp(-(r / sigma) ** 2),
                0.0, np.inf, epsabs=1e-15)[0]
    return {
        "mass": 1.0,
        "grad_sq": 1.5 / sigma ** 2,
        "D0": pair(lambda r: 1.0 / r),
        "Da": pair(lambda r: -np.expm1(-r / a) / r),
        "Ea": pair(lambda r: np.exp(-r / a)),
        "phi0_at_0": phi0,
    }


def energy_checks(grid: Grid, a: float = 1.0, p: float = 2.5, seed: int = 0) -> list[Check]:
    sigma = grid.L / 8.0
    pr = Profile.unit_gaussian(sigma)
    u = pr.sample(grid)
    ref = gaussian_oracles(sigma, a)
    phi = en.solve_phi(grid, u, 0.0).values
    origin = (grid.n // 2,) * 3
    vals = {
        "mass": lp_norm(u, 2, grid), "grad_sq": grad_norm_sq(u, grid),
        "D0": en.coupling(grid, u, 0.0), "Da": en.coupling(grid, u, a),
        "Ea": en.exp_coupling(grid, u, a), "phi0_at_0": phi[origin],
    }
    out = [Check(f"gaussian {k}", vals[k], ref[k], _rel(vals[k], ref[k]), 1e-5) for k in ref]
    out.append(Check("D0 closed form sqrt(2/pi)/sigma", vals["D0"], np.sqrt(2 / np.pi) / sigma,
                     _rel(vals["D0"], np.sqrt(2 / np.pi) / sigma), 1e-5))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for trip in ((a, 1.0, p), (0.0, 0.7, 2.2), (0.5 * a, 1.3, 3.2)):
        params = Params(*trip)
        fn = en.Functional(grid, params)
        v = u * params.rho
        g = fn.gradient(v)
        for _ in range(5):
            d = rng.normal(size=grid.shape) * np.exp(-0.25 * (grid.r / sigma) ** 2)
            h = 1e-4 * lp_norm(v, 2, grid) / lp_norm(d, 2, grid)
            fd = (fn.energy(v + h * d).total - fn.energy(v - h * d).total) / (2 * h)
            exact = grid.cell_volume * float(np.sum(g * d))
            worst = max(worst, _rel(fd, exact))
    out.append(Check("gradient vs centered differences", worst, 0.0, worst, 1e-5))
    return out


def rescale_lattice(grid: Grid, sigma: float):
    """``(beta, theta)`` pairs whose dilated width stays in [2.5 dx, L/6]:
    resolved by the grid and with negligible mass near the box faces."""
    for beta in (-1.0, -0.4, 0.0, 0.5, 1.0):
        for theta in (0.8, 1.0, 1.25, 1.6):
            if 2.5 * grid.dx <= sigma * theta ** beta <= grid.L / 6.0:
                yield beta, theta


def rescale_checks(grid: Grid, a: float = 1.0, p: float = 2.5) -> list[Check]:
    sigma = grid.L / 10.0
    pr = Profile.unit_gaussian(sigma)
    u = pr.sample(grid)
    m0, k0, l0 = lp_norm(u, 2, grid), grad_norm_sq(u, grid), lp_power(u, p, grid)
    d0 = en.coupling(grid, u, 0.0)
    mass_err = kin_err = lp_err = 0.0
    ineq = -np.inf
    eq_err = 0.0
    used = 0
    for beta, theta in rescale_lattice(grid, sigma):
        used += 1
        w = rescale(pr, beta, theta).sample(grid)
        mass_err = max(mass_err, _rel(lp_norm(w, 2, grid), theta * m0))
        kin_err = max(kin_err, _rel(grad_norm_sq(w, grid), theta ** (2 - 2 * beta) * k0))
        lp_err = max(lp_err, _rel(lp_power(w, p, grid), theta ** lp_exponent(beta, p) * l0))
        lhs, rhs = nonlocal_rescaling_check(grid, pr, a, beta, theta)
        ineq = max(ineq, (lhs - rhs) / (theta ** (4 - beta) * d0))
        direct, scaled = nonlocal_rescaling_equality(grid, pr, a, beta, theta)
        eq_err = max(eq_err, _rel(scaled, direct))
    if used == 0:
        mass_err = kin_err = lp_err = ineq = eq_err = np.inf
    params = Params(a, 1.0, p)
    h_err = 0.0
    for beta in (-0.4, 0.5, 1.0):
        step = 1e-3
        fd = (h_beta(grid, pr, params, beta, 1 + step) - h_beta(grid, pr, params, beta, 1 - step)) / (2 * step)
        h_err = max(h_err, _rel(fd, h_beta_prime_at_1(grid, u, params, beta)))
    return [
        Check("mass law", mass_err, 0.0, mass_err, 1e-8),
        Check("kinetic law", kin_err, 0.0, kin_err, 1e-6),
        Check("L^p law", lp_err, 0.0, lp_err, 1e-6),
        Check("nonlocal rescaling inequality", ineq, 0.0, max(ineq, 0.0), 1e-8),
        Check("nonlocal rescaling equality form", eq_err, 0.0, eq_err, 1e-8),
        Check("h' at 1 vs centered differences", h_err, 0.0, h_err, 1e-4),
    ]


def run_identities(grid: Grid, a: float = 1.0, p: float = 2.5, seed: int = 0) -> list[Check]:
    return [*kernel_checks(), *energy_checks(grid, a, p, seed), *rescale_checks(grid, a, p)]
