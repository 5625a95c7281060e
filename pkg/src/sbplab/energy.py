"""Potential solve, energy terms, L2 gradient and Lagrange multiplier.

The functional is

    J(u) = 1/2 ||grad u||^2 + q/4 D_a(u) - 1/p ||u||_p^p,
    D_a(u) = int (u^2 * kappa_a) u^2,

with ``q = 1`` for the physical system. Other values of ``q`` appear after
rescaling to a reference mass (see :mod:`sbplab.solve`), and ``q = 0`` is the
limiting NLS functional.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .grid import Field, Grid, grad_norm_sq, irfftn, lp_norm, lp_power, rfftn, values_of
from .kernels import convolver, padded_k2, potential_convolver

P_MIN, P_MAX = 2.0, 10.0 / 3.0


@dataclass(frozen=True)
class Params:
    """Problem data ``(a, rho, p)`` plus the nonlocal coupling ``q``."""

    a: float
    rho: float
    p: float
    q: float = 1.0

    def __post_init__(self):
        if not self.a >= 0:
            raise ValueError(f"a must be >= 0, got {self.a}")
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if not P_MIN < self.p < P_MAX:
            raise ValueError(f"p must lie in ]2, 10/3[, got {self.p}")
        if not self.q >= 0:
            raise ValueError(f"q must be >= 0, got {self.q}")


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    nonlocal_: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.nonlocal_ - self.potential

    def scaled(self, factor: float) -> "EnergyBreakdown":
        return EnergyBreakdown(self.kinetic * factor, self.nonlocal_ * factor,
                               self.potential * factor)


def _grid_of(grid, u) -> Grid:
    return grid if grid is not None else u.grid


def solve_phi(grid: Grid, u, a: float) -> Field:
    """``phi = u^2 * kappa_a`` on the box (``a = 0``: Coulomb potential)."""
    v = values_of(u)
    return Field(grid, potential_convolver(grid, a)(v * v))


def coupling(grid: Grid, u, a: float) -> float:
    """``D_a(u) = int phi_a^u u^2``."""
    v = values_of(u)
    d = v * v
    return float(grid.cell_volume * np.sum(potential_convolver(grid, a)(d) * d))


def exp_coupling(grid: Grid, u, a: float) -> float:
    """``E_a(u) = int int exp(-|x-y|/a) u(x)^2 u(y)^2``."""
    if not a > 0:
        raise ValueError(f"exp_coupling needs a > 0, got {a}")
    v = values_of(u)
    d = v * v
    return float(grid.cell_volume * np.sum(convolver(grid, "pure_exponential", float(a))(d) * d))


class Functional:
    """``J`` bound to a grid and parameters, with the potential solver cached.

    Works on raw arrays; the module-level functions wrap it for Fields.
    """

    def __init__(self, grid: Grid, params: Params):
        self.grid = grid
        self.params = params
        self.conv = potential_convolver(grid, params.a) if params.q > 0 else None

    def phi(self, v: np.ndarray) -> np.ndarray:
        if self.conv is None:
            return np.zeros_like(v)
        return self.conv(v * v)

    def parts(self, v: np.ndarray, phi: np.ndarray | None = None):
        """Return ``(breakdown, phi, u|u|^(p-2), ||grad u||^2, ||u||_p^p, D)``."""
        g, p = self.grid, self.params
        if phi is None:
            phi = self.phi(v)
        gn = grad_norm_sq(v, g)
        force, psum = _accel.power_term(v, p.p)
        lp = psum * g.cell_volume
        d = float(g.cell_volume * np.sum(phi * v * v))
        e = EnergyBreakdown(0.5 * gn, 0.25 * p.q * d, lp / p.p)
        return e, phi, force.reshape(v.shape), gn, lp, d

    def energy(self, v: np.ndarray) -> EnergyBreakdown:
        return self.parts(v)[0]

    def gradient(self, v: np.ndarray, phi: np.ndarray | None = None,
                 force: np.ndarray | None = None) -> np.ndarray:
        """``-Lap u + q phi u - u|u|^(p-2)``."""
        g = self.grid
        if phi is None:
            phi = self.phi(v)
        if force is None:
            force = _accel.power_term(v, self.params.p)[0].reshape(v.shape)
        lap = irfftn(-g.k2 * rfftn(v), g.shape)
        return -lap + self.params.q * phi * v - force

    def multiplier(self, v: np.ndarray) -> float:
        _, _, _, gn, lp, d = self.parts(v)
        rho2 = lp_power(v, 2, self.grid)
        if rho2 == 0:
            raise ValueError("multiplier of the zero field is undefined")
        return (lp - gn - self.params.q * d) / rho2

    def difference(self, w: np.ndarray, v: np.ndarray, phi_w: np.ndarray,
                   phi_v: np.ndarray, lam: float = 0.0) -> float:
        """``L(w) - L(v)`` for ``L = J - lam/2 ||u||_2^2``, without the
        cancellation of subtracting totals.

        Every term is rewritten as a product with ``w - v``; the L^p part uses
        ``|v|^p expm1(p log1p((w-v)/v))`` where ``w`` and ``v`` are close.
        With ``lam`` set to the multiplier estimate, rounding in the mass of
        ``w`` no longer leaks into the difference at first order.
        """
        g, p = self.grid, self.params
        delta = w - v
        total = w + v
        kin = 0.5 * g.spectral_sum(rfftn(delta) * g.k2, rfftn(total))
        nonloc = 0.25 * p.q * g.cell_volume * np.sum((phi_w + phi_v) * delta * total)
        av = np.abs(v)
        close = np.abs(delta) < 0.5 * av
        dp = np.empty_like(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(close, delta / np.where(close, v, 1.0), 0.0)
            dp[close] = av[close] ** p.p * np.expm1(p.p * np.log1p(ratio[close]))
        far = ~close
        dp[far] = np.abs(w[far]) ** p.p - av[far] ** p.p
        pot = g.cell_volume * np.sum(dp) / p.p
        mass = 0.5 * lam * g.cell_volume * np.sum(delta * total)
        return float(kin + nonloc - pot - mass)


def energy(grid: Grid, u, params: Params) -> EnergyBreakdown:
    return Functional(grid, params).energy(values_of(u))


def gradient(grid: Grid, u, params: Params) -> Field:
    return Field(grid, Functional(grid, params).gradient(values_of(u)))


def multiplier(grid: Grid, u, params: Params) -> float:
    """``omega = (||u||_p^p - ||grad u||^2 - q D_a(u)) / ||u||_2^2``."""
    return Functional(grid, params).multiplier(values_of(u))


# --- diagnostics -------------------------------------------------------------


def hls_ratio(grid: Grid, u) -> float:
    """``D_0(u) / ||u||_{12/5}^4``; invariant under u -> c u(lambda x)."""
    return coupling(grid, u, 0.0) / lp_norm(u, 12.0 / 5.0, grid) ** 4


def hls_family(grid: Grid) -> list[np.ndarray]:
    """Probe functions for measuring the constant K in D_0 <= K ||u||_{12/5}^4."""
    r = grid.r
    s = grid.L / 8.0
    fam = [
        np.exp(-0.5 * (r / s) ** 2),
        np.exp(-r / (0.5 * s)),
        1.0 / np.cosh(r / s),
        (1.0 + (r / s) ** 2) ** -1.25 * np.exp(-0.5 * (r / (2.5 * s)) ** 2),
    ]
    x = grid.x
    for sep in (1.0, 2.0, 3.0):
        off = np.sqrt((x[:, None, None] - sep * s) ** 2 + x[None, :, None] ** 2
                      + x[None, None, :] ** 2)
        fam.append(np.exp(-0.5 * (r / s) ** 2) + np.exp(-0.5 * (off / s) ** 2))
    return fam


def measure_hls_constant(grid: Grid, extra=()) -> float:
    """Brute-force sup of :func:`hls_ratio` over :func:`hls_family` plus ``extra``."""
    return max(hls_ratio(grid, f) for f in [*hls_family(grid), *map(values_of, extra)])


def coupling_gap(grid: Grid, u, a: float) -> float:
    """``f(a) = D_0(u) - D_a(u) = int int exp(-|x-y|/a)/|x-y| u^2 u^2``."""
    return coupling(grid, u, 0.0) - coupling(grid, u, a)


def coupling_gap_bound(grid: Grid, u, a: float, K: float) -> tuple[float, float]:
    """The two pieces ``4 pi a|log a| ||u||_{8/3}^4`` and ``K a ||u||_{12/5}^4``."""
    g_part = 4.0 * np.pi * a * abs(np.log(a)) * lp_norm(u, 8.0 / 3.0, grid) ** 4
    h_part = K * a * lp_norm(u, 12.0 / 5.0, grid) ** 4
    return g_part, h_part


def _density_spectrum(grid: Grid, u) -> np.ndarray:
    v = values_of(u)
    return potential_convolver(grid, 0.0).spectrum(v * v)


def _k_sum(grid: Grid, integrand: np.ndarray) -> float:
    """``int integrand d^3k / (2 pi)^3`` as a lattice sum on the 2x grid."""
    m = 2 * grid.n
    w = np.full(m // 2 + 1, 2.0)
    w[0] = w[-1] = 1.0
    return float(np.sum(integrand * w)) / (2.0 * grid.L * 2.0) ** 3


def grad_phi_difference(grid: Grid, u_a, a: float, u_0) -> float:
    """``||grad(phi_a^{u_a} - phi_0^{u_0})||_2`` over all of R^3."""
    k2 = padded_k2(grid)
    na, n0 = _density_spectrum(grid, u_a), _density_spectrum(grid, u_0)
    diff = na / (1.0 + a * a * k2) - n0
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(k2 > 0, 16.0 * np.pi ** 2 * np.abs(diff) ** 2 / k2, 0.0)
    return float(np.sqrt(_k_sum(grid, integrand)))


def a_laplacian_phi(grid: Grid, u, a: float) -> float:
    """``a ||Lap phi_a^u||_2`` over all of R^3."""
    k2 = padded_k2(grid)
    n = _density_spectrum(grid, u)
    integrand = 16.0 * np.pi ** 2 * np.abs(n) ** 2 / (1.0 + a * a * k2) ** 2
    return float(a * np.sqrt(_k_sum(grid, integrand)))


_FD6 = np.array([1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90])


def _fd_laplacian(f: np.ndarray, dx: float) -> np.ndarray:
    out = np.zeros_like(f)
    for axis in range(3):
        for c, off in zip(_FD6, range(-3, 4)):
            out += c * np.roll(f, off, axis=axis)
    return out / dx ** 2


def phi_pde_residual(grid: Grid, u, a: float) -> float:
    """Relative residual of ``-Lap phi + a^2 Lap^2 phi = 4 pi u^2`` on |x| <= L/2.

    Uses a local sixth-order stencil: phi is not periodic on the box, so a
    spectral derivative would pick up the wrap-around kink.
    """
    v = values_of(u)
    phi = potential_convolver(grid, a)(v * v)
    lap = _fd_laplacian(phi, grid.dx)
    lhs = -lap + a * a * _fd_laplacian(lap, grid.dx)
    rhs = 4.0 * np.pi * v * v
    inner = grid.r <= 0.5 * grid.L
    return float(np.max(np.abs(lhs - rhs)[inner]) / np.max(np.abs(rhs)))
