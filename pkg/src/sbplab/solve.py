"""Minimization of J on the mass sphere ``||u||_2 = rho``.

Two solvers share one stopping rule (tangential L2 residual <= tol):

* :func:`minimize` -- Sobolev-preconditioned projected gradient descent with
  Armijo backtracking and renormalization as the retraction;
* :func:`riesz_iterate` -- the fixed-point map
  ``u <- (-Lap + w0)^-1 [u|u|^(p-2) - phi u + (w0 - w(u)) u]``, renormalized.

Natural units
-------------
For ``beta = -(2p-4)/(10-3p)`` the dilation ``u(x) = t^(1-3beta/2) v(t^-beta x)``
with ``t = rho / m`` maps ``S_m`` onto ``S_rho`` and

    J_{a,q}(u) = t^(2-2beta) J_{a t^-beta, q t^(2+beta)}(v),
    omega(u)   = t^(-2beta) omega(v).

Solving for ``v`` at a fixed reference mass ``m`` keeps the ground state at a
size the grid can hold for every ``rho``, even where the physical state is
far wider or narrower than any practical box. ``units="physical"`` sets
``m = rho`` (identity map).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import EnergyBreakdown, Functional, Params
from .grid import Field, Grid, irfftn, lp_norm, read_field, rfftn, recenter, values_of

log = logging.getLogger(__name__)

INITS = ("gaussian", "file", "perturbed")
UNITS = ("natural", "physical")


class SolverDivergence(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 20000
    precondition: bool = True
    shift: float = 1.0
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    init: str = "gaussian"
    sigma: float | None = None
    seed: int = 0
    amplitude: float = 0.3
    init_file: str | None = None
    units: str = "natural"
    natural_sigma: float = 1.5
    mix: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not 0 < self.backtrack < 1:
            raise ValueError(f"backtrack must lie in ]0,1[, got {self.backtrack}")
        if not 0 < self.armijo < 1:
            raise ValueError(f"armijo must lie in ]0,1[, got {self.armijo}")
        if not self.step0 > 0 or not self.shift > 0:
            raise ValueError("step0 and shift must be > 0")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}, got {self.init!r}")
        if self.init == "file" and not self.init_file:
            raise ValueError("init = file needs init_file")
        if self.units not in UNITS:
            raise ValueError(f"units must be one of {UNITS}, got {self.units!r}")
        if not 0 < self.mix <= 1:
            raise ValueError(f"mix must lie in ]0,1], got {self.mix}")


def nls_beta(p: float) -> float:
    """Dilation exponent balancing kinetic and L^p terms."""
    return -(2.0 * p - 4.0) / (10.0 - 3.0 * p)


def gaussian_lp_unit(p: float) -> float:
    """``||G||_p^p`` for the unit-mass Gaussian with sigma = 1."""
    return np.pi ** (-0.75 * p) * (2.0 * np.pi / p) ** 1.5


def gaussian_width(rho: float, p: float) -> float:
    """Width minimizing the NLS energy over Gaussians of mass rho."""
    c = gaussian_lp_unit(p)
    return (rho ** (2.0 - p) * p / ((p - 2.0) * c)) ** (2.0 / (10.0 - 3.0 * p))


def reference_mass(p: float, sigma: float) -> float:
    """Mass at which the NLS-optimal Gaussian has width ``sigma``."""
    c = gaussian_lp_unit(p)
    return (sigma ** ((10.0 - 3.0 * p) / 2.0) * (p - 2.0) * c / p) ** (1.0 / (2.0 - p))


@dataclass(frozen=True)
class Scaling:
    theta: float
    beta: float
    m_ref: float

    @classmethod
    def for_problem(cls, params: Params, config: SolverConfig) -> "Scaling":
        beta = nls_beta(params.p)
        if config.units == "physical":
            return cls(1.0, beta, params.rho)
        m = reference_mass(params.p, config.natural_sigma)
        return cls(params.rho / m, beta, m)

    @property
    def length(self) -> float:
        return self.theta ** self.beta

    @property
    def amplitude(self) -> float:
        return self.theta ** (1.0 - 1.5 * self.beta)

    @property
    def energy_factor(self) -> float:
        return self.theta ** (2.0 - 2.0 * self.beta)

    @property
    def omega_factor(self) -> float:
        return self.theta ** (-2.0 * self.beta)

    def natural_params(self, params: Params) -> Params:
        return Params(params.a / self.length, self.m_ref, params.p,
                      params.q * self.theta ** (2.0 + self.beta))

    def physical_grid(self, grid: Grid) -> Grid:
        return grid if self.theta == 1.0 else Grid(grid.n, grid.L * self.length)


@dataclass
class MinimizeResult:
    u: Field
    energy: EnergyBreakdown
    omega: float
    residual: float
    iters: int
    history: list = field(repr=False)
    converged: bool
    params: Params
    scaling: Scaling
    u_natural: Field = field(repr=False)
    method: str = "minimize"
    max_h1_sq: float = float("nan")  # sup of ||grad v||^2 + ||v||^2, natural units

    @property
    def J(self) -> float:
        return self.energy.total

    def centered(self) -> Field:
        """Copy of ``u`` with the density's center of mass moved to the origin."""
        return Field(self.u.grid, recenter(self.u))

    def summary(self) -> dict:
        e = self.energy
        return {
            "J": e.total, "kinetic": e.kinetic, "nonlocal": e.nonlocal_,
            "potential": e.potential, "omega": self.omega, "residual": self.residual,
            "iters": self.iters, "converged": self.converged,
        }


def _normalize(v: np.ndarray, mass: float, grid: Grid) -> np.ndarray:
    return v * (mass / lp_norm(v, 2, grid))


def initial_field(grid: Grid, mass: float, p: float, config: SolverConfig,
                  scaling: Scaling | None = None) -> np.ndarray:
    """Starting iterate on the natural grid, normalized to ``mass``."""
    if config.init == "file":
        f, _ = read_field(config.init_file)
        if f.grid.n != grid.n:
            raise ValueError(f"init file has n={f.grid.n}, grid has n={grid.n}")
        return _normalize(f.values, mass, grid)
    sigma = config.sigma or (config.natural_sigma if config.units == "natural"
                             else gaussian_width(mass, p))
    if config.init == "gaussian":
        return _normalize(np.exp(-0.5 * (grid.r / sigma) ** 2), mass, grid)
    rng = np.random.default_rng(config.seed)
    x = grid.x
    c = rng.uniform(-0.5, 0.5, size=3) * sigma
    X, Y, Z = x[:, None, None] - c[0], x[None, :, None] - c[1], x[None, None, :] - c[2]
    r2 = X ** 2 + Y ** 2 + Z ** 2
    base = np.exp(-0.5 * r2 / sigma ** 2)
    coef = rng.normal(size=9)
    harm = (coef[0] * X + coef[1] * Y + coef[2] * Z
            + (coef[3] * X * Y + coef[4] * Y * Z + coef[5] * X * Z
               + coef[6] * (X ** 2 - Y ** 2) + coef[7] * (2 * Z ** 2 - X ** 2 - Y ** 2)) / sigma
            + coef[8] * X * Y * Z / sigma ** 2) / sigma
    harm /= np.max(np.abs(harm * base)) / np.max(base)
    return _normalize(base * (1.0 + config.amplitude * harm), mass, grid)


def _preconditioner(grid: Grid, config: SolverConfig, shift: float | None = None):
    if not config.precondition:
        return lambda r: r
    denom = grid.k2 + (config.shift if shift is None else shift)
    return lambda r: irfftn(rfftn(r) / denom, grid.shape)


def _tangential(g: np.ndarray, v: np.ndarray, mass2: float, grid: Grid):
    lam = float(grid.cell_volume * np.sum(g * v) / mass2)
    r = g - lam * v
    return r, float(np.sqrt(grid.cell_volume * np.sum(r * r))), lam


def _h1_sq(gn: float, mass2: float) -> float:
    return gn + mass2


def _finish(grid, params, scaling, v, fn, history, iters, residual, converged, method,
            max_h1):
    e, _, _, gn, lp, d = fn.parts(v)
    nparams = fn.params
    omega_nat = (lp - gn - nparams.q * d) / nparams.rho ** 2
    pgrid = scaling.physical_grid(grid)
    u = Field(pgrid, v * scaling.amplitude)
    return MinimizeResult(
        u=u,
        energy=e.scaled(scaling.energy_factor),
        omega=omega_nat * scaling.omega_factor,
        residual=residual,
        iters=iters,
        history=history,
        converged=converged,
        params=params,
        scaling=scaling,
        u_natural=Field(grid, v),
        method=method,
        max_h1_sq=max_h1,
    )


def _start(grid, params, config, init):
    if params.p == 3.0:
        raise ValueError("p = 3 is excluded for solver targets: p must lie in ]2,10/3[ minus {3}")
    scaling = Scaling.for_problem(params, config)
    nparams = scaling.natural_params(params)
    if init is None:
        v = initial_field(grid, nparams.rho, params.p, config, scaling)
    else:
        # the dilation only rescales sample values, which normalizing undoes
        iv = values_of(init)
        if iv.shape != grid.shape:
            raise ValueError("init field does not match the grid")
        v = _normalize(iv, nparams.rho, grid)
    return scaling, nparams, v


def minimize(grid: Grid, params: Params, config: SolverConfig | None = None,
             init=None) -> MinimizeResult:
    """Projected, preconditioned gradient descent on the sphere.

    ``grid`` is in natural units unless ``config.units == "physical"``. An
    ``init`` Field on the physical grid (e.g. a previous result's ``u``) or an
    array on ``grid`` overrides ``config.init``.
    """
    config = config or SolverConfig()
    scaling, nparams, v = _start(grid, params, config, init)
    fn = Functional(grid, nparams)
    mass2 = nparams.rho ** 2
    precond = _preconditioner(grid, config)

    e, phi, force, gn, _, _ = fn.parts(v)
    J = e.total
    history = []
    s = config.step0
    residual = np.inf
    converged = False
    max_h1 = _h1_sq(gn, mass2)
    it = 0
    for it in range(config.max_iter + 1):
        g = fn.gradient(v, phi, force)
        r, residual, lam = _tangential(g, v, mass2, grid)
        history.append((it, J * scaling.energy_factor, residual))
        if not np.isfinite(residual) or not np.isfinite(J):
            raise SolverDivergence(f"non-finite state at iteration {it}", history)
        if residual <= config.tol:
            converged = True
            break
        if it == config.max_iter:
            break
        d = precond(r)
        slope = grid.cell_volume * float(np.sum(r * d))
        # grow after success; an uncapped step zig-zags across the sphere
        s = min(1.5 * s, 4.0 * config.step0)
        while True:
            w = _normalize(v - s * d, nparams.rho, grid)
            phi_w = fn.phi(w)
            dJ = fn.difference(w, v, phi_w, phi, lam)
            if not np.isfinite(dJ):
                raise SolverDivergence(f"non-finite energy at iteration {it}", history)
            if dJ <= -config.armijo * s * slope:
                break
            s *= config.backtrack
            if s < 1e-16 * config.step0:
                log.warning("line search stalled at residual %.3e", residual)
                w = None
                break
        if w is None:
            break
        v, phi = w, phi_w
        e, _, force, gn, _, _ = fn.parts(v, phi)
        J = e.total
        max_h1 = max(max_h1, _h1_sq(gn, mass2))
    return _finish(grid, params, scaling, v, fn, history, it, residual, converged,
                   "minimize", max_h1)


def riesz_iterate(grid: Grid, params: Params, config: SolverConfig | None = None,
                  omega0: float = 1.0, init=None) -> MinimizeResult:
    """Fixed-point iteration through the Riesz map of ``-Lap + omega0``.

    ``omega0`` is in physical units, like the returned ``omega``. The map
    contracts near the ground state when ``omega0`` is at least the limit
    multiplier; well below it the iteration stalls (``mix < 1`` damps it).
    """
    if not omega0 > 0:
        raise ValueError(f"omega0 must be > 0 (the Riesz map needs it), got {omega0}")
    config = config or SolverConfig()
    scaling, nparams, v = _start(grid, params, config, init)
    w0 = omega0 / scaling.omega_factor
    fn = Functional(grid, nparams)
    mass2 = nparams.rho ** 2
    denom = grid.k2 + w0
    history = []
    residual = np.inf
    converged = False
    max_h1 = 0.0
    it = 0
    for it in range(config.max_iter + 1):
        e, phi, force, gn, lp, d = fn.parts(v)
        J = e.total
        max_h1 = max(max_h1, _h1_sq(gn, mass2))
        g = fn.gradient(v, phi, force)
        _, residual, _ = _tangential(g, v, mass2, grid)
        history.append((it, J * scaling.energy_factor, residual))
        if not np.isfinite(residual) or not np.isfinite(J):
            raise SolverDivergence(f"non-finite state at iteration {it}", history)
        if residual <= config.tol:
            converged = True
            break
        if it == config.max_iter:
            break
        omega = (lp - gn - nparams.q * d) / mass2
        rhs = force - nparams.q * phi * v + (w0 - omega) * v
        new = _normalize(irfftn(rfftn(rhs) / denom, grid.shape), nparams.rho, grid)
        if config.mix < 1:
            new = _normalize((1 - config.mix) * v + config.mix * new, nparams.rho, grid)
        v = new
    return _finish(grid, params, scaling, v, fn, history, it, residual, converged,
                   "riesz", max_h1)


def nls_ground_state(grid: Grid, rho: float, p: float,
                     config: SolverConfig | None = None, init=None) -> MinimizeResult:
    """Ground state of ``1/2||grad u||^2 - 1/p||u||_p^p`` on the sphere."""
    return minimize(grid, Params(0.0, rho, p, q=0.0), config, init)


def multistart(grid: Grid, params: Params, config: SolverConfig, seeds) -> list[MinimizeResult]:
    """Runs from ``perturbed`` inits, one per seed."""
    return [minimize(grid, params, replace(config, init="perturbed", seed=int(s)))
            for s in seeds]


def best_of(results: list[MinimizeResult]) -> MinimizeResult:
    ok = [r for r in results if r.converged] or results
    return min(ok, key=lambda r: r.J)
