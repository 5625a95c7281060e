"""Mass-scaling dilations of radial profiles and the fiber function h_beta.

The dilation ``u_{beta,theta}(x) = theta^(1 - 3beta/2) u(theta^-beta x)``
multiplies the L2 norm by ``theta``. Profiles are analytic objects, so a
dilated profile is sampled afresh rather than interpolated on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .energy import Functional, Params, coupling, exp_coupling
from .grid import Grid, grad_norm_sq, lp_power
from .kernels import convolver

MASS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Profile:
    """Radial function ``r -> u(r)``: a Gaussian or a tabulated spline.

    ``gaussian``: ``amplitude * exp(-r^2 / (2 sigma^2))``.
    ``tabulated``: cubic spline through ``(nodes, values)``, zero past the
    last node.
    """

    kind: str
    amplitude: float = 1.0
    sigma: float = 1.0
    nodes: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if not self.sigma > 0:
                raise ValueError(f"sigma must be > 0, got {self.sigma}")
            if not np.isfinite(self.amplitude):
                raise ValueError("amplitude must be finite")
        elif self.kind == "tabulated":
            r = np.asarray(self.nodes, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or r.size < 4:
                raise ValueError("tabulated profile needs matching 1-D nodes and values (>= 4)")
            if r[0] != 0 or np.any(np.diff(r) <= 0):
                raise ValueError("nodes must start at 0 and increase strictly")
            if not np.all(np.isfinite(v)):
                raise ValueError("profile values must be finite")
            object.__setattr__(self, "nodes", r)
            object.__setattr__(self, "values", v)
            object.__setattr__(self, "_spline", CubicSpline(r, v, bc_type=((1, 0.0), "not-a-knot")))
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def gaussian(cls, amplitude: float = 1.0, sigma: float = 1.0) -> "Profile":
        return cls("gaussian", amplitude=float(amplitude), sigma=float(sigma))

    @classmethod
    def unit_gaussian(cls, sigma: float = 1.0) -> "Profile":
        """Gaussian with L2 norm 1."""
        return cls.gaussian((np.pi * sigma * sigma) ** -0.75, sigma)

    @classmethod
    def tabulated(cls, nodes, values) -> "Profile":
        return cls("tabulated", nodes=nodes, values=values)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-0.5 * (r / self.sigma) ** 2)
        out = self._spline(np.minimum(r, self.nodes[-1]))
        return np.where(r <= self.nodes[-1], out, 0.0)

    @property
    def extent(self) -> float:
        """Radius holding essentially all of the mass."""
        return 9.0 * self.sigma if self.kind == "gaussian" else float(self.nodes[-1])

    def mass(self) -> float:
        """``||u||_2^2`` over R^3."""
        if self.kind == "gaussian":
            return self.amplitude ** 2 * (np.pi * self.sigma ** 2) ** 1.5
        from scipy.integrate import quad

        f = lambda r: 4.0 * np.pi * r * r * float(self(r)) ** 2
        return quad(f, 0.0, self.nodes[-1], limit=400, points=self.nodes[1:-1][:100])[0]

    def mass_beyond(self, radius: float) -> float:
        """``||u||_2^2`` outside the ball of the given radius."""
        if self.kind == "gaussian":
            from scipy.special import erfc

            s = radius / self.sigma
            tail = np.sqrt(np.pi) * erfc(s) / 4.0 + 0.5 * s * np.exp(-s * s)
            return 4.0 * np.pi * self.amplitude ** 2 * self.sigma ** 3 * tail
        from scipy.integrate import quad

        if radius >= self.nodes[-1]:
            return 0.0
        f = lambda r: 4.0 * np.pi * r * r * float(self(r)) ** 2
        return quad(f, radius, self.nodes[-1], limit=400)[0]

    def sample(self, grid: Grid) -> np.ndarray:
        return self(grid.r)


def rescale(pr: Profile, beta: float, theta: float) -> Profile:
    """``theta^(1 - 3beta/2) u(theta^-beta x)``; the L2 norm scales by theta."""
    if not theta > 0:
        raise ValueError(f"theta must be > 0, got {theta}")
    amp = theta ** (1.0 - 1.5 * beta)
    stretch = theta ** beta
    if pr.kind == "gaussian":
        return Profile.gaussian(amp * pr.amplitude, stretch * pr.sigma)
    return Profile.tabulated(pr.nodes * stretch, pr.values * amp)


def lp_exponent(beta: float, p: float) -> float:
    """``||u_{beta,theta}||_p^p = theta^e ||u||_p^p`` with this ``e``."""
    return (1.0 - 1.5 * beta) * p + 3.0 * beta


def sample_checked(grid: Grid, pr: Profile, tol: float = MASS_TOL) -> np.ndarray:
    """Sample ``pr``; error when more than ``tol`` of its mass lies outside the box."""
    outside = pr.mass_beyond(grid.L)
    if outside > tol * pr.mass():
        raise ValueError(
            f"profile leaks {outside / pr.mass():.2e} of its mass outside the box "
            f"(L = {grid.L}); enlarge the box or reduce the dilation"
        )
    return pr.sample(grid)


def h_beta(grid: Grid, pr: Profile, params: Params, beta: float, theta: float) -> float:
    """``J(u_{beta,theta}) - theta^2 J(u)`` with both terms sampled on ``grid``."""
    if not theta > 0:
        raise ValueError(f"theta must be > 0, got {theta}")
    if theta == 1:
        return 0.0
    fn = Functional(grid, params)
    u = sample_checked(grid, pr)
    w = sample_checked(grid, rescale(pr, beta, theta))
    return fn.energy(w).total - theta ** 2 * fn.energy(u).total


def h_beta_prime_at_1(grid: Grid, u, params: Params, beta: float) -> float:
    """Closed form of ``d/dtheta h_beta(theta)`` at ``theta = 1``.

    ``-beta ||grad u||^2 + 1/4 [beta/a E_a + (2 - beta) D_a]
    - 1/p [(1 - 3beta/2) p + 3beta - 2] ||u||_p^p`` (times ``q`` on the bracket).
    """
    a, p = params.a, params.p
    if not a > 0:
        raise ValueError(f"h_beta_prime_at_1 needs a > 0, got {a}")
    gn = grad_norm_sq(u, grid)
    d = coupling(grid, u, a)
    e = exp_coupling(grid, u, a)
    lp = lp_power(u, p, grid)
    nonloc = 0.25 * params.q * (beta / a * e + (2.0 - beta) * d)
    return -beta * gn + nonloc - (lp_exponent(beta, p) - 2.0) * lp / p


def nonlocal_rescaling_check(grid: Grid, pr: Profile, a: float, beta: float,
                             theta: float) -> tuple[float, float]:
    """``(D_a(u_{beta,theta}), theta^(4-beta) D_0(u))``; the first never exceeds the second."""
    if not theta > 0 or not a > 0:
        raise ValueError("need theta > 0 and a > 0")
    w = sample_checked(grid, rescale(pr, beta, theta))
    u = sample_checked(grid, pr)
    return coupling(grid, w, a), theta ** (4.0 - beta) * coupling(grid, u, 0.0)


def nonlocal_rescaling_equality(grid: Grid, pr: Profile, a: float, beta: float,
                                theta: float) -> tuple[float, float]:
    """Two routes to ``D_a(u_{beta,theta})``.

    Returns the direct value and ``theta^4 int (u^2 * kappa_a(theta^beta .)) u^2``,
    the latter built from a dilated-kernel multiplier on the undilated sample.
    """
    if not theta > 0 or not a > 0:
        raise ValueError("need theta > 0 and a > 0")
    w = sample_checked(grid, rescale(pr, beta, theta))
    u = sample_checked(grid, pr)
    direct = coupling(grid, w, a)
    dens = u * u
    conv = convolver(grid, "bopp_podolsky", float(a), float(theta ** beta))
    scaled = theta ** 4 * grid.cell_volume * float(np.sum(conv(dens) * dens))
    return direct, scaled
