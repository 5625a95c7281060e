"""Numerical evidence layer: beta windows, trial thresholds, sweeps in rho and a,
radial symmetry and the small-mass limit of the multiplier."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import energy as en
from .energy import Params
from .grid import Grid, grad_norm_sq, h1_norm, lp_norm, lp_power, recenter, values_of
from .rescale import Profile, lp_exponent
from .solve import (MinimizeResult, Scaling, SolverConfig, minimize, nls_beta,
                    nls_ground_state)

REGIMES = ("small_rho", "large_rho")
P_RADIAL = 14.0 / 5.0


# --- beta windows ------------------------------------------------------------


@dataclass(frozen=True)
class BetaWindow:
    regime: str
    p: float
    lower: float
    upper: float

    @property
    def nonempty(self) -> bool:
        return self.lower < self.upper

    def __contains__(self, beta: float) -> bool:
        return self.lower < beta < self.upper


def _exponents(p: float):
    """``(c, d)`` pairs with exponent ``= c*beta + d`` for the L^p, nonlocal
    and kinetic terms of ``J(u_{beta,theta})``."""
    return (3.0 - 1.5 * p, p), (-1.0, 4.0), (-2.0, 2.0)


def _solve_linear(constraints) -> tuple[float, float]:
    """Intersect ``{beta : c*beta + d > 0}`` over the given pairs."""
    lo, hi = -math.inf, math.inf
    for c, d in constraints:
        if c > 0:
            lo = max(lo, -d / c)
        elif c < 0:
            hi = min(hi, -d / c)
        elif d <= 0:
            return 0.0, 0.0
    return lo, hi


def beta_window(p: float, regime: str) -> BetaWindow:
    """Open interval of ``beta`` whose dilations certify ``J < 0`` by one trial.

    ``small_rho`` (2 < p < 3): ``0 < e_p < min(e_D, e_K)`` so the L^p term wins
    as ``theta -> 0``. ``large_rho`` (3 < p < 10/3): ``e_p > max(e_D, e_K)`` so
    it wins as ``theta -> infinity``. Here ``e_*`` are the theta-exponents of
    the three terms of ``J(u_{beta,theta})``.
    """
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}, got {regime!r}")
    (cp, dp), (cd, dd), (ck, dk) = _exponents(p)
    if regime == "small_rho":
        if not 2 < p < 3:
            raise ValueError(f"small_rho needs 2 < p < 3, got {p}")
        cons = [(cp, dp), (cd - cp, dd - dp), (ck - cp, dk - dp)]
    else:
        if not 3 < p < 10.0 / 3.0:
            raise ValueError(f"large_rho needs 3 < p < 10/3, got {p}")
        cons = [(cp - cd, dp - dd), (cp - ck, dp - dk)]
    lo, hi = _solve_linear(cons)
    return BetaWindow(regime, float(p), lo, hi)


def beta_scan(p: float, regime: str, betas: np.ndarray) -> np.ndarray:
    """Mask of ``betas`` satisfying the raw exponent inequalities."""
    b = np.asarray(betas, dtype=float)
    e = lp_exponent(b, p)
    if regime == "small_rho":
        return (e > 0) & (e < 4.0 - b) & (e < 2.0 - 2.0 * b)
    return (e > 4.0 - b) & (e > 2.0 - 2.0 * b)


# --- trial thresholds --------------------------------------------------------


@dataclass(frozen=True)
class TrialTerms:
    kinetic: float  # ||grad u||^2
    coulomb: float  # D_0(u)
    lp: float  # ||u||_p^p


def trial_terms(grid: Grid, pr: Profile, p: float) -> TrialTerms:
    from .rescale import sample_checked

    u = sample_checked(grid, pr)
    mass = lp_norm(u, 2, grid)
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"trial profile must have unit L2 norm, got {mass}")
    return TrialTerms(grad_norm_sq(u, grid), en.coupling(grid, u, 0.0), lp_power(u, p, grid))


def trial_energy(terms: TrialTerms, p: float, beta: float, rho: float) -> float:
    """``J_0`` of the dilation of a unit-mass trial to mass ``rho``, by scaling laws."""
    return (0.5 * rho ** (2.0 - 2.0 * beta) * terms.kinetic
            + 0.25 * rho ** (4.0 - beta) * terms.coulomb
            - rho ** lp_exponent(beta, p) * terms.lp / p)


def trial_threshold(grid: Grid, pr: Profile, p: float, beta: float, regime: str) -> float:
    """Radius R of the region where one dilated trial certifies ``J_0 < 0``.

    With ``e`` the L^p exponent and ``m`` the smaller (small_rho) or larger
    (large_rho) of the kinetic and nonlocal exponents, ``alpha = |m - e|`` and
    R solves ``R^alpha (1/2 ||grad u||^2 + 1/4 D_0) = ||u||_p^p / p`` (small_rho)
    or ``R^alpha ||u||_p^p / p = 1/2 ||grad u||^2 + 1/4 D_0`` (large_rho).
    The certificate covers ``rho < min(R, 1)``, resp. ``rho > max(R, 1)``.
    """
    win = beta_window(p, regime)
    if beta not in win:
        raise ValueError(f"beta = {beta} is outside the {regime} window ({win.lower}, {win.upper})")
    t = trial_terms(grid, pr, p)
    e = lp_exponent(beta, p)
    quad = 0.5 * t.kinetic + 0.25 * t.coulomb
    gain = t.lp / p
    if regime == "small_rho":
        alpha = min(4.0 - beta, 2.0 - 2.0 * beta) - e
        return (gain / quad) ** (1.0 / alpha)
    alpha = e - max(4.0 - beta, 2.0 - 2.0 * beta)
    return (quad / gain) ** (1.0 / alpha)


def best_trial_threshold(grid: Grid, pr: Profile, p: float, regime: str,
                         candidates: int = 9) -> tuple[float, float]:
    """``(beta, R)`` over evenly spaced interior betas of the window, choosing
    the largest certified region (largest R for small_rho, smallest for large_rho)."""
    win = beta_window(p, regime)
    lo = win.lower if np.isfinite(win.lower) else win.upper - 4.0
    betas = np.linspace(lo, win.upper, candidates + 2)[1:-1]
    pairs = [(float(b), trial_threshold(grid, pr, p, float(b), regime)) for b in betas]
    pick = max if regime == "small_rho" else min
    return pick(pairs, key=lambda bR: bR[1])


def fitted_grid(pr: Profile, n: int = 64, margin: float = 1.15) -> Grid:
    """Grid just large enough to hold ``pr``."""
    return Grid(n, margin * pr.extent)


# --- rho sweeps --------------------------------------------------------------


def config_hash(*parts) -> str:
    return hashlib.sha256(repr(parts).encode()).hexdigest()[:16]


def radial_average(grid: Grid, v) -> np.ndarray:
    """Average over exact lattice shells ``i^2 + j^2 + k^2 = const`` about the origin."""
    v = values_of(v)
    o = np.arange(grid.n) - grid.n // 2
    s = (o[:, None, None] ** 2 + o[None, :, None] ** 2 + o[None, None, :] ** 2).ravel()
    counts = np.bincount(s)
    sums = np.bincount(s, weights=v.ravel())
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return means[s].reshape(grid.shape)


def radiality_deviation(grid: Grid, u) -> float:
    """``||u - <u>|| / ||u||`` after centering, ``<u>`` the shell average."""
    v = values_of(u)
    if not np.any(v):
        raise ValueError("radiality of the zero field is undefined")
    c = recenter(v, grid)
    return lp_norm(c - radial_average(grid, c), 2, grid) / lp_norm(c, 2, grid)


@dataclass
class SweepRecord:
    a: float
    rho: float
    p: float
    J: float
    omega: float
    residual: float
    h1_norm: float
    norms: dict
    radial_dev: float
    converged: bool
    provenance: str
    result: MinimizeResult | None = field(default=None, repr=False)

    @property
    def J_over_rho2(self) -> float:
        return self.J / self.rho ** 2


def record_of(result: MinimizeResult, provenance: str = "") -> SweepRecord:
    u = result.u
    p = result.params.p
    return SweepRecord(
        a=result.params.a, rho=result.params.rho, p=p, J=result.J, omega=result.omega,
        residual=result.residual, h1_norm=h1_norm(u),
        norms={"L12/5": lp_norm(u, 2.4), "L8/3": lp_norm(u, 8.0 / 3.0), "Lp": lp_norm(u, p)},
        radial_dev=radiality_deviation(result.u_natural.grid, result.u_natural),
        converged=result.converged, provenance=provenance, result=result,
    )


@dataclass
class SweepReport:
    records: list
    verdicts: dict
    complete: bool
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.complete and all(self.verdicts.values())


def _run_points(jobs, threads: int):
    """Run ``jobs`` (callables) serially, stopping at the first non-converged
    result, or concurrently with results kept in submission order."""
    if threads <= 1:
        out = []
        for job in jobs:
            r = job()
            out.append(r)
            if not r.converged:
                break
        return out
    with ThreadPoolExecutor(max_workers=threads) as pool:
        out = list(pool.map(lambda j: j(), jobs))
    for i, r in enumerate(out):
        if not r.converged:
            return out[: i + 1]
    return out


def rho_verdicts(records: list, margin: float = 1e-6) -> dict:
    """Sign, strict decrease of J/rho^2 and strict subadditivity on the list."""
    Js = [r.J for r in records]
    q = [r.J_over_rho2 for r in records]
    decreasing = all(q[i + 1] < q[i] - margin * abs(q[i]) for i in range(len(q) - 1))
    by_rho = {r.rho: r.J for r in records}
    rhos = sorted(by_rho)
    subadd = True
    for hi in rhos:
        for mu in rhos:
            if mu >= hi:
                continue
            rest = math.sqrt(hi * hi - mu * mu)
            match = [x for x in rhos if abs(x - rest) <= 1e-9 * hi]
            if match:
                bound = by_rho[mu] + by_rho[match[0]]
                subadd &= by_rho[hi] < bound - margin * abs(by_rho[hi])
    return {"negative": all(J < 0 for J in Js), "J_over_rho2_decreasing": decreasing,
            "strict_subadditivity": subadd}


def sweep_rho(grid: Grid, a: float, p: float, rhos, config: SolverConfig | None = None,
              margin: float = 1e-6, threads: int = 1) -> SweepReport:
    """Ground states along increasing ``rhos`` and the monotonicity verdicts."""
    config = config or SolverConfig()
    rhos = [float(r) for r in rhos]
    if not rhos or any(b <= a_ for a_, b in zip(rhos, rhos[1:])):
        raise ValueError("rhos must be a non-empty strictly increasing list")
    prov = config_hash(grid, a, p, config)
    jobs = [lambda r=r: minimize(grid, Params(a, r, p), config) for r in rhos]
    results = _run_points(jobs, threads)
    records = [record_of(r, prov) for r in results]
    complete = len(records) == len(rhos) and all(r.converged for r in records)
    msg = "" if complete else f"run at rho={records[-1].rho} did not converge; sweep aborted"
    verdicts = rho_verdicts(records, margin) if complete else {}
    return SweepReport(records, verdicts, complete, msg)


# --- a -> 0 ------------------------------------------------------------------


@dataclass
class AZeroRow:
    a: float
    J: float
    omega: float
    gap_J: float
    du_H1: float
    dphi_D12: float
    a_lap_phi_L2: float
    domega: float
    f_a: float
    f_a_bound: float
    g_part: float
    h_part: float
    residual: float
    converged: bool


@dataclass
class AZeroReport:
    rho: float
    p: float
    reference: SweepRecord
    rows: list
    K: float
    verdicts: dict
    complete: bool
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.complete and all(self.verdicts.values())


DECREASING_FIELDS = ("gap_J", "du_H1", "dphi_D12", "a_lap_phi_L2", "domega")


def sweep_a(grid: Grid, rho: float, p: float, a_values, config: SolverConfig | None = None,
            threads: int = 1) -> AZeroReport:
    """Bopp-Podolsky ground states as ``a`` decreases, against the Coulomb one."""
    if not 2 < p < P_RADIAL:
        raise ValueError(f"sweep_a needs 2 < p < 14/5, got {p}")
    a_values = [float(a) for a in a_values]
    if not a_values or any(a <= 0 for a in a_values):
        raise ValueError("a values must be > 0; a = 0 is the reference solve")
    if any(b >= a for a, b in zip(a_values, a_values[1:])):
        raise ValueError("a values must be strictly decreasing")
    config = config or SolverConfig()
    prov = config_hash(grid, rho, p, config)
    ref = minimize(grid, Params(0.0, rho, p), config)
    ref_rec = record_of(ref, prov)
    if not ref.converged:
        return AZeroReport(rho, p, ref_rec, [], float("nan"), {}, False,
                           "reference (a = 0) run did not converge")
    jobs = [lambda a=a: minimize(grid, Params(a, rho, p), config) for a in a_values]
    results = _run_points(jobs, threads)

    pg = ref.u.grid
    u0 = recenter(ref.u)
    K = en.measure_hls_constant(pg, extra=[ref.u, *[r.u for r in results]])
    rows = []
    for r in results:
        a = r.params.a
        ua = recenter(r.u)
        g_part, h_part = en.coupling_gap_bound(pg, ua, a, K)
        rows.append(AZeroRow(
            a=a, J=r.J, omega=r.omega, gap_J=ref.J - r.J,
            du_H1=h1_norm(ua - u0, pg),
            dphi_D12=en.grad_phi_difference(pg, ua, a, u0),
            a_lap_phi_L2=en.a_laplacian_phi(pg, ua, a),
            domega=abs(r.omega - ref.omega),
            f_a=en.coupling_gap(pg, ua, a), f_a_bound=g_part + h_part,
            g_part=g_part, h_part=h_part, residual=r.residual, converged=r.converged,
        ))
    complete = len(rows) == len(a_values) and all(x.converged for x in rows)
    verdicts = {}
    if complete:
        for name in DECREASING_FIELDS:
            vals = [getattr(x, name) for x in rows]
            verdicts[f"{name}_decreasing"] = all(b < a for a, b in zip(vals, vals[1:]))
        verdicts["gap_J_nonnegative"] = all(x.gap_J >= 0 for x in rows)
        verdicts["f_a_within_bound"] = all(x.f_a <= x.f_a_bound for x in rows)
    msg = "" if complete else f"run at a={rows[-1].a} did not converge; sweep aborted"
    return AZeroReport(rho, p, ref_rec, rows, K, verdicts, complete, msg)


# --- multiplier limit --------------------------------------------------------


def alpha_exponent(p: float) -> float:
    """``(28 - 10p)/(10 - 3p)``; positive exactly for p < 14/5."""
    return (28.0 - 10.0 * p) / (10.0 - 3.0 * p)


@dataclass
class MultiplierRow:
    rho: float
    omega: float
    omega_rescaled: float  # rho^(2 beta) * omega, the multiplier at unit mass
    err_rescaled: float  # |omega_rescaled - Omega|
    err: float  # |omega - Omega rho^(-2 beta)|
    residual: float
    converged: bool


@dataclass
class MultiplierReport:
    p: float
    a: float
    alpha: float
    beta: float
    Omega: float
    rows: list
    verdicts: dict
    complete: bool

    @property
    def passed(self) -> bool:
        return self.complete and all(self.verdicts.values())


def multiplier_limit(grid: Grid, p: float, rhos, config: SolverConfig | None = None,
                     a: float = 0.0, threads: int = 1) -> MultiplierReport:
    """Multipliers along decreasing ``rhos`` against the NLS limit ``Omega``.

    Under ``u(x) = rho^(1-3beta/2) v(rho^-beta x)`` with ``||v|| = 1`` the
    multiplier becomes ``rho^(2beta) omega``, which tends to the multiplier
    ``Omega`` of the unit-mass NLS ground state. ``Omega`` is computed at the
    solver's reference mass and carried to unit mass by the same scaling.
    """
    if not 2 < p < P_RADIAL:
        raise ValueError(f"multiplier_limit needs 2 < p < 14/5, got {p}")
    rhos = [float(r) for r in rhos]
    if not rhos or any(b >= a_ for a_, b in zip(rhos, rhos[1:])):
        raise ValueError("rhos must be a non-empty strictly decreasing list")
    config = config or SolverConfig()
    beta = nls_beta(p)
    probe = Scaling.for_problem(Params(0.0, 1.0, p), config)
    nls = nls_ground_state(grid, probe.m_ref, p, config)
    Omega = nls.omega * probe.m_ref ** (2.0 * beta)
    jobs = [lambda r=r: minimize(grid, Params(a, r, p), config) for r in rhos]
    results = _run_points(jobs, threads)
    rows = []
    for r in results:
        rho = r.params.rho
        w_resc = r.omega * rho ** (2.0 * beta)
        rows.append(MultiplierRow(rho, r.omega, w_resc, abs(w_resc - Omega),
                                  abs(r.omega - Omega * rho ** (-2.0 * beta)),
                                  r.residual, r.converged))
    complete = nls.converged and len(rows) == len(rhos) and all(x.converged for x in rows)
    verdicts = {}
    if complete:
        e1 = [x.err for x in rows]
        e2 = [x.err_rescaled for x in rows]
        verdicts = {
            "err_decreasing": all(b < a_ for a_, b in zip(e1, e1[1:])),
            "err_rescaled_decreasing": all(b < a_ for a_, b in zip(e2, e2[1:])),
            "omega_positive": all(x.omega > 0 for x in rows),
        }
    return MultiplierReport(p, a, alpha_exponent(p), beta, Omega, rows, verdicts, complete)
