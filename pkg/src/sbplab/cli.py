"""Batch front end: ``key = value`` config files, dispatch, CSV and manifest output.

Config format::

    # comment
    [run]
    command = sweep-rho
    output_dir = out
    [grid]
    n = 48
    L = 16
    [params]
    a = 1
    p = 2.5
    rhos = 0.3, 0.4, 0.5
    [solver]
    tol = 1e-8

Exit status: 0 when every run converged and every verdict holds, 1 when a
verdict fails or a run does not converge, 2 for configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import platform
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from . import _accel
from .analysis import (beta_scan, beta_window, best_trial_threshold, fitted_grid,
                       multiplier_limit, record_of)
from .analysis import sweep_a, sweep_rho, trial_threshold
from .energy import Params
from .grid import Grid, write_field
from .identities import run_identities
from .rescale import Profile
from .solve import INITS, UNITS, SolverConfig, minimize, riesz_iterate

log = logging.getLogger("sbplab")

COMMANDS = ("solve", "sweep-rho", "sweep-a", "check-identities", "beta-window",
            "multiplier-limit")
P_RANGE = "p ∈ ]2,10/3[∖{3}"


class ConfigError(ValueError):
    pass


# --- value parsers -----------------------------------------------------------


def _float(s):
    v = float(s)
    if not np.isfinite(v):
        raise ValueError("not finite")
    return v


def _int(s):
    return int(s, 10)


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _floats(s):
    return tuple(_float(x) for x in s.split(",") if x.strip())


def _choice(options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


def _str(s):
    return s


def _check(pred, msg):
    def check(v):
        return None if pred(v) else msg
    return check


def _p_ok(p):
    return None if (2 < p < 10 / 3 and p != 3) else P_RANGE


_positive = _check(lambda v: v > 0, "must be > 0")
_unit = _check(lambda v: 0 < v < 1, "must lie in ]0,1[")

# section -> key -> (parser, range check)
SCHEMA = {
    "run": {
        "command": (_choice(COMMANDS), None),
        "output_dir": (_str, None),
        "seed": (_int, _check(lambda v: v >= 0, "must be >= 0")),
        "threads": (_int, _check(lambda v: v >= 1, "must be >= 1")),
        "margin": (_float, _check(lambda v: v >= 0, "must be >= 0")),
        "method": (_choice(("minimize", "riesz")), None),
        "omega0": (_float, _positive),
    },
    "grid": {
        "n": (_int, _check(lambda v: v >= 8 and v % 2 == 0, "must be an even integer >= 8")),
        "L": (_float, _positive),
    },
    "params": {
        "a": (_float, _check(lambda v: v >= 0, "must be >= 0")),
        "rho": (_float, _positive),
        "p": (_float, _p_ok),
        "rhos": (_floats, _check(lambda v: len(v) > 0 and min(v) > 0, "must be positive values")),
        "a_values": (_floats, _check(lambda v: len(v) > 0 and min(v) > 0, "must be positive values")),
        "regime": (_choice(("small_rho", "large_rho")), None),
        "beta": (_float, None),
    },
    "solver": {
        "tol": (_float, _positive),
        "max_iter": (_int, _check(lambda v: v >= 1, "must be >= 1")),
        "precondition": (_bool, None),
        "shift": (_float, _positive),
        "step0": (_float, _positive),
        "backtrack": (_float, _unit),
        "armijo": (_float, _unit),
        "init": (_choice(INITS), None),
        "sigma": (_float, _positive),
        "amplitude": (_float, _check(lambda v: v >= 0, "must be >= 0")),
        "init_file": (_str, None),
        "units": (_choice(UNITS), None),
        "natural_sigma": (_float, _positive),
        "mix": (_float, _check(lambda v: 0 < v <= 1, "must lie in ]0,1]")),
    },
}

REQUIRED = {
    "solve": ("grid.n", "grid.L", "params.a", "params.rho", "params.p"),
    "sweep-rho": ("grid.n", "grid.L", "params.a", "params.p", "params.rhos"),
    "sweep-a": ("grid.n", "grid.L", "params.rho", "params.p", "params.a_values"),
    "check-identities": ("grid.n", "grid.L"),
    "beta-window": ("params.p", "params.regime"),
    "multiplier-limit": ("grid.n", "grid.L", "params.p", "params.rhos"),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    grid: Grid | None
    solver: SolverConfig
    output_dir: Path
    seed: int = 0
    threads: int = 1
    margin: float = 1e-6
    method: str = "minimize"
    omega0: float | None = None
    a: float | None = None
    rho: float | None = None
    p: float | None = None
    rhos: tuple = ()
    a_values: tuple = ()
    regime: str | None = None
    beta: float | None = None
    echo: tuple = field(default=(), compare=False)

    @property
    def params(self) -> Params:
        return Params(self.a if self.a is not None else 0.0, self.rho, self.p)


def _tokenize(text: str):
    """Yield ``(lineno, section, key, raw_value)``; header errors raise."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            yield lineno, section, None, None
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        yield lineno, section, key.strip(), value.strip()


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config; every error names its line."""
    values: dict = {}
    where: dict = {}
    seen_sections: dict = {}
    for lineno, section, key, raw in _tokenize(text):
        if key is None:
            seen_sections.setdefault(section, lineno)
            continue
        schema = SCHEMA[section]
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        name = f"{section}.{key}"
        if name in where:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} in [{section}] (first set on line {where[name]})"
            )
        parser, check = schema[key]
        try:
            v = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key} = {raw!r} is not valid: {exc}") from None
        if check is not None:
            msg = check(v)
            if msg:
                raise ConfigError(f"line {lineno}: {key} = {raw} out of range: {msg}")
        values[name] = v
        where[name] = lineno

    end = len(text.splitlines())
    if "run.command" not in values:
        raise ConfigError(f"line {seen_sections.get('run', end)}: missing required key 'command' in [run]")
    command = values["run.command"]
    for name in REQUIRED[command]:
        if name not in values:
            section, key = name.split(".")
            raise ConfigError(
                f"line {seen_sections.get(section, end)}: missing required key {key!r} in "
                f"[{section}] for command {command}"
            )
    if values.get("run.method") == "riesz" and "run.omega0" not in values:
        raise ConfigError(f"line {where['run.method']}: method = riesz needs omega0 in [run]")

    solver_kw = {k.split(".")[1]: v for k, v in values.items() if k.startswith("solver.")}
    solver_kw["seed"] = values.get("run.seed", 0)
    try:
        solver = SolverConfig(**solver_kw)
    except ValueError as exc:
        line = max((where[k] for k in values if k.startswith("solver.")), default=end)
        raise ConfigError(f"line {line}: {exc}") from None

    rhos = values.get("params.rhos", ())
    if rhos and command == "sweep-rho" and any(b <= a for a, b in zip(rhos, rhos[1:])):
        raise ConfigError(f"line {where['params.rhos']}: rhos must be strictly increasing for sweep-rho")
    if rhos and command == "multiplier-limit" and any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise ConfigError(f"line {where['params.rhos']}: rhos must be strictly decreasing for multiplier-limit")
    avals = values.get("params.a_values", ())
    if avals and any(b >= a for a, b in zip(avals, avals[1:])):
        raise ConfigError(f"line {where['params.a_values']}: a_values must be strictly decreasing")
    p = values.get("params.p")
    if p is not None and command in ("sweep-a", "multiplier-limit") and not p < 14 / 5:
        raise ConfigError(f"line {where['params.p']}: p = {p} out of range: {command} needs p < 14/5")

    grid = None
    if "grid.n" in values and "grid.L" in values:
        grid = Grid(values["grid.n"], values["grid.L"])
    echo = tuple(sorted((k, str(v)) for k, v in values.items()))
    return RunConfig(
        command=command, grid=grid, solver=solver,
        output_dir=Path(values.get("run.output_dir", "out")),
        seed=values.get("run.seed", 0), threads=values.get("run.threads", 1),
        margin=values.get("run.margin", 1e-6), method=values.get("run.method", "minimize"),
        omega0=values.get("run.omega0"), a=values.get("params.a"), rho=values.get("params.rho"),
        p=p, rhos=rhos, a_values=avals, regime=values.get("params.regime"),
        beta=values.get("params.beta"), echo=echo,
    )


# --- output ------------------------------------------------------------------


def fmt(v) -> str:
    """17 significant digits, ``true``/``false`` for booleans, blank for None."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def write_keyvalue(path: Path, items) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for k, v in items:
            fh.write(f"{k}={fmt(v)}\n")
    return path


SWEEP_COLUMNS = ("a", "rho", "p", "J", "J_over_rho2", "omega", "residual", "h1_norm",
                 "radial_dev", "converged")
AZERO_COLUMNS = ("gap_J", "du_H1", "dphi_D12", "a_lap_phi_L2", "f_a", "f_a_bound")


def _sweep_row(rec):
    return [rec.a, rec.rho, rec.p, rec.J, rec.J_over_rho2, rec.omega, rec.residual,
            rec.h1_norm, rec.radial_dev, rec.converged]


@dataclass
class Outcome:
    ok: bool
    files: list
    verdicts: dict
    message: str = ""


def _solve(cfg: RunConfig, out: Path) -> Outcome:
    params = cfg.params
    if cfg.method == "riesz":
        res = riesz_iterate(cfg.grid, params, cfg.solver, omega0=cfg.omega0)
    else:
        res = minimize(cfg.grid, params, cfg.solver)
    files = [
        write_field(out / "u.field", res.centered(),
                    {"a": params.a, "rho": params.rho, "p": params.p, "kind": "u"}),
        write_keyvalue(out / "summary.txt", res.summary().items()),
        write_csv(out / "history.csv", ("iter", "J", "residual"), res.history),
    ]
    rec = record_of(res)
    files.append(write_csv(out / "solve.csv", SWEEP_COLUMNS, [_sweep_row(rec)]))
    verdicts = {"converged": res.converged}
    return Outcome(res.converged, files, verdicts)


def _sweep_rho(cfg: RunConfig, out: Path) -> Outcome:
    rep = sweep_rho(cfg.grid, cfg.a, cfg.p, cfg.rhos, cfg.solver, cfg.margin, cfg.threads)
    files = [write_csv(out / "sweep_rho.csv", SWEEP_COLUMNS, [_sweep_row(r) for r in rep.records])]
    files.append(write_keyvalue(out / "verdicts.txt", rep.verdicts.items()))
    return Outcome(rep.passed, files, rep.verdicts, rep.message)


def _sweep_a(cfg: RunConfig, out: Path) -> Outcome:
    rep = sweep_a(cfg.grid, cfg.rho, cfg.p, cfg.a_values, cfg.solver, cfg.threads)
    rows = [_sweep_row(rep.reference) + [None] * len(AZERO_COLUMNS)]
    for row in rep.rows:
        rows.append([row.a, rep.rho, rep.p, row.J, row.J / rep.rho ** 2, row.omega, row.residual,
                     None, None, row.converged, row.gap_J, row.du_H1, row.dphi_D12,
                     row.a_lap_phi_L2, row.f_a, row.f_a_bound])
    files = [write_csv(out / "sweep_a.csv", SWEEP_COLUMNS + AZERO_COLUMNS, rows)]
    files.append(write_keyvalue(out / "verdicts.txt", [*rep.verdicts.items(), ("K", rep.K)]))
    return Outcome(rep.passed, files, rep.verdicts, rep.message)


def _multiplier(cfg: RunConfig, out: Path) -> Outcome:
    a = cfg.a if cfg.a is not None else 0.0
    rep = multiplier_limit(cfg.grid, cfg.p, cfg.rhos, cfg.solver, a=a, threads=cfg.threads)
    header = ("rho", "omega", "omega_rescaled", "Omega", "err", "err_rescaled", "residual",
              "converged")
    rows = [[r.rho, r.omega, r.omega_rescaled, rep.Omega, r.err, r.err_rescaled, r.residual,
             r.converged] for r in rep.rows]
    files = [write_csv(out / "multiplier_limit.csv", header, rows)]
    files.append(write_keyvalue(out / "verdicts.txt", [
        *rep.verdicts.items(), ("alpha", rep.alpha), ("beta", rep.beta), ("Omega", rep.Omega)]))
    return Outcome(rep.passed, files, rep.verdicts)


def _identities(cfg: RunConfig, out: Path) -> Outcome:
    a = cfg.a if cfg.a else 1.0
    p = cfg.p if cfg.p is not None else 2.5
    checks = run_identities(cfg.grid, a, p, cfg.seed)
    rows = [[c.name, c.value, c.reference, c.error, c.tol, c.passed] for c in checks]
    files = [write_csv(out / "identities.csv",
                       ("check", "value", "reference", "error", "tol", "passed"), rows)]
    verdicts = {c.name: c.passed for c in checks}
    return Outcome(all(verdicts.values()), files, verdicts)


def _beta_window(cfg: RunConfig, out: Path) -> Outcome:
    win = beta_window(cfg.p, cfg.regime)
    scan = np.linspace(-50.0, 50.0, 100001)
    mask = beta_scan(cfg.p, cfg.regime, scan)
    inside = (scan > win.lower) & (scan < win.upper)
    # membership at an endpoint itself is decided by rounding
    edge = np.zeros_like(mask)
    for end in (win.lower, win.upper):
        if np.isfinite(end):
            edge |= np.abs(scan - end) <= 1e-9 * max(1.0, abs(end))
    agree = bool(np.array_equal(mask[~edge], inside[~edge]))
    rows = [[win.regime, win.p, win.lower, win.upper, win.nonempty]]
    files = [write_csv(out / "beta_window.csv", ("regime", "p", "lower", "upper", "nonempty"), rows)]
    verdicts = {"scan_agrees": agree}
    if win.nonempty:
        pr = Profile.unit_gaussian()
        if cfg.beta is None:
            beta, R = best_trial_threshold(fitted_grid(pr), pr, cfg.p, cfg.regime)
        else:
            beta, R = cfg.beta, trial_threshold(fitted_grid(pr), pr, cfg.p, cfg.beta, cfg.regime)
        files.append(write_csv(out / "trial_threshold.csv", ("regime", "p", "beta", "R"),
                               [[cfg.regime, cfg.p, beta, R]]))
    return Outcome(agree, files, verdicts)


DISPATCH = {
    "solve": _solve, "sweep-rho": _sweep_rho, "sweep-a": _sweep_a,
    "multiplier-limit": _multiplier, "check-identities": _identities,
    "beta-window": _beta_window,
}


def _versions():
    from importlib.metadata import PackageNotFoundError, version

    try:
        own = version("artifact")
    except PackageNotFoundError:
        own = "unknown"
    return [("version.python", platform.python_version()), ("version.numpy", np.__version__),
            ("version.scipy", scipy.__version__), ("version.sbplab", own),
            ("backend", _accel.BACKEND)]


def _prepare_output(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write_probe"
    probe.write_text("")
    probe.unlink()


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; returns the process exit status."""
    out = cfg.output_dir
    try:
        _prepare_output(out)
    except OSError as exc:
        log.error("output directory %s is not writable: %s", out, exc)
        return 2
    start = time.perf_counter()
    status, outcome, error = 1, None, ""
    try:
        outcome = DISPATCH[cfg.command](cfg, out)
        status = 0 if outcome.ok else 1
    except Exception as exc:  # recorded in the failure manifest
        log.exception("command %s failed", cfg.command)
        error = f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - start
    items = [("command", cfg.command), ("status", "ok" if status == 0 else "failed"),
             ("exit_code", status)]
    items += [(f"config.{k}", v) for k, v in cfg.echo]
    items += [("threads", cfg.threads)] + _versions() + [("wall_time_s", wall)]
    if outcome is not None:
        items += [(f"verdict.{k}", v) for k, v in outcome.verdicts.items()]
        items += [("files", ",".join(f.name for f in outcome.files))]
        if outcome.message:
            items.append(("message", outcome.message))
    if error:
        items.append(("error", error))
    write_keyvalue(out / "manifest.txt", items)
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sbplab", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", required=True, help="path to the key = value config file")
    ap.add_argument("--output", help="output directory (overrides [run] output_dir)")
    ap.add_argument("--threads", type=int, help="worker threads for sweep points")
    ap.add_argument("--serial", action="store_true", help="run sweep points one at a time")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
    except (OSError, ConfigError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2
    if args.output:
        cfg = replace(cfg, output_dir=Path(args.output))
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be >= 1", file=sys.stderr)
            return 2
        cfg = replace(cfg, threads=args.threads)
    if args.serial:
        cfg = replace(cfg, threads=1)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
