"""Periodic cubic grid, quadrature, spectral derivatives and Field files.

The box is ``[-L, L)^3`` sampled at ``x_i = -L + i*dx`` so the origin is the
grid point ``i = n/2``. Transforms are forward-unnormalized and the inverse is
divided by ``n^3`` (numpy convention); with that choice

    cell_volume * sum |f_i|^2 == cell_volume / n^3 * sum |F_k|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

FFT_WORKERS = 1


def set_fft_workers(n: int) -> None:
    global FFT_WORKERS
    FFT_WORKERS = max(1, int(n))


def rfftn(a):
    return sfft.rfftn(a, workers=FFT_WORKERS)


def irfftn(a, shape):
    return sfft.irfftn(a, s=shape, workers=FFT_WORKERS)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)^3`` with ``n`` cells per axis."""

    n: int
    L: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 8, got {self.n}")
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ValueError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** 3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def x(self) -> np.ndarray:
        """1-D node coordinates."""
        return -self.L + self.dx * np.arange(self.n)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Signed per-axis table ``k_j = pi j / L`` in FFT order."""
        return np.pi * np.fft.fftfreq(self.n, d=1.0 / self.n) / self.L

    @cached_property
    def r(self) -> np.ndarray:
        x = self.x
        return np.sqrt(x[:, None, None] ** 2 + x[None, :, None] ** 2 + x[None, None, :] ** 2)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 on the rfft half-spectrum."""
        k = self.wavenumbers
        kz = np.abs(k[: self.n // 2 + 1])
        return k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each rfft coefficient in the full spectrum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = w[-1] = 1.0
        return w

    def spectral_sum(self, a_hat, b_hat=None) -> float:
        """``cell_volume/n^3 * sum_k a_hat conj(b_hat)`` over the full spectrum."""
        if b_hat is None:
            prod = a_hat.real ** 2 + a_hat.imag ** 2
        else:
            prod = (a_hat * np.conj(b_hat)).real
        return float(np.sum(prod * self.half_weights)) * self.cell_volume / self.n ** 3

    def sample(self, fn) -> "Field":
        """Sample a radial function ``fn(r)`` on the grid."""
        return Field(self, fn(self.r))


@dataclass(frozen=True)
class Field:
    """Real scalar samples on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def make_grid(n: int, L: float) -> Grid:
    return Grid(n, L)


def values_of(f) -> np.ndarray:
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=np.float64)


def _same_grid(f, g):
    if isinstance(f, Field) and isinstance(g, Field) and f.grid != g.grid:
        raise ValueError("fields live on different grids")


def lp_norm(f, p: float, grid: Grid | None = None) -> float:
    """``(cell_volume * sum |f|^p)^(1/p)``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    grid = grid or f.grid
    v = np.abs(values_of(f))
    return float((grid.cell_volume * np.sum(v ** p)) ** (1.0 / p))


def lp_power(f, p: float, grid: Grid | None = None) -> float:
    """``||f||_p^p`` without the final root."""
    grid = grid or f.grid
    return float(grid.cell_volume * np.sum(np.abs(values_of(f)) ** p))


def inner_l2(f, g, grid: Grid | None = None) -> float:
    _same_grid(f, g)
    grid = grid or f.grid
    return float(grid.cell_volume * np.sum(values_of(f) * values_of(g)))


def grad_norm_sq(f, grid: Grid | None = None) -> float:
    """``||grad f||_2^2`` computed spectrally (exact for band-limited f)."""
    grid = grid or f.grid
    fh = rfftn(values_of(f))
    return grid.spectral_sum(fh * np.sqrt(grid.k2))


def laplacian(f, grid: Grid | None = None) -> np.ndarray:
    grid = grid or f.grid
    return irfftn(-grid.k2 * rfftn(values_of(f)), grid.shape)


def h1_norm(f, grid: Grid | None = None) -> float:
    grid = grid or f.grid
    return float(np.sqrt(grad_norm_sq(f, grid) + lp_norm(f, 2, grid) ** 2))


def shift(f, offset, grid: Grid | None = None) -> np.ndarray:
    """Translate by ``offset`` (length units, 3-vector) via a Fourier phase.

    Whole-cell offsets reduce to an exact ``np.roll``.
    """
    grid = grid or f.grid
    v = values_of(f)
    offset = np.asarray(offset, dtype=float)
    cells = offset / grid.dx
    if np.allclose(cells, np.round(cells), rtol=0, atol=1e-12):
        return np.roll(v, tuple(int(c) for c in np.round(cells)), axis=(0, 1, 2))
    k = grid.wavenumbers
    kz = k[: grid.n // 2 + 1]
    # Nyquist modes carry no phase so the result stays real
    ky = np.where(np.arange(grid.n) == grid.n // 2, 0.0, k)
    kz = np.where(np.arange(kz.size) == grid.n // 2, 0.0, kz)
    phase = np.exp(
        -1j * (ky[:, None, None] * offset[0] + ky[None, :, None] * offset[1]
               + kz[None, None, :] * offset[2])
    )
    return irfftn(rfftn(v) * phase, grid.shape)


def center_of_mass(f, grid: Grid | None = None) -> np.ndarray:
    grid = grid or f.grid
    d = values_of(f) ** 2
    m = d.sum()
    if m == 0:
        raise ValueError("zero field has no center of mass")
    x = grid.x
    return np.array([
        np.sum(d.sum(axis=(1, 2)) * x),
        np.sum(d.sum(axis=(0, 2)) * x),
        np.sum(d.sum(axis=(0, 1)) * x),
    ]) / m


def recenter(f, grid: Grid | None = None, iterations: int = 3) -> np.ndarray:
    """Move the center of mass of ``f^2`` to the origin."""
    grid = grid or f.grid
    v = values_of(f)
    for _ in range(iterations):
        c = center_of_mass(v, grid)
        if np.max(np.abs(c)) < 1e-13 * grid.L:
            break
        v = shift(v, -c, grid)
    return v


# --- Field files -----------------------------------------------------------

HEADER_KEYS = ("n", "L", "a", "rho", "p", "kind")


def write_field(path, f, meta: dict | None = None, grid: Grid | None = None) -> Path:
    """Write ``key=value`` header, blank line, then n^3 little-endian float64."""
    grid = grid or f.grid
    meta = dict(meta or {})
    lines = [f"n={grid.n}", f"L={grid.L!r}"]
    for key in ("a", "rho", "p"):
        lines.append(f"{key}={float(meta.get(key, float('nan')))!r}")
    lines.append(f"kind={meta.get('kind', 'u')}")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n\n").encode("ascii"))
        fh.write(np.ascontiguousarray(values_of(f), dtype="<f8").tobytes(order="C"))
    return path


def read_field(path) -> tuple[Field, dict]:
    raw = Path(path).read_bytes()
    sep = raw.find(b"\n\n")
    if sep < 0:
        raise ValueError(f"{path}: missing blank line after header")
    meta: dict = {}
    for line in raw[:sep].decode("ascii").splitlines():
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    missing = [k for k in HEADER_KEYS if k not in meta]
    if missing:
        raise ValueError(f"{path}: header lacks {missing}")
    grid = Grid(int(meta["n"]), float(meta["L"]))
    body = raw[sep + 2:]
    if len(body) != 8 * grid.n ** 3:
        raise ValueError(f"{path}: expected {8 * grid.n ** 3} data bytes, got {len(body)}")
    values = np.frombuffer(body, dtype="<f8").reshape(grid.shape).astype(np.float64)
    out = {k: (meta[k] if k == "kind" else float(meta[k])) for k in ("a", "rho", "p", "kind")}
    return Field(grid, values), out
