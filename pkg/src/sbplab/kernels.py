"""Radial interaction kernels and free-space convolution on the periodic grid.

Three kernels are supported, each optionally dilated, ``f(r) -> f(scale * r)``:

* ``coulomb``          ``1/r``
* ``bopp_podolsky``    ``kappa_a(r) = (1 - exp(-r/a)) / r``
* ``pure_exponential`` ``exp(-r/a)``

Convolution with a kernel on the box ``[-L, L)^3`` is done with the truncated
kernel method: the kernel is cut off at ``T >= 2*sqrt(3)*L`` (the box
diameter), so for targets and sources inside the box the cut changes nothing,
and the Fourier transform of the cut kernel is smooth (no 1/k^2 singularity).
That transform is tabulated on a 4x oversampled lattice, brought back to real
space, restricted to the offsets a 2x zero-padded grid can represent, and
transformed again. The 4x step keeps periodic images of the cut kernel from
overlapping the box; the result is an exact aperiodic convolution for
band-limited sources, applied with 2x padding.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from numpy.polynomial.legendre import leggauss

from . import _accel
from .grid import Grid, irfftn, rfftn

KINDS = ("coulomb", "bopp_podolsky", "pure_exponential")

_GL_ORDER = 24
_GL_X, _GL_W = leggauss(_GL_ORDER)


def kappa(a: float, r):
    """Bopp-Podolsky kernel ``(1 - exp(-r/a))/r``; ``a = 0`` gives ``1/r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("kappa is defined for r > 0 only")
    if a < 0:
        raise ValueError(f"a must be >= 0, got {a}")
    if a == 0:
        return 1.0 / r
    return -np.expm1(-r / a) / r


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    a: float = 0.0
    T: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if not self.T > 0:
            raise ValueError(f"truncation radius must be positive, got {self.T}")
        if self.kind != "coulomb" and not self.a > 0:
            raise ValueError(f"{self.kind} kernel needs a > 0, got {self.a}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def length(self) -> float:
        """Decay length of the exponential part in r, or 0 when there is none."""
        return 0.0 if self.kind == "coulomb" else self.a / self.scale

    def pointwise(self, r):
        r = np.asarray(r, dtype=float)
        s = self.scale * r
        if self.kind == "coulomb":
            return 1.0 / s
        if self.kind == "bopp_podolsky":
            return -np.expm1(-s / self.a) / s
        return np.exp(-s / self.a)

    def r_times_kernel(self, r):
        """``r * f(r)``, finite at r = 0."""
        r = np.asarray(r, dtype=float)
        if self.kind == "coulomb":
            return np.full_like(r, 1.0 / self.scale)
        if self.kind == "bopp_podolsky":
            return -np.expm1(-self.scale * r / self.a) / self.scale
        return r * np.exp(-self.scale * r / self.a)


def _panels(T: float, kmax: float, length: float) -> np.ndarray:
    h = min(T / 4.0, 2.0 * np.pi / kmax if kmax > 0 else T)
    breaks = [np.linspace(0.0, T, int(np.ceil(T / h)) + 1)]
    if 0 < length < T:
        breaks.append(length * 2.0 ** np.arange(-6, 3))
        breaks.append(4.0 * length * np.arange(1, 11))
    b = np.unique(np.clip(np.concatenate(breaks), 0.0, T))
    return b


def quadrature_nodes(spec: KernelSpec, kmax: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes on [0, T] resolving both the
    oscillation ``sin(kmax r)`` and the kernel's decay length."""
    b = _panels(spec.T, kmax, spec.length)
    lo, hi = b[:-1, None], b[1:, None]
    half = 0.5 * (hi - lo)
    r = (lo + half * (1.0 + _GL_X[None, :])).ravel()
    w = (half * _GL_W[None, :]).ravel()
    return r, w


def truncated_ft(spec: KernelSpec, k):
    """3-D Fourier transform of ``f(|x|) * 1{|x| <= T}`` at wavenumber ``|k|``.

    ``(4 pi / k) int_0^T sin(k r) f(r) r dr``, and ``4 pi int_0^T f(r) r^2 dr``
    at ``k = 0``.
    """
    k = np.asarray(k, dtype=float)
    flat = np.ascontiguousarray(np.abs(k).ravel())
    kmax = float(flat.max()) if flat.size else 0.0
    r, w = quadrature_nodes(spec, kmax)
    wg = w * spec.r_times_kernel(r)
    out = _accel.sine_transform(flat, r, wg)
    return out.reshape(k.shape) if k.ndim else float(out[0])


def coulomb_truncated_ft(T: float, k):
    """Closed form ``4 pi (1 - cos kT) / k^2`` with its k -> 0 limit ``2 pi T^2``."""
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        # 1 - cos x = 2 sin^2(x/2) avoids cancellation at small k
        v = 8.0 * np.pi * np.sin(0.5 * k * T) ** 2 / k ** 2
    return np.where(k == 0, 2.0 * np.pi * T ** 2, v)


def _radial_lookup(indices: np.ndarray, dk: float, spec: KernelSpec) -> np.ndarray:
    """Evaluate the truncated transform on a lattice of integer |index|^2."""
    s = indices
    present = np.zeros(int(s.max()) + 1, dtype=bool)
    present[s.ravel()] = True
    svals = np.flatnonzero(present)
    table = np.zeros(present.size)
    table[svals] = truncated_ft(spec, dk * np.sqrt(svals))
    return table[s]


def min_truncation(grid: Grid) -> float:
    """Largest source-target distance inside the box."""
    return 2.0 * np.sqrt(3.0) * grid.L


def multiplier_table(grid: Grid, spec: KernelSpec, oversample: int = 2) -> np.ndarray:
    """Truncated transform at every wavenumber of the ``oversample*n`` grid,
    laid out as an rfft half-spectrum."""
    if spec.T < min_truncation(grid) * (1 - 1e-12):
        raise ValueError(
            f"truncation radius {spec.T} is below the box diameter {min_truncation(grid)}"
        )
    m = oversample * grid.n
    j = np.abs(np.fft.fftfreq(m, d=1.0 / m)).astype(np.int64)
    jz = j[: m // 2 + 1]
    s = j[:, None, None] ** 2 + j[None, :, None] ** 2 + jz[None, None, :] ** 2
    dk = 2.0 * np.pi / (oversample * 2.0 * grid.L)
    return _radial_lookup(s, dk, spec)


def folded_table(grid: Grid, spec: KernelSpec) -> np.ndarray:
    """Convolution multiplier for 2x zero padding, built from the 4x table.

    Everything is even in each coordinate, so the round trip is done on one
    octant with type-I DCTs.
    """
    if spec.T < min_truncation(grid) * (1 - 1e-12):
        raise ValueError(
            f"truncation radius {spec.T} is below the box diameter {min_truncation(grid)}"
        )
    n = grid.n
    j4 = np.arange(2 * n + 1)
    s4 = j4[:, None, None] ** 2 + j4[None, :, None] ** 2 + j4[None, None, :] ** 2
    k4 = _radial_lookup(s4, np.pi / (4.0 * grid.L), spec)
    # dx^3 * band-limited kernel at offsets 0..2n cells
    kernel = sfft.dctn(k4, type=1) / float(4 * n) ** 3
    octant = sfft.dctn(kernel[: n + 1, : n + 1, : n + 1], type=1)
    idx = np.minimum(np.arange(2 * n), 2 * n - np.arange(2 * n))
    return np.ascontiguousarray(octant[idx][:, idx])


class Convolver:
    """Free-space convolution ``density * kernel`` evaluated on the box."""

    def __init__(self, grid: Grid, spec: KernelSpec):
        self.grid = grid
        self.spec = spec
        self.table = folded_table(grid, spec)
        self._pad_shape = (2 * grid.n,) * 3

    def __call__(self, density: np.ndarray) -> np.ndarray:
        n = self.grid.n
        padded = np.zeros(self._pad_shape)
        padded[:n, :n, :n] = density
        out = irfftn(rfftn(padded) * self.table, self._pad_shape)
        return np.ascontiguousarray(out[:n, :n, :n])

    def spectrum(self, density: np.ndarray) -> np.ndarray:
        """``dx^3 * DFT`` of the zero-padded density (its continuous FT samples)."""
        n = self.grid.n
        padded = np.zeros(self._pad_shape)
        padded[:n, :n, :n] = density
        return rfftn(padded) * self.grid.cell_volume


def default_spec(grid: Grid, kind: str, a: float = 0.0, scale: float = 1.0) -> KernelSpec:
    return KernelSpec(kind, a, min_truncation(grid), scale)


@lru_cache(maxsize=16)
def convolver(grid: Grid, kind: str, a: float = 0.0, scale: float = 1.0) -> Convolver:
    return Convolver(grid, default_spec(grid, kind, a, scale))


def potential_convolver(grid: Grid, a: float) -> Convolver:
    """Convolver for ``phi_a = u^2 * kappa_a`` (Coulomb when ``a == 0``)."""
    if a == 0:
        return convolver(grid, "coulomb")
    return convolver(grid, "bopp_podolsky", float(a))


def padded_k2(grid: Grid) -> np.ndarray:
    """|k|^2 on the rfft half-spectrum of the 2x padded grid."""
    m = 2 * grid.n
    k = 2.0 * np.pi * np.fft.fftfreq(m, d=grid.dx)
    kz = np.abs(k[: m // 2 + 1])
    return k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2
