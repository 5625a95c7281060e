"""Pure-numpy versions of the compiled kernels in ``_core.pyx``."""

import numpy as np

_CHUNK = 1 << 22


def sine_transform(k, r, wg):
    k = np.ascontiguousarray(k, dtype=np.float64)
    r = np.ascontiguousarray(r, dtype=np.float64)
    wg = np.ascontiguousarray(wg, dtype=np.float64)
    out = np.empty_like(k)
    rows = max(1, _CHUNK // max(r.size, 1))
    for start in range(0, k.size, rows):
        kk = k[start:start + rows]
        s = np.sin(np.outer(kk, r)) @ wg
        zero = kk == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(zero, np.dot(wg, r), s / np.where(zero, 1.0, kk))
        out[start:start + rows] = 4.0 * np.pi * s
    return out


def power_term(u, p):
    u = np.ascontiguousarray(u, dtype=np.float64)
    au = np.abs(u)
    ap = np.zeros_like(au)
    nz = au > 0.0
    ap[nz] = au[nz] ** (p - 2.0)
    force = u * ap
    return force, float(np.sum(ap * au * au))
