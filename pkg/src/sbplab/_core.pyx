# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: batched radial sine transforms and the fused power term."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, fabs, exp, log, sqrt, M_PI

cnp.import_array()


def sine_transform(const double[::1] k, const double[::1] r,
                   const double[::1] wg):
    """out[i] = 4 pi / k_i * sum_j wg_j sin(k_i r_j); k_i = 0 gives 4 pi sum_j wg_j r_j."""
    cdef Py_ssize_t nk = k.shape[0], nr = r.shape[0], i, j
    cdef double acc, ki
    out = np.empty(nk, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(nk):
            ki = k[i]
            acc = 0.0
            if ki == 0.0:
                for j in range(nr):
                    acc += wg[j] * r[j]
                o[i] = 4.0 * M_PI * acc
            else:
                for j in range(nr):
                    acc += wg[j] * sin(ki * r[j])
                o[i] = 4.0 * M_PI * acc / ki
    return out


def power_term(const double[::1] u, double p):
    """Return (u|u|^(p-2), sum |u|^p) in one pass; the force is 0 where u = 0."""
    cdef Py_ssize_t n = u.shape[0], i
    cdef double au, ap, e = p - 2.0, total = 0.0
    cdef bint half = e == 0.5
    force = np.empty(n, dtype=np.float64)
    cdef double[::1] f = force
    with nogil:
        for i in range(n):
            au = fabs(u[i])
            if au == 0.0:
                ap = 0.0
            elif half:
                ap = sqrt(au)
            else:
                ap = exp(e * log(au))
            f[i] = u[i] * ap
            total += ap * au * au
    return force, total
