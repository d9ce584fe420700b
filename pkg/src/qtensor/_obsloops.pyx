# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-observation likelihood kernels.

Same contract as the numpy fallback ``_obsloops_np``: flat float64 arrays,
1-based integer labels, boundary array without the infinite end sentinels,
and sums without the objective prefactor.
"""

from libc.math cimport INFINITY, erfc, exp, log, sqrt, M_PI
from libc.stdint cimport int64_t

import numpy as np

BACKEND = "cython"

cdef double _PROB_FLOOR = 1e-12
cdef double _INV_SQRT_2PI = 1.0 / sqrt(2.0 * M_PI)
cdef double _INV_SQRT_2 = 1.0 / sqrt(2.0)


cdef inline double _base_cdf(double z, int model_id) noexcept nogil:
    cdef double e
    if model_id == 0:
        return 0.5 * erfc(-z * _INV_SQRT_2)
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _base_pdf(double z, int model_id) noexcept nogil:
    cdef double p
    if model_id == 0:
        return exp(-0.5 * z * z) * _INV_SQRT_2PI
    p = _base_cdf(z, 1)
    return p * (1.0 - p)


cdef inline double _bin_prob(double zu, double zl, int model_id) noexcept nogil:
    cdef double f
    if zl > 0.0:
        f = _base_cdf(-zl, model_id) - _base_cdf(-zu, model_id)
    else:
        f = _base_cdf(zu, model_id) - _base_cdf(zl, model_id)
    if f < _PROB_FLOOR:
        f = _PROB_FLOOR
    return f


cdef inline double _omega_at(const double[::1] omegas, Py_ssize_t idx) noexcept nogil:
    # idx is 0-based into the extended boundary sequence -inf, w_1 .. w_{W-1}, +inf
    if idx <= 0:
        return -INFINITY
    if idx > omegas.shape[0]:
        return INFINITY
    return omegas[idx - 1]


def nll(const double[::1] x, const int64_t[::1] labels,
        const double[::1] omegas, double sigma, int model_id):
    """Sum of ``-log f_label(x)`` over the observed entries."""
    cdef Py_ssize_t i, n = x.shape[0]
    cdef int64_t lab
    cdef double zu, zl, total = 0.0
    with nogil:
        for i in range(n):
            lab = labels[i]
            zu = (_omega_at(omegas, lab) - x[i]) / sigma
            zl = (_omega_at(omegas, lab - 1) - x[i]) / sigma
            total -= log(_bin_prob(zu, zl, model_id))
    return total


def dneg_log_f(const double[::1] x, const int64_t[::1] labels,
               const double[::1] omegas, double sigma, int model_id):
    """Per-entry derivative of ``-log f_label`` with respect to the entry."""
    cdef Py_ssize_t i, n = x.shape[0]
    cdef int64_t lab
    cdef double zu, zl, f
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            lab = labels[i]
            zu = (_omega_at(omegas, lab) - x[i]) / sigma
            zl = (_omega_at(omegas, lab - 1) - x[i]) / sigma
            f = _bin_prob(zu, zl, model_id)
            o[i] = (_base_pdf(zu, model_id) - _base_pdf(zl, model_id)) / (sigma * f)
    return out


def boundary_grad(const double[::1] x_at_level, const double[::1] x_above,
                  Py_ssize_t level, const double[::1] omegas,
                  double sigma, int model_id):
    """Derivative of the label log-loss sum with respect to ``omega_level``."""
    cdef Py_ssize_t i
    cdef double zu, zl, f, total = 0.0
    with nogil:
        for i in range(x_above.shape[0]):
            zu = (_omega_at(omegas, level + 1) - x_above[i]) / sigma
            zl = (_omega_at(omegas, level) - x_above[i]) / sigma
            f = _bin_prob(zu, zl, model_id)
            total += _base_pdf(zl, model_id) / (sigma * f)
        for i in range(x_at_level.shape[0]):
            zu = (_omega_at(omegas, level) - x_at_level[i]) / sigma
            zl = (_omega_at(omegas, level - 1) - x_at_level[i]) / sigma
            f = _bin_prob(zu, zl, model_id)
            total -= _base_pdf(zu, model_id) / (sigma * f)
    return total
