# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the per-observation hot loops.

Mirrors the API of ``cofact._kernels._pyimpl``; both backends must agree to
float rounding (covered by tests/test_kernels.py).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log1p

cnp.import_array()


def pair_dot(double[:, ::1] U, double[:, ::1] V,
             cnp.int64_t[::1] rows, cnp.int64_t[::1] cols):
    """w[t] = <U[rows[t], :], V[cols[t], :]>."""
    cdef Py_ssize_t n_obs = rows.shape[0]
    cdef Py_ssize_t r = U.shape[1]
    out_arr = np.empty(n_obs, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t, q
    cdef double acc
    cdef Py_ssize_t i, j
    for t in range(n_obs):
        i = rows[t]
        j = cols[t]
        acc = 0.0
        for q in range(r):
            acc += U[i, q] * V[j, q]
        out[t] = acc
    return out_arr


def scatter_add(double[:, ::1] out, cnp.int64_t[::1] rows,
                cnp.int64_t[::1] cols, double[::1] vals):
    """out[rows[t], cols[t]] += vals[t], accumulating duplicates in order."""
    cdef Py_ssize_t n_obs = rows.shape[0]
    cdef Py_ssize_t t
    for t in range(n_obs):
        out[rows[t], cols[t]] += vals[t]


cdef inline double _softplus(double u) nogil:
    # log(1 + exp(u)) without overflow
    if u > 0.0:
        return u + log1p(exp(-u))
    return log1p(exp(u))


def logistic_value(double[::1] w, double[::1] y):
    """Sum over observations of -log(sigmoid(y*w))."""
    cdef Py_ssize_t t
    cdef double total = 0.0
    for t in range(w.shape[0]):
        total += _softplus(-y[t] * w[t])
    return total


def logistic_grad(double[::1] w, double[::1] y):
    """Per-observation derivative of -log(sigmoid(y*w)) in w."""
    cdef Py_ssize_t n_obs = w.shape[0]
    out_arr = np.empty(n_obs, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t
    cdef double z, e
    for t in range(n_obs):
        z = y[t] * w[t]
        if z >= 0.0:
            e = exp(-z)
            out[t] = -y[t] * (e / (1.0 + e))
        else:
            out[t] = -y[t] / (1.0 + exp(z))
    return out_arr


def laplace_value(double[::1] w, double[::1] y, double b):
    """Sum of -log(phi(y*w)) for the two-sided exponential CDF phi."""
    cdef Py_ssize_t t
    cdef double total = 0.0
    cdef double z
    cdef double ln2 = 0.6931471805599453
    for t in range(w.shape[0]):
        z = y[t] * w[t]
        if z < 0.0:
            total += ln2 - z / b
        else:
            total += -log1p(-0.5 * exp(-z / b))
    return total


def laplace_grad(double[::1] w, double[::1] y, double b):
    """Per-observation derivative of -log(phi(y*w)) in w."""
    cdef Py_ssize_t n_obs = w.shape[0]
    out_arr = np.empty(n_obs, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t
    cdef double z, e
    for t in range(n_obs):
        z = y[t] * w[t]
        if z < 0.0:
            out[t] = -y[t] / b
        else:
            e = exp(-z / b)
            out[t] = -y[t] * e / (b * (2.0 - e))
    return out_arr


def quadratic_value(double[::1] w, double[::1] target):
    """0.5 * sum (w - target)^2."""
    cdef Py_ssize_t t
    cdef double total = 0.0
    cdef double d
    for t in range(w.shape[0]):
        d = w[t] - target[t]
        total += 0.5 * d * d
    return total


def quadratic_grad(double[::1] w, double[::1] target):
    cdef Py_ssize_t n_obs = w.shape[0]
    out_arr = np.empty(n_obs, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t
    for t in range(n_obs):
        out[t] = w[t] - target[t]
    return out_arr
