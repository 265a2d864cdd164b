# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  Semantics are defined by :mod:`mvbayes._fallback`."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def ar_recursion(double mu, const double[::1] phi, const double[::1] eps,
                 const double[::1] lags):
    cdef Py_ssize_t p = phi.shape[0]
    cdef Py_ssize_t T = eps.shape[0]
    cdef Py_ssize_t t, i
    cdef double r
    buf_arr = np.empty(p + T, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    for i in range(p):
        buf[i] = lags[i] - mu
    for t in range(T):
        r = mu
        for i in range(p):
            r = r + phi[i] * buf[p + t - 1 - i]
        r = r + eps[t]
        buf[p + t] = r - mu
    return buf_arr[p:] + mu


def dp_backward(const double[:, ::1] mean_e, const double[:, ::1] second_e,
                const double[::1] r0, const double[::1] probs):
    cdef Py_ssize_t B = mean_e.shape[0]
    cdef Py_ssize_t T = mean_e.shape[1]
    cdef Py_ssize_t b, t
    cdef double w1, l1, h, pt
    om_arr = np.empty((B, T + 1), dtype=np.float64)
    la_arr = np.empty((B, T + 1), dtype=np.float64)
    th_arr = np.empty((B, T), dtype=np.float64)
    cdef double[:, ::1] om = om_arr
    cdef double[:, ::1] la = la_arr
    cdef double[:, ::1] th = th_arr
    for b in range(B):
        om[b, T] = probs[T - 1]
        la[b, T] = probs[T - 1]
        for t in range(T - 1, -1, -1):
            w1 = om[b, t + 1]
            l1 = la[b, t + 1]
            h = mean_e[b, t] * mean_e[b, t] / second_e[b, t]
            pt = probs[t - 1] if t > 0 else 0.0
            om[b, t] = pt + r0[t] * r0[t] * w1 * (1.0 - h)
            la[b, t] = pt + r0[t] * l1 * (1.0 - h)
            th[b, t] = l1 * l1 * h / w1
    return om_arr, la_arr, th_arr
