# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of frackac._corepy: the hot inner loops in C.

Same algorithms as the NumPy fallback; sequential summation order inside a
path, paths independent.  All loops release the GIL so thread pools scale.
"""

from libc.math cimport exp, fabs, pow, sqrt
from libc.stdlib cimport free, malloc

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF KERNEL_CONSTANT = 0
DEF KERNEL_FBM = 1
DEF KERNEL_SMOOTH = 2


cdef inline double q_eval(int kernel_id, double p0, double xa, double xb) noexcept nogil:
    cdef double na, nb, nd, tk
    if kernel_id == KERNEL_CONSTANT:
        return p0
    if kernel_id == KERNEL_FBM:
        na = fabs(xa)
        nb = fabs(xb)
        nd = fabs(xa - xb)
        tk = 2.0 * p0
        return 0.5 * (pow(na, tk) + pow(nb, tk) - pow(nd, tk))
    # smooth
    nd = xa - xb
    return exp(-(nd * nd) / (p0 * p0))


cdef int _moment_tables(int m, double dt, double two_h,
                        double** s_tab, double** p2_tab,
                        double** pw, double** rw) noexcept nogil:
    """Exact cell integrals of the singular weights (see _corepy)."""
    cdef int j
    cdef double r
    s_tab[0] = <double*> malloc((m + 1) * sizeof(double))
    p2_tab[0] = <double*> malloc((m + 1) * sizeof(double))
    pw[0] = <double*> malloc((m + 1) * sizeof(double))
    rw[0] = <double*> malloc((m + 1) * sizeof(double))
    if s_tab[0] == NULL or p2_tab[0] == NULL or pw[0] == NULL or rw[0] == NULL:
        return -1
    s_tab[0][0] = 0.0
    p2_tab[0][0] = 0.0
    pw[0][0] = 0.0
    rw[0][0] = 0.0
    for j in range(1, m + 1):
        r = j * dt
        s_tab[0][j] = pow(r, two_h - 1.0) / (two_h - 1.0)
        p2_tab[0][j] = pow(r, two_h) / two_h
        pw[0][j] = pow(r, two_h)
        rw[0][j] = pow(r, two_h + 1.0)
    return 0


cdef double _term1_row(double* q, int m, double dt, double two_h,
                       double* pw, double* rw) noexcept nogil:
    cdef int k
    cdef double slope, a, acc = 0.0
    cdef double c2 = two_h / (two_h + 1.0)
    for k in range(m):
        slope = (q[k + 1] - q[k]) / dt
        a = q[k] - slope * (k * dt)
        acc += a * (pw[k + 1] - pw[k]) + c2 * slope * (rw[k + 1] - rw[k])
    return acc


def sigma2_batch(double[:, ::1] paths, double dt, double two_h,
                 int kernel_id, double p0, double p1, bint skip_correction,
                 double[::1] out):
    """Closed-form second moment along each path (d = 1)."""
    cdef Py_ssize_t batch = paths.shape[0]
    cdef int m = <int> paths.shape[1] - 1
    cdef double *s_tab
    cdef double *p2_tab
    cdef double *pw
    cdef double *rw
    cdef double *q
    cdef double *f_cur
    cdef Py_ssize_t b
    cdef int k, j
    cdef double xk, g_prev, g_cur, slope, a, inner, f_prev, corr, total
    cdef bint with_corr = not (skip_correction or kernel_id == KERNEL_CONSTANT)
    with nogil:
        if _moment_tables(m, dt, two_h, &s_tab, &p2_tab, &pw, &rw) != 0:
            with gil:
                raise MemoryError()
        q = <double*> malloc((m + 1) * sizeof(double))
        for b in range(batch):
            for k in range(m + 1):
                q[k] = q_eval(kernel_id, p0, paths[b, k], paths[b, k])
            total = _term1_row(q, m, dt, two_h, pw, rw)
            if with_corr:
                corr = 0.0
                f_prev = 0.0
                for k in range(1, m + 1):
                    xk = paths[b, k]
                    inner = 0.0
                    g_prev = 0.0
                    for j in range(1, k + 1):
                        g_cur = q_eval(kernel_id, p0, xk, paths[b, k - j]) - q[k]
                        slope = (g_cur - g_prev) / dt
                        a = g_prev - slope * ((j - 1) * dt)
                        if j == 1:
                            inner += slope * p2_tab[1]
                        else:
                            inner += a * (s_tab[j] - s_tab[j - 1]) \
                                + slope * (p2_tab[j] - p2_tab[j - 1])
                        g_prev = g_cur
                    corr += 0.5 * dt * (f_prev + inner)
                    f_prev = inner
                total += two_h * (two_h - 1.0) * corr
            out[b] = total
        free(q)
        free(s_tab)
        free(p2_tab)
        free(pw)
        free(rw)
    return 0


def covariance_batch(double[:, ::1] pa, double[:, ::1] pb, double dt,
                     double two_h, int kernel_id, double p0, double p1,
                     bint skip_correction, double[::1] out):
    """Closed-form mixed second moment for two path batches (d = 1)."""
    cdef Py_ssize_t batch = pa.shape[0]
    cdef int m = <int> pa.shape[1] - 1
    cdef double *s_tab
    cdef double *p2_tab
    cdef double *pw
    cdef double *rw
    cdef double *q
    cdef Py_ssize_t b
    cdef int k, j
    cdef double ak, bk, g_prev, g_cur, slope, a, inner, f_prev, corr, total
    cdef bint with_corr = not (skip_correction or kernel_id == KERNEL_CONSTANT)
    with nogil:
        if _moment_tables(m, dt, two_h, &s_tab, &p2_tab, &pw, &rw) != 0:
            with gil:
                raise MemoryError()
        q = <double*> malloc((m + 1) * sizeof(double))
        for b in range(batch):
            for k in range(m + 1):
                q[k] = q_eval(kernel_id, p0, pa[b, k], pb[b, k])
            total = _term1_row(q, m, dt, two_h, pw, rw)
            if with_corr:
                corr = 0.0
                f_prev = 0.0
                for k in range(1, m + 1):
                    ak = pa[b, k]
                    bk = pb[b, k]
                    inner = 0.0
                    g_prev = 0.0
                    for j in range(1, k + 1):
                        g_cur = q_eval(kernel_id, p0, ak, pb[b, k - j]) \
                            + q_eval(kernel_id, p0, pa[b, k - j], bk) \
                            - 2.0 * q[k]
                        slope = (g_cur - g_prev) / dt
                        a = g_prev - slope * ((j - 1) * dt)
                        if j == 1:
                            inner += slope * p2_tab[1]
                        else:
                            inner += a * (s_tab[j] - s_tab[j - 1]) \
                                + slope * (p2_tab[j] - p2_tab[j - 1])
                        g_prev = g_cur
                    corr += 0.5 * dt * (f_prev + inner)
                    f_prev = inner
                total += 0.5 * two_h * (two_h - 1.0) * corr
            out[b] = total
        free(q)
        free(s_tab)
        free(p2_tab)
        free(pw)
        free(rw)
    return 0


cdef inline double _interp_row(double[:, ::1] field, Py_ssize_t row,
                               double u, Py_ssize_t nx) noexcept nogil:
    cdef Py_ssize_t j = <Py_ssize_t> u
    if j > nx - 2:
        j = nx - 2
    if j < 0:
        j = 0
    cdef double frac = u - j
    return field[row, j] * (1.0 - frac) + field[row, j + 1] * frac


def line_integral_batch(double[:, ::1] field, Py_ssize_t idx0, Py_ssize_t m_eps,
                        double[:, ::1] positions, double dt, double x0,
                        double dx, double eps, double[::1] out):
    """Trapezoid integral of the mollified rate along moving points."""
    cdef Py_ssize_t nt = field.shape[0]
    cdef Py_ssize_t nx = field.shape[1]
    cdef Py_ssize_t batch = positions.shape[0]
    cdef Py_ssize_t n_steps = positions.shape[1] - 1
    cdef Py_ssize_t b, k, row
    cdef double u, w, hi, lo, acc
    cdef double inv_dx = 1.0 / dx
    cdef double inv_2eps = 1.0 / (2.0 * eps)
    cdef int bad = 0
    if idx0 - m_eps < 0 or idx0 + n_steps + m_eps >= nt:
        return 2
    with nogil:
        for b in range(batch):
            acc = 0.0
            for k in range(n_steps + 1):
                u = (positions[b, k] - x0) * inv_dx
                if u < -1e-9 or u > (nx - 1) + 1e-9:
                    bad = 1
                    break
                row = idx0 + k
                hi = _interp_row(field, row + m_eps, u, nx)
                lo = _interp_row(field, row - m_eps, u, nx)
                w = dt if 0 < k < n_steps else 0.5 * dt
                acc += w * (hi - lo) * inv_2eps
            if bad:
                break
            out[b] = acc
    return bad


def prefix_integrals_batch(double[:, ::1] field, Py_ssize_t idx0,
                           Py_ssize_t m_eps, double[:, ::1] positions,
                           double dt, double x0, double dx, double eps,
                           long long[::1] s_indices, double[:, ::1] out):
    """Reversed-time line integrals for several horizons; out is (n_s, B)."""
    cdef Py_ssize_t nt = field.shape[0]
    cdef Py_ssize_t nx = field.shape[1]
    cdef Py_ssize_t batch = positions.shape[0]
    cdef Py_ssize_t n_s = s_indices.shape[0]
    cdef Py_ssize_t i, b, k, kk, row
    cdef double u, w, hi, lo, acc
    cdef double inv_dx = 1.0 / dx
    cdef double inv_2eps = 1.0 / (2.0 * eps)
    cdef int bad = 0
    for i in range(n_s):
        if idx0 - m_eps < 0 or idx0 + s_indices[i] + m_eps >= nt:
            return 2
        if s_indices[i] + 1 > positions.shape[1]:
            return 2
    with nogil:
        for i in range(n_s):
            kk = <Py_ssize_t> s_indices[i]
            if kk == 0:
                for b in range(batch):
                    out[i, b] = 0.0
                continue
            for b in range(batch):
                acc = 0.0
                for k in range(kk + 1):
                    u = (positions[b, k] - x0) * inv_dx
                    if u < -1e-9 or u > (nx - 1) + 1e-9:
                        bad = 1
                        break
                    # integrand time (kk - k) * dt at path position index k
                    row = idx0 + (kk - k)
                    hi = _interp_row(field, row + m_eps, u, nx)
                    lo = _interp_row(field, row - m_eps, u, nx)
                    w = dt if 0 < k < kk else 0.5 * dt
                    acc += w * (hi - lo) * inv_2eps
                if bad:
                    break
                out[i, b] = acc
            if bad:
                break
    return bad
