# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled collision kernel for the billiard flow.

Twin of ``_kernels_py``; see that module for the algorithm notes.  Only
the inner search loop lives here, orchestration stays in Python.
"""

from libc.math cimport atan, atan2, cos, fabs, sin, sqrt, tanh, NAN, M_PI

ARC = 0
DIAMETER = 1

HIT = 0
NO_HIT_EVER = 1
NO_HIT_BEFORE_LIMIT = 2
BAD_START = 3

cdef double _SATURATION = 44.0
cdef double _CROSS_EPS = 1e-12
cdef double _EPS = 2.220446049250313e-16

import numpy as np


cdef void _arc_position(double[::1] n1, double[::1] n2, double v, double radius,
                        double kappa, double phi, double* out, Py_ssize_t d) noexcept nogil:
    cdef double cos_phi = cos(phi)
    cdef double sin_phi = sin(phi)
    cdef double half = sin(0.5 * phi)
    cdef double radial = -(2.0 * v * half * half + kappa * cos_phi)
    cdef double tangential = radius * sin_phi
    cdef Py_ssize_t j
    for j in range(d):
        out[j] = n1[j] * radial + n2[j] * tangential


cdef void _position(int kind, double[::1] n1, double[::1] n2, double v,
                    double radius, double kappa, double omega, double t1,
                    double t, double* out, Py_ssize_t d) noexcept nogil:
    cdef double s = tanh(0.5 * omega * (t - t1))
    cdef Py_ssize_t j
    if kind == DIAMETER:
        for j in range(d):
            out[j] = n2[j] * s
    else:
        _arc_position(n1, n2, v, radius, kappa, 2.0 * atan(kappa * s), out, d)


cdef double _wall_value(double* y, double[:, ::1] centers, Py_ssize_t w,
                        double rsq, Py_ssize_t d) noexcept nogil:
    cdef double acc = 0.0
    cdef double diff
    cdef Py_ssize_t j
    for j in range(d):
        diff = y[j] - centers[w, j]
        acc += diff * diff
    return acc - rsq


cdef double _f_at(int kind, double[::1] n1, double[::1] n2, double v,
                  double radius, double kappa, double omega, double t1,
                  double t, double[:, ::1] centers, Py_ssize_t w, double rsq,
                  double* buf, Py_ssize_t d) noexcept nogil:
    _position(kind, n1, n2, v, radius, kappa, omega, t1, t, buf, d)
    return _wall_value(buf, centers, w, rsq, d)


cdef double _arc_min_remaining(double[::1] n1, double[::1] n2, double v,
                               double radius, double kappa, double phi_a,
                               double phi_b, double[:, ::1] centers,
                               Py_ssize_t w, double rsq, double* buf,
                               Py_ssize_t d) noexcept nogil:
    cdef double c_n1 = 0.0
    cdef double c_n2 = 0.0
    cdef Py_ssize_t j
    for j in range(d):
        c_n1 += n1[j] * centers[w, j]
        c_n2 += n2[j] * centers[w, j]
    _arc_position(n1, n2, v, radius, kappa, phi_a, buf, d)
    cdef double best = _wall_value(buf, centers, w, rsq, d)
    _arc_position(n1, n2, v, radius, kappa, phi_b, buf, d)
    cdef double fb = _wall_value(buf, centers, w, rsq, d)
    if fb < best:
        best = fb
    cdef double psi = atan2(-c_n2, -(v + c_n1))
    cdef double crit
    cdef double fc
    cdef int k
    for k in range(2):
        crit = psi - M_PI if k == 0 else psi + M_PI
        if phi_a <= crit <= phi_b:
            _arc_position(n1, n2, v, radius, kappa, crit, buf, d)
            fc = _wall_value(buf, centers, w, rsq, d)
            if fc < best:
                best = fc
    return best


cdef double _diameter_min_remaining(double[::1] n2, double t_a_pos,
                                    double[:, ::1] centers, Py_ssize_t w,
                                    double rsq, Py_ssize_t d) noexcept nogil:
    cdef double b = 0.0
    cdef double cc = 0.0
    cdef Py_ssize_t j
    for j in range(d):
        b += n2[j] * centers[w, j]
        cc += centers[w, j] * centers[w, j]
    cc -= rsq
    cdef double best = t_a_pos * t_a_pos - 2.0 * b * t_a_pos + cc
    cdef double fb = 1.0 - 2.0 * b + cc
    if fb < best:
        best = fb
    cdef double fv
    if t_a_pos <= b <= 1.0:
        fv = cc - b * b
        if fv < best:
            best = fv
    return best


cdef double _brent_impl(int kind, double[::1] n1, double[::1] n2, double v,
                        double radius, double kappa, double omega, double t1,
                        double[:, ::1] centers, Py_ssize_t w, double rsq,
                        double* buf, Py_ssize_t d, double a, double b,
                        double fa, double fb, double xtol) noexcept nogil:
    cdef double c = a
    cdef double fc = fa
    cdef double e = b - a
    cdef double dd = e
    cdef double tol, m, s, p, q, r, tmp
    cdef int it
    for it in range(200):
        if fabs(fc) < fabs(fb):
            a = b
            b = c
            c = a
            fa = fb
            fb = fc
            fc = fa
        tol = 2.0 * _EPS * fabs(b) + 0.5 * xtol
        m = 0.5 * (c - b)
        if fabs(m) <= tol or fb == 0.0:
            return b
        if fabs(e) < tol or fabs(fa) <= fabs(fb):
            e = m
            dd = m
        else:
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            else:
                p = -p
            tmp = 3.0 * m * q - fabs(tol * q)
            if fabs(e * q) < tmp:
                tmp = fabs(e * q)
            if 2.0 * p < tmp:
                e = dd
                dd = p / q
            else:
                e = m
                dd = m
        a = b
        fa = fb
        if fabs(dd) > tol:
            b += dd
        else:
            b += tol if m > 0.0 else -tol
        fb = _f_at(kind, n1, n2, v, radius, kappa, omega, t1, b, centers, w,
                   rsq, buf, d)
        if (fb > 0.0) == (fc > 0.0):
            c = a
            fc = fa
            e = b - a
            dd = e
    return b


def next_collision(int kind, double[::1] n1, double[::1] n2, double v,
                   double omega, double t1, double t_from, double t_limit,
                   double[:, ::1] centers, double[::1] radii_sq,
                   double stride, double tol_t):
    """Earliest inward wall crossing; see the pure twin for semantics."""
    cdef Py_ssize_t d = n2.shape[0]
    cdef Py_ssize_t m = centers.shape[0]
    if m == 0:
        return (NO_HIT_EVER, float("nan"), -1)
    if d > 64:
        raise ValueError("compiled kernel supports ball dimension <= 64")

    cdef double y_a[64]
    cdef double y_b[64]
    cdef double buf[64]

    cdef double radius = 0.0
    cdef double kappa = 0.0
    cdef double phi_from = 0.0
    cdef double phi_end = 0.0
    cdef double t_from_pos = 0.0
    cdef double s
    if kind == ARC:
        radius = sqrt(v * v - 1.0)
        kappa = 1.0 / (v + radius)
        phi_end = 2.0 * atan(kappa)
        s = tanh(0.5 * omega * (t_from - t1))
        phi_from = 2.0 * atan(kappa * s)
    else:
        t_from_pos = tanh(0.5 * omega * (t_from - t1))

    cand_arr = np.empty(m, dtype=np.intp)
    f_arr = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t[::1] cand = cand_arr
    cdef double[::1] f_a = f_arr

    cdef Py_ssize_t n_cand = 0
    cdef Py_ssize_t w
    cdef double fmin
    for w in range(m):
        if kind == ARC:
            fmin = _arc_min_remaining(n1, n2, v, radius, kappa, phi_from,
                                      phi_end, centers, w, radii_sq[w], buf, d)
        else:
            fmin = _diameter_min_remaining(n2, t_from_pos, centers, w,
                                           radii_sq[w], d)
        if fmin < -_CROSS_EPS:
            cand[n_cand] = w
            n_cand += 1
    if n_cand == 0:
        return (NO_HIT_EVER, float("nan"), -1)

    cdef double t_sat = t1 + _SATURATION / omega
    cdef double t_stop = t_limit if t_limit < t_sat else t_sat
    if t_stop < t_from:
        t_stop = t_from
    cdef int no_hit = NO_HIT_BEFORE_LIMIT if t_limit < t_sat else NO_HIT_EVER
    if t_from >= t_stop:
        return (no_hit, float("nan"), -1)

    cdef double t_a = t_from
    _position(kind, n1, n2, v, radius, kappa, omega, t1, t_a, y_a, d)
    cdef Py_ssize_t i
    cdef double val
    for i in range(n_cand):
        w = cand[i]
        val = _wall_value(y_a, centers, w, radii_sq[w], d)
        if val < 0.0:
            if val < -1e-9:
                return (BAD_START, float("nan"), int(w))
            val = 0.0
        f_a[i] = val

    cdef double rr, step, t_b, f_b, root, best_t
    cdef Py_ssize_t best_w
    cdef Py_ssize_t j
    while t_a < t_stop:
        rr = 0.0
        for j in range(d):
            rr += y_a[j] * y_a[j]
        step = stride * (0.5 if rr > 0.9801 else 1.0)
        t_b = t_a + step
        if t_b > t_stop:
            t_b = t_stop
        _position(kind, n1, n2, v, radius, kappa, omega, t1, t_b, y_b, d)
        best_t = float("inf")
        best_w = -1
        for i in range(n_cand):
            w = cand[i]
            f_b = _wall_value(y_b, centers, w, radii_sq[w], d)
            if f_a[i] >= 0.0 and f_b < 0.0:
                if f_a[i] == 0.0:
                    root = t_a
                else:
                    root = _brent_impl(kind, n1, n2, v, radius, kappa, omega,
                                       t1, centers, w, radii_sq[w], buf, d,
                                       t_a, t_b, f_a[i], f_b, tol_t)
                if root < best_t - tol_t:
                    best_t = root
                    best_w = w
                elif root <= best_t + tol_t and (best_w < 0 or w < best_w):
                    if root < best_t:
                        best_t = root
                    best_w = w
            f_a[i] = f_b
        if best_w >= 0:
            return (HIT, best_t, int(best_w))
        t_a = t_b
        for j in range(d):
            y_a[j] = y_b[j]
    return (no_hit, float("nan"), -1)
