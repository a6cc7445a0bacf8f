# Compiled versions of the optimizer's hot loops; see _pykernels for the reference.
from libc.math cimport exp, fabs

import numpy as np

cdef double SQRT_2PI = 2.5066282746310002


cdef double _area(const double[::1] f, double dx) noexcept nogil:
    cdef Py_ssize_t k
    cdef double c = 0.0
    for k in range(1, f.shape[0]):
        c += 0.5 * (f[k - 1] + f[k]) * dx
    return c


def cumulative(const double[::1] f, double dx):
    cdef Py_ssize_t k, n = f.shape[0]
    out = np.empty(n)
    cdef double[::1] c = out
    c[0] = 0.0
    for k in range(1, n):
        c[k] = c[k - 1] + 0.5 * (f[k - 1] + f[k]) * dx
    return out


cdef double _invert(const double[::1] f, double lo, double dx, double z, double[::1] c) noexcept nogil:
    cdef Py_ssize_t k, n = f.shape[0], d = n - 1
    cdef Py_ssize_t a, b, mid, i
    cdef double target, width, frac, x, hi
    c[0] = 0.0
    for k in range(1, n):
        c[k] = c[k - 1] + 0.5 * (f[k - 1] + f[k]) * dx
    target = z * c[d]
    # bisect right: first index with c[idx] > target
    a = 0
    b = n
    while a < b:
        mid = (a + b) // 2
        if target < c[mid]:
            b = mid
        else:
            a = mid + 1
    i = a - 1
    if i < 0:
        i = 0
    elif i > d - 1:
        i = d - 1
    width = c[i + 1] - c[i]
    if width > 0.0:
        frac = (target - c[i]) / width
    else:
        frac = 0.0
    x = lo + (i + frac) * dx
    hi = lo + d * dx
    if x > hi:
        x = hi
    elif x < lo:
        x = lo
    return x


def invert_cdf(const double[::1] f, double lo, double dx, double z):
    cdef double[::1] c = np.empty(f.shape[0])
    return _invert(f, lo, dx, z, c)


cdef void _reinforce(double[::1] f, double lo, double dx, double r, double scale,
                     double sigma) noexcept nogil:
    cdef Py_ssize_t k, n = f.shape[0]
    cdef double d, inv
    if scale == 0.0:
        return
    for k in range(n):
        d = (lo + k * dx) - r
        f[k] += scale * exp(-(d * d) / (2.0 * sigma * sigma))
    inv = 1.0 / _area(f, dx)
    for k in range(n):
        f[k] *= inv


def reinforce(double[::1] f, double lo, double dx, double r, double scale, double sigma):
    _reinforce(f, lo, dx, r, scale, sigma)


def select_team(const double[:, ::1] F, const double[::1] lo, const double[::1] dx,
                const double[::1] z):
    cdef Py_ssize_t k, m = F.shape[0]
    out = np.empty(m)
    cdef double[::1] o = out
    cdef double[::1] c = np.empty(F.shape[1])
    with nogil:
        for k in range(m):
            o[k] = _invert(F[k], lo[k], dx[k], z[k], c)
    return out


def reinforce_team(double[:, ::1] F, const double[::1] lo, const double[::1] dx,
                   const double[::1] actions, const double[::1] scale, const double[::1] sigma):
    cdef Py_ssize_t k, m = F.shape[0]
    with nogil:
        for k in range(m):
            _reinforce(F[k], lo[k], dx[k], actions[k], scale[k], sigma[k])


def mixture_cost(const double[::1] p, const double[::1] mu, const double[::1] sigma,
                 const double[::1] h, const long long[::1] x, double omega):
    cdef Py_ssize_t i, j, K = p.shape[0], n = x.shape[0]
    cdef double acc = 0.0, pdf, d, r, psum = 0.0
    with nogil:
        for j in range(n):
            pdf = 0.0
            for i in range(K):
                d = x[j] - mu[i]
                pdf = pdf + (p[i] / (SQRT_2PI * sigma[i])) * exp(-(d * d) / (2.0 * sigma[i] * sigma[i]))
            r = pdf - h[x[j]]
            acc += r * r
        for i in range(K):
            psum += p[i]
    return acc / n + omega * fabs(psum - 1.0)
