# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels: Neumann Laplacian, Helmholtz-type conjugate
gradients, and the drift flux divergence. Semantics mirror ``_reference``."""

from libc.math cimport fabs, pow, sqrt

import numpy as np

SCHEME_UPWIND = 0
SCHEME_CENTRAL = 1

cdef int _SCHEME_CENTRAL = 1


cdef inline double _chi(double K, double k, double a, double vf) noexcept nogil:
    cdef double base = a + vf
    if k == 1.0:
        return K / base
    return K / pow(base, k)


def laplacian(double[:, ::1] f, double hx, double hy):
    cdef Py_ssize_t nx = f.shape[0], ny = f.shape[1]
    out_arr = np.empty((nx, ny), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy)
    cdef Py_ssize_t i, j
    cdef double dxx, dyy
    with nogil:
        for i in range(nx):
            for j in range(ny):
                dxx = 0.0
                if i > 0:
                    dxx += f[i - 1, j] - f[i, j]
                if i < nx - 1:
                    dxx += f[i + 1, j] - f[i, j]
                dyy = 0.0
                if j > 0:
                    dyy += f[i, j - 1] - f[i, j]
                if j < ny - 1:
                    dyy += f[i, j + 1] - f[i, j]
                out[i, j] = dxx * ihx2 + dyy * ihy2
    return out_arr


cdef void _helmholtz(double[:, ::1] x, double[:, ::1] out,
                     double alpha, double cx, double cy) noexcept nogil:
    cdef Py_ssize_t nx = x.shape[0], ny = x.shape[1]
    cdef Py_ssize_t i, j
    cdef double dxx, dyy
    for i in range(nx):
        for j in range(ny):
            dxx = 0.0
            if i > 0:
                dxx += x[i - 1, j] - x[i, j]
            if i < nx - 1:
                dxx += x[i + 1, j] - x[i, j]
            dyy = 0.0
            if j > 0:
                dyy += x[i, j - 1] - x[i, j]
            if j < ny - 1:
                dyy += x[i, j + 1] - x[i, j]
            out[i, j] = alpha * x[i, j] - cx * dxx - cy * dyy


def helmholtz_apply(double[:, ::1] x, double alpha, double cx, double cy):
    out_arr = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        _helmholtz(x, out, alpha, cx, cy)
    return out_arr


def cg_solve(double[:, ::1] b, double[:, ::1] x0, double alpha, double cx,
             double cy, double rel_tol=1e-10, int max_iter=100000):
    """Conjugate gradients for (alpha I - cx Dxx - cy Dyy) x = b.

    Returns (x, iters, relres); iters = -1 when not converged.
    """
    cdef Py_ssize_t nx = b.shape[0], ny = b.shape[1]
    x_arr = np.empty((nx, ny), dtype=np.float64)
    r_arr = np.empty((nx, ny), dtype=np.float64)
    p_arr = np.empty((nx, ny), dtype=np.float64)
    ap_arr = np.empty((nx, ny), dtype=np.float64)
    cdef double[:, ::1] x = x_arr
    cdef double[:, ::1] r = r_arr
    cdef double[:, ::1] p = p_arr
    cdef double[:, ::1] ap = ap_arr
    cdef Py_ssize_t i, j
    cdef double b_norm2 = 0.0, rs = 0.0, rs_new, denom, step, beta, b_norm
    cdef int it, converged = 0

    with nogil:
        for i in range(nx):
            for j in range(ny):
                b_norm2 += b[i, j] * b[i, j]
    b_norm = sqrt(b_norm2)
    if b_norm == 0.0:
        x_arr[:] = 0.0
        return x_arr, 0, 0.0

    with nogil:
        for i in range(nx):
            for j in range(ny):
                x[i, j] = x0[i, j]
        _helmholtz(x, ap, alpha, cx, cy)
        for i in range(nx):
            for j in range(ny):
                r[i, j] = b[i, j] - ap[i, j]
                p[i, j] = r[i, j]
                rs += r[i, j] * r[i, j]
    if sqrt(rs) <= rel_tol * b_norm:
        return x_arr, 0, sqrt(rs) / b_norm

    for it in range(1, max_iter + 1):
        with nogil:
            _helmholtz(p, ap, alpha, cx, cy)
            denom = 0.0
            for i in range(nx):
                for j in range(ny):
                    denom += p[i, j] * ap[i, j]
            step = rs / denom
            rs_new = 0.0
            for i in range(nx):
                for j in range(ny):
                    x[i, j] += step * p[i, j]
                    r[i, j] -= step * ap[i, j]
                    rs_new += r[i, j] * r[i, j]
        if sqrt(rs_new) <= rel_tol * b_norm:
            converged = 1
            rs = rs_new
            break
        with nogil:
            beta = rs_new / rs
            for i in range(nx):
                for j in range(ny):
                    p[i, j] = r[i, j] + beta * p[i, j]
        rs = rs_new
    if converged:
        return x_arr, it, sqrt(rs) / b_norm
    return x_arr, -1, sqrt(rs) / b_norm


def upwind_flux_divergence(double[:, ::1] u, double[:, ::1] v, double K,
                           double k, double a, double hx, double hy,
                           int scheme=SCHEME_UPWIND):
    """Divergence of u * chi(v) grad(v) plus (max face speed, max face grad)."""
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1]
    div_arr = np.zeros((nx, ny), dtype=np.float64)
    cdef double[:, ::1] div = div_arr
    cdef double ihx = 1.0 / hx, ihy = 1.0 / hy
    cdef double max_w = 0.0, max_grad = 0.0
    cdef double grad, w, flux, aw, ag
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(nx - 1):
            for j in range(ny):
                grad = (v[i + 1, j] - v[i, j]) * ihx
                if K != 0.0:
                    w = _chi(K, k, a, 0.5 * (v[i + 1, j] + v[i, j])) * grad
                else:
                    w = 0.0
                if scheme == _SCHEME_CENTRAL:
                    flux = w * 0.5 * (u[i, j] + u[i + 1, j])
                elif w > 0.0:
                    flux = w * u[i, j]
                else:
                    flux = w * u[i + 1, j]
                div[i, j] += flux * ihx
                div[i + 1, j] -= flux * ihx
                aw = fabs(w)
                if aw > max_w:
                    max_w = aw
                ag = fabs(grad)
                if ag > max_grad:
                    max_grad = ag
        for i in range(nx):
            for j in range(ny - 1):
                grad = (v[i, j + 1] - v[i, j]) * ihy
                if K != 0.0:
                    w = _chi(K, k, a, 0.5 * (v[i, j + 1] + v[i, j])) * grad
                else:
                    w = 0.0
                if scheme == _SCHEME_CENTRAL:
                    flux = w * 0.5 * (u[i, j] + u[i, j + 1])
                elif w > 0.0:
                    flux = w * u[i, j]
                else:
                    flux = w * u[i, j + 1]
                div[i, j] += flux * ihy
                div[i, j + 1] -= flux * ihy
                aw = fabs(w)
                if aw > max_w:
                    max_w = aw
                ag = fabs(grad)
                if ag > max_grad:
                    max_grad = ag
    return div_arr, max_w, max_grad


def max_face_speed(double[:, ::1] v, double K, double k, double a,
                   double hx, double hy):
    """Largest face drift speed and face gradient magnitude."""
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1]
    cdef double ihx = 1.0 / hx, ihy = 1.0 / hy
    cdef double max_w = 0.0, max_grad = 0.0
    cdef double grad, w, aw, ag
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(nx - 1):
            for j in range(ny):
                grad = (v[i + 1, j] - v[i, j]) * ihx
                if K != 0.0:
                    w = _chi(K, k, a, 0.5 * (v[i + 1, j] + v[i, j])) * grad
                else:
                    w = 0.0
                aw = fabs(w)
                if aw > max_w:
                    max_w = aw
                ag = fabs(grad)
                if ag > max_grad:
                    max_grad = ag
        for i in range(nx):
            for j in range(ny - 1):
                grad = (v[i, j + 1] - v[i, j]) * ihy
                if K != 0.0:
                    w = _chi(K, k, a, 0.5 * (v[i, j + 1] + v[i, j])) * grad
                else:
                    w = 0.0
                aw = fabs(w)
                if aw > max_w:
                    max_w = aw
                ag = fabs(grad)
                if ag > max_grad:
                    max_grad = ag
    return max_w, max_grad
