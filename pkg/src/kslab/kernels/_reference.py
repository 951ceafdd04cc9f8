"""Pure-NumPy reference kernels.

Semantics match ``_core`` (the compiled extension) exactly: fields are
C-contiguous float64 arrays of shape (nx, ny) with ny = 1 for 1D grids,
and all boundary faces carry zero flux (mirror ghosts).
"""

import numpy as np

SCHEME_UPWIND = 0
SCHEME_CENTRAL = 1


def _dxx(f):
    d = np.diff(f, axis=0)
    out = np.zeros_like(f)
    out[:-1] += d
    out[1:] -= d
    return out


def _dyy(f):
    d = np.diff(f, axis=1)
    out = np.zeros_like(f)
    out[:, :-1] += d
    out[:, 1:] -= d
    return out


def laplacian(f, hx, hy):
    """Five-point (three-point in 1D) Neumann Laplacian in flux form."""
    return _dxx(f) * (1.0 / (hx * hx)) + _dyy(f) * (1.0 / (hy * hy))


def helmholtz_apply(x, alpha, cx, cy):
    """alpha * x - cx * Dxx(x) - cy * Dyy(x) with mirror ghosts."""
    return alpha * x - cx * _dxx(x) - cy * _dyy(x)


def cg_solve(b, x0, alpha, cx, cy, rel_tol=1e-10, max_iter=100_000):
    """Conjugate gradients for (alpha I - cx Dxx - cy Dyy) x = b.

    Returns ``(x, iters, relres)``; ``iters`` is -1 when the relative
    residual did not reach ``rel_tol`` within ``max_iter``.
    """
    b_norm = float(np.sqrt(np.sum(b * b)))
    if b_norm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = x0.copy()
    r = b - helmholtz_apply(x, alpha, cx, cy)
    rs = float(np.sum(r * r))
    if np.sqrt(rs) <= rel_tol * b_norm:
        return x, 0, float(np.sqrt(rs)) / b_norm
    p = r.copy()
    for it in range(1, max_iter + 1):
        Ap = helmholtz_apply(p, alpha, cx, cy)
        denom = float(np.sum(p * Ap))
        step = rs / denom
        x += step * p
        r -= step * Ap
        rs_new = float(np.sum(r * r))
        if np.sqrt(rs_new) <= rel_tol * b_norm:
            return x, it, float(np.sqrt(rs_new)) / b_norm
        p *= rs_new / rs
        p += r
        rs = rs_new
    return x, -1, float(np.sqrt(rs)) / b_norm


def _chi_faces(K, k, a, vf):
    if K == 0.0:
        return np.zeros_like(vf)
    return K / (a + vf) ** k


def upwind_flux_divergence(u, v, K, k, a, hx, hy, scheme=SCHEME_UPWIND):
    """Divergence of the drift flux u * chi(v) grad(v), plus face maxima.

    Returns ``(div, max_w, max_grad)`` where ``max_w`` is the largest face
    speed magnitude and ``max_grad`` the largest face gradient of v.
    Boundary faces carry zero flux.
    """
    div = np.zeros_like(u)
    max_w = 0.0
    max_grad = 0.0

    gx = (v[1:] - v[:-1]) / hx
    if gx.size:
        wx = _chi_faces(K, k, a, 0.5 * (v[1:] + v[:-1])) * gx
        if scheme == SCHEME_CENTRAL:
            fx = wx * 0.5 * (u[:-1] + u[1:])
        else:
            fx = wx * np.where(wx > 0.0, u[:-1], u[1:])
        div[:-1] += fx / hx
        div[1:] -= fx / hx
        max_w = max(max_w, float(np.max(np.abs(wx))))
        max_grad = max(max_grad, float(np.max(np.abs(gx))))

    gy = (v[:, 1:] - v[:, :-1]) / hy
    if gy.size:
        wy = _chi_faces(K, k, a, 0.5 * (v[:, 1:] + v[:, :-1])) * gy
        if scheme == SCHEME_CENTRAL:
            fy = wy * 0.5 * (u[:, :-1] + u[:, 1:])
        else:
            fy = wy * np.where(wy > 0.0, u[:, :-1], u[:, 1:])
        div[:, :-1] += fy / hy
        div[:, 1:] -= fy / hy
        max_w = max(max_w, float(np.max(np.abs(wy))))
        max_grad = max(max_grad, float(np.max(np.abs(gy))))

    return div, max_w, max_grad


def max_face_speed(v, K, k, a, hx, hy):
    """Largest face drift speed and face gradient without forming fluxes."""
    max_w = 0.0
    max_grad = 0.0
    gx = (v[1:] - v[:-1]) / hx
    if gx.size:
        wx = _chi_faces(K, k, a, 0.5 * (v[1:] + v[:-1])) * gx
        max_w = max(max_w, float(np.max(np.abs(wx))))
        max_grad = max(max_grad, float(np.max(np.abs(gx))))
    gy = (v[:, 1:] - v[:, :-1]) / hy
    if gy.size:
        wy = _chi_faces(K, k, a, 0.5 * (v[:, 1:] + v[:, :-1])) * gy
        max_w = max(max_w, float(np.max(np.abs(wy))))
        max_grad = max(max_grad, float(np.max(np.abs(gy))))
    return max_w, max_grad
