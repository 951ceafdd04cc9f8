"""Small scalar numerics: adaptive Simpson quadrature and golden-section
maximization of a unimodal function on a bracket."""

import math

from .errors import QuadratureError

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


def _simpson(fa, fm, fb, a, b):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive_step(f, a, m, b, fa, fm, fb, whole, rel_tol, abs_floor, depth, depth_cap):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(fa, flm, fm, a, m)
    right = _simpson(fm, frm, fb, m, b)
    delta = left + right - whole
    # 15 = (2^4 - 1) Richardson factor for Simpson's rule
    if abs(delta) <= 15.0 * max(rel_tol * abs(left + right), abs_floor):
        return left + right + delta / 15.0
    if depth >= depth_cap:
        raise QuadratureError(
            f"adaptive Simpson exceeded depth cap {depth_cap} on [{a}, {b}]"
        )
    return _adaptive_step(
        f, a, lm, m, fa, flm, fm, left, rel_tol, abs_floor / 2.0, depth + 1, depth_cap
    ) + _adaptive_step(
        f, m, rm, b, fm, frm, fb, right, rel_tol, abs_floor / 2.0, depth + 1, depth_cap
    )


def adaptive_simpson(f, a, b, rel_tol=1e-8, depth_cap=40, abs_floor=1e-300):
    """Integrate ``f`` on [a, b] by adaptive Simpson refinement.

    ``rel_tol`` is applied to each panel against its own magnitude;
    ``abs_floor`` stops refinement of panels that are negligibly small.
    Raises :class:`QuadratureError` when the depth cap is exceeded.
    """
    if b <= a:
        return 0.0
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = _simpson(fa, fm, fb, a, b)
    return _adaptive_step(f, a, m, b, fa, fm, fb, whole, rel_tol, abs_floor, 0, depth_cap)


def golden_section_max(f, lo, hi, abs_tol=1e-10):
    """Locate the maximizer of a unimodal ``f`` on [lo, hi].

    Returns ``(x_star, f(x_star))`` with ``x_star`` resolved to ``abs_tol``.
    """
    if hi <= lo:
        return lo, f(lo)
    a, b = lo, hi
    dist = b - a
    c = a + _INV_PHI_SQ * dist
    d = a + _INV_PHI * dist
    fc = f(c)
    fd = f(d)
    while dist > abs_tol:
        dist *= _INV_PHI
        if fc > fd:
            b, d, fd = d, c, fc
            c = a + _INV_PHI_SQ * dist
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * dist
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)
