"""Closed-form evaluation of the sensitivity bound chi(s) = K/(a+s)^k and
of the weight machinery built on it.

``g`` is the integral weight exponent, ``phi = exp(g)`` the resulting test
weight, ``H_eps`` the quadratic-in-r coefficient function whose sign decides
whether the weighted density functional is dissipative, and ``F_phi`` the
intermediate that collapses to ``H_eps * phi`` when the sensitivity sits
exactly on its bound.

All functions accept scalars or NumPy arrays for ``s`` and broadcast.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "SensitivityParams",
    "EnergyParams",
    "chi_upper",
    "g",
    "phi",
    "F_phi",
    "H_eps",
]

# relative slack on the s >= eta guard, covers float round-off at the boundary
_ETA_SLACK = 1e-12


@dataclass(frozen=True)
class SensitivityParams:
    """Bound parameters (K, k, a) for chi(s) <= K/(a+s)^k.

    K = 0 is accepted and means "no chemotaxis" (chi identically zero);
    a = 0 is the singular case, where evaluation is restricted to s > 0.
    """

    K: float
    k: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        if not self.K >= 0.0:
            raise ValidationError(f"K must be >= 0, got {self.K}")
        if not self.k >= 1.0:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if not self.a >= 0.0:
            raise ValidationError(f"a must be >= 0, got {self.a}")


@dataclass(frozen=True)
class EnergyParams:
    """Exponent/weight tuple (p, r, eps, eta) for the weighted functional.

    r = 0 is accepted and turns the weight off (phi identically one).
    """

    p: float
    r: float
    eps: float
    eta: float

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValidationError(f"p must be > 1, got {self.p}")
        if not self.r >= 0.0:
            raise ValidationError(f"r must be >= 0, got {self.r}")
        if not 0.0 <= self.eps < 1.0:
            raise ValidationError(f"eps must lie in [0, 1), got {self.eps}")
        if not self.eta > 0.0:
            raise ValidationError(f"eta must be > 0, got {self.eta}")


def _check_floor(s, floor, what):
    if np.any(np.asarray(s) < floor * (1.0 - _ETA_SLACK) - _ETA_SLACK):
        raise DomainError(f"{what} requires s >= {floor}")


def chi_upper(s, sp: SensitivityParams):
    """Evaluate the bound K/(a+s)^k. Singular at s = 0 when a = 0."""
    s = np.asarray(s, dtype=float)
    base = sp.a + s
    if np.any(base <= 0.0):
        raise DomainError("chi_upper requires a + s > 0 (singular at s = 0 when a = 0)")
    out = sp.K / base**sp.k
    return float(out) if out.ndim == 0 else out


def g(s, ep: EnergyParams, sp: SensitivityParams):
    """Weight exponent -r * integral_eta^s (a+tau)^(-k) dtau, in closed form."""
    _check_floor(s, ep.eta, "g")
    s = np.asarray(s, dtype=float)
    if sp.k == 1.0:
        out = -ep.r * np.log((sp.a + s) / (sp.a + ep.eta))
    else:
        km1 = sp.k - 1.0
        out = -ep.r / km1 * ((sp.a + ep.eta) ** -km1 - (sp.a + s) ** -km1)
    return float(out) if out.ndim == 0 else out


def g_prime(s, ep: EnergyParams, sp: SensitivityParams):
    """First derivative of g: -r/(a+s)^k."""
    s = np.asarray(s, dtype=float)
    out = -ep.r / (sp.a + s) ** sp.k
    return float(out) if out.ndim == 0 else out


def g_second(s, ep: EnergyParams, sp: SensitivityParams):
    """Second derivative of g: r*k/(a+s)^(k+1)."""
    s = np.asarray(s, dtype=float)
    out = ep.r * sp.k / (sp.a + s) ** (sp.k + 1.0)
    return float(out) if out.ndim == 0 else out


def phi(s, ep: EnergyParams, sp: SensitivityParams):
    """Test weight exp(g(s)); equals 1 at s = eta and is nonincreasing.

    For k > 1 it is bounded below by C_phi = exp(-r / ((k-1)(a+eta)^(k-1)));
    for k = 1 it decays to zero like (a+s)^(-r).
    """
    out = np.exp(g(s, ep, sp))
    return float(out) if np.ndim(out) == 0 else out


def phi_floor(ep: EnergyParams, sp: SensitivityParams) -> float:
    """Infimum of phi on [eta, inf): C_phi for k > 1, zero for k = 1."""
    if sp.k == 1.0:
        return 0.0
    return float(np.exp(-ep.r / ((sp.k - 1.0) * (sp.a + ep.eta) ** (sp.k - 1.0))))


def H_eps(s, ep: EnergyParams, sp: SensitivityParams):
    """Quadratic-in-r coefficient function; nonpositivity on [eta, inf)
    closes the dissipation estimate.

    The formula does not involve eta, so s is only required to satisfy
    a + s > 0.
    """
    s = np.asarray(s, dtype=float)
    base = sp.a + s
    if np.any(base <= 0.0):
        raise DomainError("H_eps requires a + s > 0")
    p, r, eps = ep.p, ep.r, ep.eps
    K, k = sp.K, sp.k
    b2k = base ** (2.0 * k)
    out = (
        (eps * p + 1.0 - eps) * r**2 / ((1.0 - eps) * (p - 1.0) * b2k)
        + eps * p * K * r / ((1.0 - eps) * b2k)
        - k * r / base ** (k + 1.0)
        + p * (p - 1.0) * K**2 / (4.0 * (1.0 - eps) * b2k)
    )
    return float(out) if out.ndim == 0 else out


def H_eps_scale(s, ep: EnergyParams, sp: SensitivityParams):
    """Sum of the absolute values of the four terms of H_eps.

    Used as the local magnitude against which "H_eps <= 0 up to round-off"
    is judged.
    """
    s = np.asarray(s, dtype=float)
    base = sp.a + s
    p, r, eps = ep.p, ep.r, ep.eps
    K, k = sp.K, sp.k
    b2k = base ** (2.0 * k)
    out = (
        (eps * p + 1.0 - eps) * r**2 / ((1.0 - eps) * (p - 1.0) * b2k)
        + eps * p * K * r / ((1.0 - eps) * b2k)
        + k * r / base ** (k + 1.0)
        + p * (p - 1.0) * K**2 / (4.0 * (1.0 - eps) * b2k)
    )
    return float(out) if out.ndim == 0 else out


def F_phi(s, ep: EnergyParams, sp: SensitivityParams, chi_exact):
    """Dissipation intermediate evaluated with an explicit sensitivity value.

    ``chi_exact`` is the sensitivity chi(s) itself (scalar or array,
    broadcast against s). With chi_exact equal to the bound chi_upper this
    equals H_eps(s) * phi(s) exactly; any chi_exact <= chi_upper keeps it
    below that product.
    """
    _check_floor(s, ep.eta, "F_phi")
    s = np.asarray(s, dtype=float)
    chi = np.asarray(chi_exact, dtype=float)
    p, eps = ep.p, ep.eps
    gp = g_prime(s, ep, sp)
    gpp = g_second(s, ep, sp)
    core = (
        -gpp
        - eps / (1.0 - eps) * p * gp * chi
        + p * (p - 1.0) / (4.0 * (1.0 - eps)) * chi**2
        + (eps * p + 1.0 - eps) * gp**2 / ((1.0 - eps) * (p - 1.0))
    )
    out = core * phi(s, ep, sp)
    return float(out) if np.ndim(out) == 0 else out
