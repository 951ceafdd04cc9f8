"""Admissibility engine: compute the signal lower bound eta, evaluate the
smallness condition on K, and produce certified parameter selections.

For k > 1 the selection is a triple (p, eps, r0) making H_eps nonpositive on
[eta, inf); for k = 1 it is an exponent p with its admissible weight interval
I_p plus the bootstrap ladder of (p_i, r_i, q_i) triples that lifts integral
control of the density above n/2.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import AdmissibilityError, DomainError, ValidationError
from .numutil import adaptive_simpson, golden_section_max
from .sensitivity import (
    EnergyParams,
    SensitivityParams,
    H_eps,
    H_eps_scale,
)

__all__ = [
    "EtaEstimate",
    "LadderRung",
    "Ladder",
    "SelectionKGt1",
    "SelectionK1",
    "AdmissibilityCertificate",
    "heat_kernel_tail",
    "compute_eta",
    "threshold_K",
    "select_p_eps",
    "r0",
    "discriminant_Dr",
    "interval_Ip",
    "smoothing_admissible",
    "build_ladder",
    "gn_exponent",
    "c_const",
    "certify",
]

# fraction of the way toward the upper endpoint for open-interval selections
_OPEN_INTERVAL_FRAC = 0.9


@dataclass(frozen=True)
class EtaEstimate:
    """Computed lower bound for the signal, with provenance."""

    eta: float
    mode: str  # "convex-explicit" or "general-c0"
    tau_star: float
    c0: Optional[float] = None
    diam: Optional[float] = None
    n: Optional[int] = None


@dataclass(frozen=True)
class LadderRung:
    p: float
    r: float
    q: float


@dataclass(frozen=True)
class Ladder:
    rungs: Tuple[LadderRung, ...]
    terminal_p: float

    def __len__(self):
        return len(self.rungs)


@dataclass(frozen=True)
class SelectionKGt1:
    p: float
    eps: float
    r0: float


@dataclass(frozen=True)
class SelectionK1:
    p: float
    r: float
    I_p: Tuple[float, float]
    ladder: Optional[Ladder]  # None when n < 2 (outside theorem scope)


@dataclass(frozen=True)
class AdmissibilityCertificate:
    sp: SensitivityParams
    n: int
    eta: float
    threshold: float
    margin: float
    admissible: bool
    branch: str  # "k=1" or "k>1"
    selection: object = None  # SelectionKGt1 | SelectionK1 | None
    verified_s_samples: int = 0
    eta_estimate: Optional[EtaEstimate] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def to_json_dict(self) -> dict:
        """Flat JSON document with stable field names."""
        doc = {
            "k": self.sp.k,
            "a": self.sp.a,
            "K": self.sp.K,
            "n": self.n,
            "eta": self.eta,
            "threshold": self.threshold,
            "margin": self.margin,
            "branch": self.branch,
            "admissible": self.admissible,
            "p": None,
            "eps": None,
            "r0": None,
            "I_p": None,
            "ladder": [],
            "terminal_p": None,
            "verified_s_samples": self.verified_s_samples,
            "notes": list(self.notes),
        }
        sel = self.selection
        if isinstance(sel, SelectionKGt1):
            doc.update(p=sel.p, eps=sel.eps, r0=sel.r0)
        elif isinstance(sel, SelectionK1):
            doc.update(p=sel.p, eps=0.0, r0=sel.r, I_p=list(sel.I_p))
            if sel.ladder is not None:
                doc["ladder"] = [
                    {"p": r.p, "r": r.r, "q": r.q} for r in sel.ladder.rungs
                ]
                doc["terminal_p"] = sel.ladder.terminal_p
        return doc


def heat_kernel_tail(tau: float, n: int, diam: float, rel_tol: float = 1e-8) -> float:
    """Integral over (0, tau] of (4 pi r)^(-n/2) * exp(-(r + diam^2/(4 r))).

    The integrand vanishes superexponentially as r -> 0+, so the left
    endpoint is treated as zero. Evaluated in log space to avoid overflow
    of the r^(-n/2) prefactor at tiny r.
    """
    if tau < 0.0 or diam <= 0.0 or n < 1:
        raise ValidationError("heat_kernel_tail requires tau >= 0, diam > 0, n >= 1")
    if tau == 0.0:
        return 0.0
    half_n = 0.5 * n
    quarter_d2 = 0.25 * diam * diam

    def integrand(r: float) -> float:
        if r <= 0.0:
            return 0.0
        logv = -half_n * math.log(4.0 * math.pi * r) - r - quarter_d2 / r
        return math.exp(logv) if logv > -745.0 else 0.0

    return adaptive_simpson(integrand, 0.0, tau, rel_tol=rel_tol, depth_cap=40)


def compute_eta(
    v0_min: float,
    u0_mass: float,
    *,
    c0: Optional[float] = None,
    diam: Optional[float] = None,
    n: Optional[int] = None,
    tau_tol: float = 1e-10,
) -> EtaEstimate:
    """Best lower bound sup_tau min(decaying branch, replenishing branch).

    General mode (``c0`` given): the branches are exp(-2 tau) * v0_min and
    c0 * u0_mass * (1 - exp(-tau)). Convex mode (``diam`` and ``n`` given):
    exp(-tau) * v0_min and u0_mass * heat_kernel_tail(tau).

    The first branch decreases and the second increases from zero, so the
    min is unimodal; the maximizer is bracketed and located by
    golden-section search with absolute tolerance ``tau_tol`` in tau.
    """
    if not v0_min > 0.0:
        raise ValidationError("v0_min must be > 0 (positive initial signal required)")
    if not u0_mass > 0.0:
        raise ValidationError("u0_mass must be > 0")
    general = c0 is not None
    convex = diam is not None or n is not None
    if general == convex:
        raise ValidationError("pass exactly one of c0 (general mode) or diam+n (convex mode)")
    if general:
        if not c0 > 0.0:
            raise ValidationError("c0 must be > 0")

        def first(tau):
            return math.exp(-2.0 * tau) * v0_min

        def second(tau):
            return c0 * u0_mass * -math.expm1(-tau)

    else:
        if diam is None or n is None:
            raise ValidationError("convex mode requires both diam and n")

        def first(tau):
            return math.exp(-tau) * v0_min

        def second(tau):
            return u0_mass * heat_kernel_tail(tau, n, diam)

    def branch_min(tau):
        return min(first(tau), second(tau))

    # expand until the increasing branch overtakes the decaying one
    hi = 1.0
    while second(hi) < first(hi) and hi < 1500.0:
        hi *= 2.0
    tau_star, eta = golden_section_max(branch_min, 0.0, hi, abs_tol=tau_tol)
    if not eta > 0.0:
        raise AdmissibilityError("eta search collapsed to zero; check inputs")
    return EtaEstimate(
        eta=eta,
        mode="general-c0" if general else "convex-explicit",
        tau_star=tau_star,
        c0=c0,
        diam=diam,
        n=n,
    )


def threshold_K(k: float, a: float, eta: float, n: int) -> float:
    """Critical sensitivity amplitude k * (a+eta)^(k-1) * sqrt(2/n)."""
    if not (k >= 1.0 and a >= 0.0 and eta > 0.0 and n >= 1):
        raise ValidationError("threshold_K requires k >= 1, a >= 0, eta > 0, n >= 1")
    return k * (a + eta) ** (k - 1.0) * math.sqrt(2.0 / n)


def _selection_rhs(p: float, eps: float, sp: SensitivityParams, eta: float) -> float:
    """Right side of the strict (p, eps) selection inequality for k > 1."""
    return (
        (1.0 - eps)
        * sp.k
        * (sp.a + eta) ** (sp.k - 1.0)
        / (eps * p + math.sqrt(p * (eps * p + 1.0 - eps)))
    )


def select_p_eps(
    sp: SensitivityParams, n: int, eta: float, max_halvings: int = 40
) -> Tuple[float, float]:
    """Grid search for (p, eps) with p > n/2, eps in (0,1) and
    K < (1-eps) k (a+eta)^(k-1) / (eps p + sqrt(p (eps p + 1 - eps))).

    p = n/2 + delta sweeps delta over {1, 1/2, 1/4, ...}; for each p, eps
    sweeps downward from 1/2 by halving. The first admissible pair is
    returned (the right side increases monotonically as either parameter
    decreases, so this is the maximal-slack pair among those tested).
    """
    if not sp.k > 1.0:
        raise ValidationError("select_p_eps applies to the k > 1 branch only")
    thr = threshold_K(sp.k, sp.a, eta, n)
    if not sp.K < thr:
        raise AdmissibilityError(
            f"K={sp.K} is not strictly below the threshold {thr}; no pair exists"
        )
    for j in range(max_halvings + 1):
        p = 0.5 * n + 2.0**-j
        for m in range(1, max_halvings + 1):
            eps = 2.0**-m
            if sp.K < _selection_rhs(p, eps, sp, eta):
                return p, eps
    raise AdmissibilityError(
        "no admissible (p, eps) on the halving grid; K is too close to the threshold"
    )


def r0(p: float, eps: float, K: float) -> float:
    """Canonical weight (p-1) K^2 / 2 * sqrt(p / (eps p + 1 - eps))."""
    if not (p > 1.0 and 0.0 <= eps < 1.0 and K >= 0.0):
        raise ValidationError("r0 requires p > 1, eps in [0,1), K >= 0")
    return 0.5 * (p - 1.0) * K * K * math.sqrt(p / (eps * p + 1.0 - eps))


def discriminant_Dr(s, p: float, eps: float, sp: SensitivityParams):
    """Discriminant of the r-quadratic of H_eps, for the k > 1 branch."""
    s = np.asarray(s, dtype=float)
    base = sp.a + s
    inner = (
        eps * p * sp.K / (1.0 - eps) - sp.k * base ** (sp.k - 1.0)
    ) ** 2 - p * (eps * p + 1.0 - eps) * sp.K**2 / (1.0 - eps) ** 2
    out = inner / base ** (4.0 * sp.k)
    return float(out) if out.ndim == 0 else out


def interval_Ip(p: float, K: float) -> Tuple[float, float]:
    """Open interval of admissible weights r for the k = 1 branch.

    Nonempty (positive width) for p K^2 < 1; degenerates to a point at
    p K^2 = 1; raises for p K^2 > 1.
    """
    if not p > 1.0:
        raise ValidationError("interval_Ip requires p > 1")
    disc = 1.0 - p * K * K
    if disc < 0.0:
        raise AdmissibilityError(f"interval I_p is empty: p={p} exceeds 1/K^2={1.0 / K**2}")
    root = math.sqrt(disc)
    half = 0.5 * (p - 1.0)
    return half * (1.0 - root), half * (1.0 + root)


def smoothing_admissible(theta: float, mu: float, n: int) -> bool:
    """True iff (n/2) (1/theta - 1/mu) < 1 (heat-semigroup exponent gate).

    ``theta`` and ``mu`` may be math.inf.
    """
    if not (theta >= 1.0 and mu >= 1.0):
        raise ValidationError("smoothing_admissible requires theta, mu >= 1")
    inv_theta = 0.0 if math.isinf(theta) else 1.0 / theta
    inv_mu = 0.0 if math.isinf(mu) else 1.0 / mu
    return 0.5 * n * (inv_theta - inv_mu) < 1.0


def _pick(lo: float, hi: float) -> float:
    """Deterministic choice inside an open interval: 90% toward the top."""
    return lo + _OPEN_INTERVAL_FRAC * (hi - lo)


def build_ladder(n: int, K: float, max_rungs: int = 64) -> Ladder:
    """Bootstrap ladder of (p_i, r_i, q_i) for the k = 1 branch.

    Each rung takes r_i = (p_i - 1)/2 (the center of I_{p_i}) and picks
    q_i and the next p inside their open windows at 90% toward the upper
    endpoint; the terminal rung restricts q to (n/2, upper) so that both
    terminal exponents exceed n/2. Every rung is re-verified: p > r,
    r < n/2, r strictly inside I_p, p - r >= 1, and the smoothing gate
    against the previous rung's q. Violations raise rather than guess.
    """
    if n < 2:
        raise ValidationError("build_ladder requires n >= 2")
    if not 0.0 <= K < math.sqrt(2.0 / n):
        raise AdmissibilityError(f"build_ladder requires K < sqrt(2/n) = {math.sqrt(2.0 / n)}")
    inv_K2 = math.inf if K == 0.0 else 1.0 / (K * K)
    half_n = 0.5 * n

    growth_cap = (n + 2.0) / (n - 2.0) if n > 2 else math.inf
    p = _pick(1.0, min(inv_K2, n + 1.0, growth_cap))
    prev_q = 1.0  # mass conservation seeds the chain with L^1 control
    rungs = []
    for _ in range(max_rungs):
        r = 0.5 * (p - 1.0)
        mu = p - r
        lo_ip, hi_ip = interval_Ip(p, K)
        checks = [
            (p > r, f"p={p} <= r={r}"),
            (r < half_n, f"r={r} >= n/2"),
            (lo_ip < r < hi_ip, f"r={r} not strictly inside I_p=({lo_ip}, {hi_ip})"),
            (mu >= 1.0, f"p - r = {mu} < 1"),
            (
                smoothing_admissible(prev_q, mu, n),
                f"smoothing gate fails: (n/2)(1/{prev_q} - 1/{mu}) >= 1",
            ),
        ]
        for ok, msg in checks:
            if not ok:
                raise AdmissibilityError(f"ladder rung recheck failed: {msg}")
        terminal = p > half_n
        q_lo = 2.0 * p / (p + 1.0)
        q_hi = min(p, n * mu / (n - 2.0 * r))
        if terminal:
            # the terminal q must itself exceed n/2
            q_lo = max(q_lo, half_n)
            p_next = None
        else:
            growth = p * (n + 2.0) / (n - 2.0 * p)
            p_next = _pick(p, min(inv_K2, n + 1.0, growth))
            if not p_next > p:
                raise AdmissibilityError(f"ladder stalled at p={p}")
            # this rung's q must pass the smoothing gate against the next
            # rung's p - r, which requires q > 1/(2/n + 2/(p_next + 1))
            q_lo = max(q_lo, 1.0 / (2.0 / n + 2.0 / (p_next + 1.0)))
        if not q_lo < q_hi:
            raise AdmissibilityError(
                f"ladder q-window empty at p={p}: ({q_lo}, {q_hi})"
            )
        q = _pick(q_lo, q_hi)
        rungs.append(LadderRung(p=p, r=r, q=q))
        if terminal:
            return Ladder(rungs=tuple(rungs), terminal_p=p)
        prev_q = q
        p = p_next
    raise AdmissibilityError(f"ladder did not terminate within {max_rungs} rungs")


def gn_exponent(p: float, n: int) -> float:
    """Interpolation exponent (2n/p - n/2) / (2n/p + 1 - n/2).

    Its reciprocal is the absorption power in the k > 1 estimate.
    """
    if not (p >= 1.0 and n >= 2):
        raise ValidationError("gn_exponent requires p >= 1, n >= 2")
    num = 2.0 * n / p - 0.5 * n
    den = num + 1.0
    if den == 0.0:
        raise DomainError(f"gn_exponent denominator vanishes at p={p}, n={n}")
    return num / den


def c_const(sp: SensitivityParams, r: float, eta: float) -> float:
    """Growth constant r * sup_{s >= eta} s/(a+s)^k.

    For k = 1 the sup is 1. For k > 1 the sup sits at s = a/(k-1) when that
    exceeds eta, otherwise at s = eta.
    """
    if sp.k == 1.0:
        return r
    s_star = sp.a / (sp.k - 1.0)
    s_at = s_star if s_star > eta else eta
    return r * s_at / (sp.a + s_at) ** sp.k


def _verification_samples(eta: float, count: int) -> np.ndarray:
    return np.geomspace(eta, eta * 1e6 + 1e6, count)


def _verify_H_nonpositive(ep: EnergyParams, sp: SensitivityParams, samples: np.ndarray, tol: float):
    values = H_eps(samples, ep, sp)
    scales = H_eps_scale(samples, ep, sp)
    bad = values > tol * np.maximum(scales, 1e-300)
    if np.any(bad):
        worst = int(np.argmax(values / np.maximum(scales, 1e-300)))
        raise AdmissibilityError(
            f"H_eps verification failed at s={samples[worst]}: "
            f"value {values[worst]} vs scale {scales[worst]}"
        )


def certify(
    sp: SensitivityParams,
    n: int,
    eta,
    *,
    samples: int = 10_000,
    tol: float = 1e-12,
) -> AdmissibilityCertificate:
    """Bundle the admissibility condition with a verified parameter selection.

    ``eta`` may be a float or an :class:`EtaEstimate`. A non-admissible
    parameter set (margin <= 0) yields a certificate with no selection
    rather than an error.
    """
    eta_estimate = eta if isinstance(eta, EtaEstimate) else None
    eta_val = eta.eta if eta_estimate is not None else float(eta)
    threshold = threshold_K(sp.k, sp.a, eta_val, n)
    margin = threshold - sp.K
    branch = "k=1" if sp.k == 1.0 else "k>1"
    notes = []
    if n < 2:
        notes.append("outside theorem scope (condition requires n >= 2)")
    if sp.K == 0.0:
        notes.append("trivially admissible (K=0)")
    if not margin > 0.0:
        notes.append("exploratory: outside boundedness hypotheses (margin <= 0)")
        return AdmissibilityCertificate(
            sp=sp,
            n=n,
            eta=eta_val,
            threshold=threshold,
            margin=margin,
            admissible=False,
            branch=branch,
            selection=None,
            verified_s_samples=0,
            eta_estimate=eta_estimate,
            notes=tuple(notes),
        )

    svals = _verification_samples(eta_val, samples)
    if sp.k > 1.0:
        p, eps = select_p_eps(sp, n, eta_val)
        r_sel = r0(p, eps, sp.K)
        ep = EnergyParams(p=p, r=r_sel, eps=eps, eta=eta_val)
        _verify_H_nonpositive(ep, sp, svals, tol)
        # sign structure: H*(a+s)^(2k) is decreasing in s for k > 1, so
        # nonpositivity at s = eta settles the whole tail analytically
        head = float(H_eps(eta_val, ep, sp))
        if head > tol * max(H_eps_scale(eta_val, ep, sp), 1e-300):
            raise AdmissibilityError("H_eps positive at s = eta; selection invalid")
        selection = SelectionKGt1(p=p, eps=eps, r0=r_sel)
    else:
        inv_K2 = math.inf if sp.K == 0.0 else 1.0 / (sp.K * sp.K)
        lo = max(1.0, 0.5 * n)
        p = lo + 1.0 if math.isinf(inv_K2) else 0.5 * (lo + inv_K2)
        ip = interval_Ip(p, sp.K)
        r_sel = 0.5 * (ip[0] + ip[1])
        ladder = build_ladder(n, sp.K) if n >= 2 else None
        ep = EnergyParams(p=p, r=r_sel, eps=0.0, eta=eta_val)
        _verify_H_nonpositive(ep, sp, svals, tol)
        # for k = 1 the sign of H_0 is carried entirely by the r-quadratic,
        # uniformly in s
        poly = r_sel**2 / (p - 1.0) - r_sel + 0.25 * p * (p - 1.0) * sp.K**2
        if poly > tol * max(abs(poly), 1.0):
            raise AdmissibilityError("r-quadratic positive at the I_p midpoint")
        selection = SelectionK1(p=p, r=r_sel, I_p=ip, ladder=ladder)

    return AdmissibilityCertificate(
        sp=sp,
        n=n,
        eta=eta_val,
        threshold=threshold,
        margin=margin,
        admissible=True,
        branch=branch,
        selection=selection,
        verified_s_samples=samples,
        eta_estimate=eta_estimate,
        notes=tuple(notes),
    )
