"""Closed-form budget and pull-count bounds used as referees for measured runs.

Integer-input bounds are returned as exact :class:`fractions.Fraction` values.
Quantities involving logarithms are floats; compare them with ``FLOAT_TOL``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .core import DomainError, Envelope, envelope_inverse

FLOAT_TOL = 1e-9


class DegenerateParameterError(DomainError):
    pass


def ceil_log(n: int, eta: int) -> int:
    """ceil(log_eta n) for integers, exactly."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    k, p = 0, 1
    while p < n:
        p *= eta
        k += 1
    return k


@dataclass(frozen=True)
class InstanceSpec:
    nus: Tuple[float, ...]
    envelope: Envelope
    eta: int
    R: int
    eps: float
    s: int = 0
    n_old: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nus", tuple(sorted(float(v) for v in self.nus)))
        if self.eps <= 0:
            raise DomainError(f"eps must be > 0, got {self.eps}")
        if self.n_old > len(self.nus):
            raise DomainError("more previously promoted arms than arms")

    @property
    def n(self) -> int:
        return len(self.nus)


@dataclass
class BoundReport:
    z_id_sh: Optional[float] = None
    z_id_sh_bracket: Optional[float] = None
    eid_fraction_raw: Optional[Fraction] = None
    eid_fraction_clamped: Optional[Fraction] = None
    pdid_fraction_raw: Optional[Fraction] = None
    pdid_fraction_clamped: Optional[Fraction] = None
    thm3_min_R_terms: Optional[Tuple[float, float]] = None
    gamma_bar_inv: Optional[float] = None
    sample_size: Optional[int] = None
    notes: list = field(default_factory=list)


def _arm_term(i: int, gap: float, eps: float, env: Envelope, R: int) -> int:
    """i * (1 + min{R, gamma^-1(max{eps/4, gap/2})}) for the i-th best arm (1-based)."""
    return i * (1 + envelope_inverse(env, max(eps / 4, gap / 2), R))


def hardness(nus: Sequence[float], env: Envelope, eps: float, R: int) -> int:
    """max over i = 2..n of the per-arm term; 0 when there is a single arm."""
    nus = sorted(nus)
    return max((_arm_term(i, nus[i - 1] - nus[0], eps, env, R) for i in range(2, len(nus) + 1)), default=0)


def z_id_sh(spec: InstanceSpec) -> int:
    """Budget sufficient for any ID halving variant to return an eps/2-optimal arm."""
    if spec.n < 2:
        raise DomainError("the budget bound needs at least two arms")
    return spec.eta * ceil_log(spec.n, spec.eta) * hardness(spec.nus, spec.envelope, spec.eps, spec.R)


def z_id_sh_bracket(spec: InstanceSpec, s_max: int, s: int) -> int:
    """Same bound with the round count of a Hyperband bracket, ceil(log_eta n_s)."""
    n_s = -(-(s_max + 1) * spec.eta**s // (s + 1))
    return spec.eta * ceil_log(n_s, spec.eta) * hardness(spec.nus, spec.envelope, spec.eps, spec.R)


def _clamp(x: Fraction) -> Fraction:
    return min(Fraction(1), max(Fraction(0), x))


def _sh_denominator(n: int, s: int, R: int, eta: int) -> int:
    return (s + 1) * (n * R + eta**s) * (eta - 1) - (eta ** (s + 1) - 1) * (R + n)


def _check(n, n_old, s, R, eta):
    if eta < 2:
        raise DomainError(f"eta must be >= 2, got {eta}")
    if not 0 <= n_old <= n:
        raise DomainError(f"need 0 <= n_old <= n, got n_old={n_old}, n={n}")
    if s < 0 or R < 1:
        raise DomainError("need s >= 0 and R >= 1")


def eid_pull_bound(n: int, n_old: int, s: int, R: int, eta: int) -> Tuple[Fraction, Fraction]:
    """Upper bound on pulls(eID halving) / pulls(halving from scratch): ``(raw, clamped)``."""
    _check(n, n_old, s, R, eta)
    den = _sh_denominator(n, s, R, eta)
    if den == 0:
        raise DegenerateParameterError(f"zero denominator for n={n}, s={s}, R={R}, eta={eta}")
    num = (s + 1) * (n_old * R + eta**s) * (eta - 1) - (eta ** (s + 1) - 1) * (2 * R + n)
    raw = 1 - Fraction(num, den)
    return raw, _clamp(raw)


def pdid_pull_bound(n: int, n_old: int, s: int, R: int, eta: int) -> Tuple[Fraction, Fraction]:
    """Worst-case ratio for the preserving and discarding variants: ``(raw, clamped)``."""
    _check(n, n_old, s, R, eta)
    den = _sh_denominator(n, s, R, eta)
    if den == 0:
        raise DegenerateParameterError(f"zero denominator for n={n}, s={s}, R={R}, eta={eta}")
    num = (eta - 1) * ((s + 1) * eta**s + R * n_old) - (eta ** (s + 1) - 1) * (R + n)
    raw = 1 - Fraction(num, den)
    return raw, _clamp(raw)


def sh_pull_lower_bound(n: int, s: int, R: int, eta: int) -> Fraction:
    """Lower bound on the total pulls of halving ``n`` arms over ``s+1`` rounds up to level ``R``."""
    _check(n, 0, s, R, eta)
    return Fraction(_sh_denominator(n, s, R, eta), eta**s * (eta - 1))


def sample_size_for_confidence(alpha: float, delta: float) -> int:
    """Smallest sample size holding an eps-optimal arm with probability >= 1 - delta.

    That is ``ceil(log_{1-alpha} delta)``, found as the least ``k`` with
    ``(1-alpha)**k <= delta`` so that exact powers are not lost to rounding.
    """
    if not 0 < alpha < 1 or not 0 < delta < 1:
        raise DomainError(f"alpha and delta must lie in (0, 1), got {alpha}, {delta}")
    k = max(1, math.ceil(math.log(delta) / math.log(1 - alpha) - FLOAT_TOL))
    while (1 - alpha) ** k > delta * (1 + FLOAT_TOL):
        k += 1
    while k > 1 and (1 - alpha) ** (k - 1) <= delta * (1 + FLOAT_TOL):
        k -= 1
    return k


def thm3_budget_factor(R: int, eta: int) -> float:
    """eta * (log log R + 4 + S/2 - log((S+1)!)/(S+1)) with logs base eta and S = floor(log R)."""
    if R < eta:
        raise DomainError(
            f"R={R} < eta={eta}: log_eta(log_eta R) is undefined below one full halving round"
        )
    S = 0
    while eta ** (S + 1) <= R:
        S += 1
    log_eta = lambda x: math.log(x) / math.log(eta)
    log_fact = math.lgamma(S + 2) / math.log(eta)
    return eta * (log_eta(log_eta(R)) + 4 + S / 2 - log_fact / (S + 1))


def gamma_bar_inverse(bracket_nus: Sequence[Sequence[float]], env: Envelope, eps: float, R: int) -> int:
    return max((hardness(nus, env, eps, R) for nus in bracket_nus), default=0)


def thm3_condition(
    eta: int,
    R: int,
    alpha: float,
    delta: float,
    bracket_nus: Sequence[Sequence[float]],
    envelope: Envelope,
    eps: float,
) -> Tuple[bool, BoundReport]:
    """Check whether ``R`` dominates both branches of the Hyperband-level sufficient condition."""
    k = sample_size_for_confidence(alpha, delta)
    sampling = k * (eta - 1) + 1
    gbar = gamma_bar_inverse(bracket_nus, envelope, eps, R)
    budget = thm3_budget_factor(R, eta) * gbar
    holds = R + FLOAT_TOL >= sampling and R + FLOAT_TOL >= budget
    report = BoundReport(thm3_min_R_terms=(float(sampling), budget), gamma_bar_inv=float(gbar), sample_size=k)
    if not holds:
        report.notes.append("guarantee not applicable: R below the sufficient condition")
    return holds, report


def binomial_margin(p: float, trials: int, z: float = 1.959963984540054) -> float:
    """Half-width of a two-sided 95% normal-approximation interval for a proportion."""
    return z * math.sqrt(p * (1 - p) / trials)
