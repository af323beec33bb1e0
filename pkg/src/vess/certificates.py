"""Finite-sample reliability certificates for sampled convex programs.

Three layers of guarantees on the violation probability of a plan computed
from N sampled constraint trajectories:

* a-priori: with plan dimension d (here 2 * n_steps effective), the chance
  that the violation probability exceeds eps is at most the binomial tail
  sum_{i<d} C(N,i) eps^i (1-eps)^{N-i}.  Requires N > d.
* a-posteriori: after solving, the observed constraint complexity m yields a
  two-sided interval [eps_lower, eps_upper] from the two positive roots of a
  polynomial in t = 1 - eps; the interval holds with confidence 1 - delta
  simultaneously over all m.
* distributionally robust: a plan robustified against perturbation hulls of
  radius budget `radius` keeps violation probability at most
  eps_upper + ambiguity / radius for every distribution within squared
  transport distance `ambiguity` of the sampling one.

All tail arithmetic runs in log space; root isolation scans for the interior
positive hump of the polynomial and bisects both flanks, which stays correct
when both roots fall on the same side of t = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError, NumericalFailureError

__all__ = [
    "AmbiguitySpec",
    "CertificateReport",
    "CERTIFICATE_METHODS",
    "apriori_delta",
    "apriori_eps",
    "posterior_bounds",
    "posterior_eps",
    "dro_bound",
    "support_dimension",
]

_BISECT_REL = 1e-13
_EPS_BISECT_TOL = 1e-14

CERTIFICATE_METHODS = ("apriori", "posteriori", "adversarial", "dro")


@dataclass(frozen=True)
class AmbiguitySpec:
    """Budget of distributional drift a robustified plan must absorb.

    mu is the squared-transport-distance radius around the sampling
    distribution; r_ell and r_beta are the per-step perturbation magnitudes
    the plan was hardened against on the loss and capacity sides.  Their sum
    is the divisor that converts drift into extra violation probability.
    """

    mu: float
    r_ell: float
    r_beta: float

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "r_ell", float(self.r_ell))
        object.__setattr__(self, "r_beta", float(self.r_beta))
        if not np.isfinite(self.mu) or self.mu < 0:
            raise DomainError("mu must be non-negative and finite")
        if not np.isfinite(self.r_ell) or self.r_ell <= 0:
            raise DomainError("r_ell must be positive and finite")
        if not np.isfinite(self.r_beta) or self.r_beta <= 0:
            raise DomainError("r_beta must be positive and finite")

    @property
    def radius(self) -> float:
        return self.r_ell + self.r_beta


@dataclass(frozen=True)
class CertificateReport:
    """One certificate evaluation: method, confidence budget, and bounds.

    The interval [eps_lower, eps_upper] always lies inside [0, 1]; when a
    distributional addend would push the upper bound past 1 it is clamped
    and the report is flagged vacuous.  Root locations are populated only
    for the complexity-based methods.
    """

    method: str
    delta: float
    eps_lower: float
    eps_upper: float
    complexity: int
    n_scenarios: int
    t_small: float | None = None
    t_large: float | None = None
    dro_addend: float | None = None
    vacuous: bool = False

    def __post_init__(self):
        if self.method not in CERTIFICATE_METHODS:
            raise DomainError(f"method must be one of {CERTIFICATE_METHODS}, got {self.method!r}")
        if not (0.0 < self.delta < 1.0):
            raise DomainError("delta must lie strictly inside (0, 1)")
        if not (0.0 <= self.eps_lower <= self.eps_upper <= 1.0):
            raise DomainError("need 0 <= eps_lower <= eps_upper <= 1")
        if self.complexity < 0 or self.n_scenarios < 0:
            raise DomainError("complexity and n_scenarios must be non-negative")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "delta": self.delta,
            "eps_lower": self.eps_lower,
            "eps_upper": self.eps_upper,
            "complexity": self.complexity,
            "n_scenarios": self.n_scenarios,
            "t_small": self.t_small,
            "t_large": self.t_large,
            "dro_addend": self.dro_addend,
            "vacuous": self.vacuous,
        }


def support_dimension(n_steps: int) -> int:
    """Effective constraint-support dimension of the dispatch plan.

    Only the per-step provision floor and SoC cap see sampled data, so at most
    2 * n_steps sampled rows can ever be of consequence.
    """
    if not isinstance(n_steps, (int, np.integer)) or n_steps < 1:
        raise DomainError("n_steps must be a positive integer")
    return 2 * int(n_steps)


def _check_n(n) -> int:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError("sample count must be a positive integer")
    return int(n)


def _check_delta(delta) -> float:
    delta = float(delta)
    if not (0.0 < delta < 1.0) or not np.isfinite(delta):
        raise DomainError("delta must lie strictly inside (0, 1)")
    return delta


def _log_binom(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def apriori_delta(n: int, n_steps: int, eps: float) -> float:
    """Confidence budget needed for violation level eps before sampling.

    Returns the binomial lower-tail sum_{i<d} C(n,i) eps^i (1-eps)^{n-i} with
    d = 2 * n_steps.  Requires n > d; otherwise the certificate is vacuous.
    """
    n = _check_n(n)
    d = support_dimension(n_steps)
    if n <= d:
        raise DomainError(f"need more than {d} samples for a non-vacuous certificate, got {n}")
    eps = float(eps)
    if not (0.0 <= eps <= 1.0):
        raise DomainError("eps must lie in [0, 1]")
    if eps == 0.0:
        return 1.0
    if eps == 1.0:
        return 0.0
    i = np.arange(d)
    log_terms = _log_binom(n, i) + i * np.log(eps) + (n - i) * np.log1p(-eps)
    return float(min(1.0, np.exp(logsumexp(log_terms))))


def apriori_eps(n: int, n_steps: int, delta: float) -> float:
    """Smallest violation level eps whose a-priori budget stays within delta."""
    n = _check_n(n)
    delta = _check_delta(delta)
    d = support_dimension(n_steps)
    if n <= d:
        raise DomainError(f"need more than {d} samples for a non-vacuous certificate, got {n}")
    lo, hi = 0.0, 1.0
    # apriori_delta is strictly decreasing in eps on (0, 1).
    for _ in range(200):
        if hi - lo <= _EPS_BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if apriori_delta(n, n_steps, mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


class _PosteriorPoly:
    """Sign evaluator for the a-posteriori root polynomial at complexity m."""

    def __init__(self, n: int, m: int, delta: float):
        self.n = n
        self.m = m
        self.log_a = _log_binom(n, m)
        i_b = np.arange(m, n, dtype=float)
        self.pow_b = i_b - m
        self.log_b = np.log(delta) - np.log(2.0 * n) + _log_binom(i_b, float(m))
        i_c = np.arange(n + 1, 4 * n + 1, dtype=float)
        self.pow_c = i_c - m
        self.log_c = np.log(delta) - np.log(6.0 * n) + _log_binom(i_c, float(m))

    def positive(self, t: float) -> bool:
        """True iff the polynomial is positive at t > 0."""
        log_t = np.log(t)
        log_a = self.log_a + (self.n - self.m) * log_t
        neg = logsumexp(np.concatenate([self.log_b + self.pow_b * log_t,
                                        self.log_c + self.pow_c * log_t]))
        return bool(log_a > neg)


def _bisect(sign_fn, lo: float, hi: float, lo_positive: bool) -> float:
    for _ in range(300):
        if hi - lo <= _BISECT_REL * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if sign_fn(mid) == lo_positive:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def posterior_bounds(n: int, complexity: int, delta: float) -> tuple[float, float, float, float]:
    """Two-sided violation bounds plus the root locations they came from.

    Returns (eps_lower, eps_upper, t_small, t_large) where the t's are the
    positive roots of the complexity polynomial (t_small taken as 0 by
    convention at full complexity m = n, where the upper bound is vacuous).
    The interval is valid simultaneously for every possible complexity with
    confidence 1 - delta.
    """
    n = _check_n(n)
    delta = _check_delta(delta)
    if not isinstance(complexity, (int, np.integer)):
        raise DomainError("complexity must be an integer")
    m = int(complexity)
    if m < 0 or m > n:
        raise DomainError(f"complexity must lie in [0, {n}], got {m}")

    t_hi = 1.0 + 6.0 * n / delta

    if m == n:
        # Single decreasing branch: 1 - (delta/6n) sum C(i,n) t^{i-n}.
        i_c = np.arange(n + 1, 4 * n + 1, dtype=float)
        log_c = np.log(delta) - np.log(6.0 * n) + _log_binom(i_c, float(n))
        pow_c = i_c - n

        def positive(t: float) -> bool:
            return bool(logsumexp(log_c + pow_c * np.log(t)) < 0.0)

        t_large = _bisect(positive, 0.0 + 1e-300, t_hi, True)
        return max(0.0, 1.0 - t_large), 1.0, 0.0, t_large

    poly = _PosteriorPoly(n, m, delta)
    # The polynomial is negative at 0+ and at t_hi with one positive hump in
    # between; locate it by geometric scan, refining once before giving up.
    for n_grid in (600, 6000):
        grid = np.geomspace(1e-10, t_hi, n_grid)
        signs = np.fromiter((poly.positive(t) for t in grid), dtype=bool, count=n_grid)
        pos_idx = np.nonzero(signs)[0]
        if pos_idx.size:
            break
    else:
        raise NumericalFailureError(
            f"no positive region found for n={n}, m={m}, delta={delta}")
    p = int(pos_idx[0])
    left_lo = 0.0 if p == 0 else float(grid[p - 1])
    t_small = _bisect(poly.positive, max(left_lo, 1e-300), float(grid[p]), False)
    after = np.nonzero(~signs[p:])[0]
    if after.size == 0:
        raise NumericalFailureError(
            f"no sign change above the hump for n={n}, m={m}, delta={delta}")
    q = p + int(after[0])
    t_large = _bisect(poly.positive, float(grid[q - 1]), float(grid[q]), True)

    eps_upper = min(1.0, max(0.0, 1.0 - t_small))
    eps_lower = min(eps_upper, max(0.0, 1.0 - t_large))
    return eps_lower, eps_upper, t_small, t_large


def posterior_eps(n: int, complexity: int, delta: float) -> tuple[float, float]:
    """Two-sided violation bounds from observed constraint complexity.

    Returns (eps_lower, eps_upper), valid simultaneously for every possible
    complexity with confidence 1 - delta.  At full complexity m = n the upper
    bound is vacuous (1.0) and only the lower bound is informative.
    """
    eps_lower, eps_upper, _, _ = posterior_bounds(n, complexity, delta)
    return eps_lower, eps_upper


def dro_bound(eps_upper: float, amb: AmbiguitySpec) -> float:
    """Violation bound under distributional ambiguity.

    A plan hardened against per-step perturbations of total magnitude
    amb.radius keeps its violation probability within
    eps_upper + amb.mu / amb.radius over every distribution within squared
    transport distance amb.mu of the sampling one, clamped at 1.
    """
    eps_upper = float(eps_upper)
    if not (0.0 <= eps_upper <= 1.0):
        raise DomainError("eps_upper must lie in [0, 1]")
    if not isinstance(amb, AmbiguitySpec):
        raise DomainError("amb must be an AmbiguitySpec")
    return min(1.0, eps_upper + amb.mu / amb.radius)
