"""Out-of-sample evaluation of dispatch plans.

Two violation events coexist.  The provision form flags a fresh trajectory
when its loss exceeds the plan's per-step provision or the planned state of
charge exceeds the realized capacity; this is exactly the sampled-constraint
event the certificates bound, so coverage checks use it.  The balance form
substitutes the realized losses into the plan's stored-energy dynamics and
flags a step whose claimed storage exceeds what the realized flows leave (or
whose storage exceeds the realized capacity); it is the operational reading
reported by the experiment tables.  For equality-mode plans the two events
coincide, so certificate bounds printed next to balance rates are exact
there.  One-sided envelope plans can claim less per-step loss allowance than
their provision (selling loosens the floor), so their balance rate may
exceed the provision rate and only the provision rate is certified.

`calibration_trial` runs one end-to-end coverage check: sample a training
set, solve, count support, form the a-posteriori interval, and measure the
violation rate on an independent evaluation set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certificates import apriori_eps, posterior_eps
from .complexity import support_count_exact
from .datagen import GeneratorSpec, derive_rng, sample_scenarios
from .errors import DimensionMismatchError, DomainError
from .lp import solve_unique
from .model import (
    Decision,
    HorizonConfig,
    PriceSchedule,
    RequestSchedule,
    ScenarioSet,
    build_plm_scenario,
    decision_from_report,
)

__all__ = [
    "EVENT_KINDS",
    "violation_events",
    "violation_rate",
    "violation_profile",
    "ViolationStats",
    "empirical_violation",
    "OODReport",
    "ood_metrics",
    "CalibrationTrial",
    "calibration_trial",
]

EVENT_KINDS = ("provision", "balance")


def _step_violations(dec: Decision, scen_set: ScenarioSet,
                     requests: RequestSchedule | None, event: str) -> np.ndarray:
    if event not in EVENT_KINDS:
        raise DomainError(f"event must be one of {EVENT_KINDS}")
    if dec.n_steps != scen_set.n_steps:
        raise DimensionMismatchError("decision horizon disagrees with the scenario set")
    cap_viol = dec.b[None, :] > scen_set.capacity
    if event == "provision":
        return (scen_set.loss > dec.u[None, :]) | cap_viol
    if requests is None:
        raise DomainError("the balance event needs the request schedule")
    if requests.n_steps != dec.n_steps:
        raise DimensionMismatchError("request schedule disagrees with the decision")
    b_prev = np.concatenate([[dec.initial_soc], dec.b[:-1]])
    # Energy left at step k once the realized losses are substituted into the
    # plan's flows; claiming more storage than that breaks the balance.
    left = b_prev[None, :] + requests.values[None, :] + dec.r[None, :] - scen_set.loss
    return (dec.b[None, :] > left) | cap_viol


def violation_events(dec: Decision, scen_set: ScenarioSet,
                     requests: RequestSchedule | None = None,
                     event: str = "provision") -> np.ndarray:
    """Boolean per-scenario violation indicators."""
    return _step_violations(dec, scen_set, requests, event).any(axis=1)


def violation_rate(dec: Decision, scen_set: ScenarioSet,
                   requests: RequestSchedule | None = None,
                   event: str = "provision") -> float:
    """Fraction of scenarios on which the plan is violated."""
    return float(np.mean(violation_events(dec, scen_set, requests, event)))


def violation_profile(dec: Decision, scen_set: ScenarioSet,
                      requests: RequestSchedule | None = None,
                      event: str = "provision") -> np.ndarray:
    """Per-step violation rates (a step counts when either of its rows fails)."""
    return _step_violations(dec, scen_set, requests, event).mean(axis=0)


@dataclass(frozen=True)
class ViolationStats:
    """Violation tally of one plan on one test set.

    step_counts[k] counts the test trajectories whose step k failed; a
    trajectory failing on several steps contributes to each of them but is
    counted once in violated_count.
    """

    rate: float
    violated_count: int
    test_size: int
    step_counts: tuple

    def __post_init__(self):
        if self.test_size < 1:
            raise DomainError("test_size must be positive")
        if self.violated_count < 0 or self.violated_count > self.test_size:
            raise DomainError("violated_count must lie in [0, test_size]")
        if abs(self.rate - self.violated_count / self.test_size) > 1e-12:
            raise DomainError("rate must equal violated_count / test_size")


def empirical_violation(dec: Decision, test: ScenarioSet, requests: RequestSchedule,
                        event: str = "balance") -> ViolationStats:
    """Violation statistics of a plan on a held-out test set.

    By default a trajectory counts as violated when substituting its losses
    into the plan's stored-energy dynamics breaks the balance at some step,
    or the planned state of charge exceeds the realized capacity.  The
    certified per-step provision event is available via event="provision";
    the two coincide on equality-mode plans.
    """
    per_step = _step_violations(dec, test, requests, event)
    events = per_step.any(axis=1)
    count = int(np.sum(events))
    return ViolationStats(
        rate=count / test.n_scenarios,
        violated_count=count,
        test_size=test.n_scenarios,
        step_counts=tuple(int(c) for c in per_step.sum(axis=0)),
    )


@dataclass(frozen=True)
class OODReport:
    """Violation rates of one plan across a family of test distributions."""

    rates: tuple
    mean_rate: float
    worst_rate: float
    best_rate: float
    bound: float
    bounded: bool

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.rates:
            raise DomainError("need at least one variant rate")
        if any(not (0.0 <= r <= 1.0) for r in self.rates):
            raise DomainError("rates must lie in [0, 1]")
        if not (self.best_rate <= self.mean_rate <= self.worst_rate):
            raise DomainError("need best_rate <= mean_rate <= worst_rate")


def ood_metrics(dec: Decision, family, requests: RequestSchedule, test_size: int,
                master_seed: int, bound: float, event: str = "balance") -> OODReport:
    """Evaluate a plan against every variant of a shifted test family.

    Every variant consumes the same derived noise stream (common random
    numbers), so rate differences across variants reflect the shifts alone:
    identical variants score identical rates, and paired comparisons across
    families with shared seeds are variance-free.  The worst rate is compared
    against the supplied certificate bound with no tolerance.
    """
    if not isinstance(test_size, (int, np.integer)) or test_size < 1:
        raise DomainError("test_size must be a positive integer")
    bound = float(bound)
    rates = []
    for variant in family.variants:
        test = sample_scenarios(variant, test_size, derive_rng(master_seed, "ood-test"))
        rates.append(empirical_violation(dec, test, requests, event).rate)
    return OODReport(
        rates=tuple(rates),
        mean_rate=float(np.mean(rates)),
        worst_rate=float(np.max(rates)),
        best_rate=float(np.min(rates)),
        bound=bound,
        bounded=bool(float(np.max(rates)) <= bound),
    )


@dataclass(frozen=True)
class CalibrationTrial:
    """One coverage trial of the a-posteriori interval."""

    complexity: int
    eps_lower: float
    eps_upper: float
    eps_apriori: float
    rate: float
    contained: bool
    contained_apriori: bool
    objective: float


def calibration_trial(cfg: HorizonConfig, prices: PriceSchedule, requests: RequestSchedule,
                      spec: GeneratorSpec, n: int, delta: float, n_eval: int,
                      master_seed: int, trial: int) -> CalibrationTrial:
    """Sample, solve, certify, and check the certificate on fresh data.

    The same solved plan serves both certificates: the support count feeds
    the a-posteriori interval and the sample size feeds the a-priori level.
    The containment flags compare both to an independent violation-rate
    estimate from n_eval fresh trajectories.
    """
    if spec.n_steps != cfg.n_steps:
        raise DimensionMismatchError("generator spec horizon disagrees with the config")
    train = sample_scenarios(spec, n, derive_rng(master_seed, "calibration-train", trial))
    lp = build_plm_scenario(cfg, prices, requests, train)
    dec = decision_from_report(cfg, lp, solve_unique(lp))
    m = support_count_exact(cfg, prices, requests, train).count
    eps_lo, eps_up = posterior_eps(n, m, delta)
    eps_pri = apriori_eps(n, cfg.n_steps, delta)
    evaluation = sample_scenarios(spec, n_eval,
                                  derive_rng(master_seed, "calibration-eval", trial))
    rate = violation_rate(dec, evaluation, requests)
    return CalibrationTrial(
        complexity=m,
        eps_lower=eps_lo,
        eps_upper=eps_up,
        eps_apriori=eps_pri,
        rate=rate,
        contained=bool(eps_lo <= rate <= eps_up),
        contained_apriori=bool(rate <= eps_pri),
        objective=dec.objective,
    )
