"""Constraint-complexity counting for sampled dispatch programs.

Three notions feed the a-posteriori certificates:

* support count (unrelaxed scenario program): the number of samples whose
  removal changes the tie-broken optimal plan, found by leave-one-out
  resolves.  At a unique optimum a sample with every row slack cannot be of
  support, so candidates are screened to the samples with at least one active
  row before resolving; `screen=False` forces the full sweep.
* relaxed complexity: for a solved penalty-relaxed program, the number of
  samples that are active or violated: positive slack xi_i, a provision row
  at or above the plan's provision, or a cap row at or below the plan's SoC.
* adversarial complexity: the same count for the hull-robustified program,
  where a sample counts if any of its hull points is active or violated.

Counts are reported with per-sample reason codes so certificates can be
audited back to the rows that produced them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, DomainError
from .lp import solve_unique
from .model import (
    Decision,
    HorizonConfig,
    PerturbationCloud,
    PriceSchedule,
    RequestSchedule,
    ScenarioSet,
    build_plm_scenario,
    decision_from_report,
)

__all__ = [
    "ComplexityReport",
    "support_count_exact",
    "relaxed_complexity",
    "adversarial_complexity",
]

_ACTIVE_TOL = 1e-6
_SOL_TOL = 1e-6
_SCREEN_TOL = 1e-5


@dataclass(frozen=True)
class ComplexityReport:
    """A complexity count with the contributing samples and their reasons."""

    count: int
    indices: tuple[int, ...]
    reasons: dict[int, str] = field(default_factory=dict)
    degenerate_suspected: bool = False


def _plan_vector(dec: Decision) -> np.ndarray:
    return np.concatenate([dec.r, dec.b, dec.u])


def _active_rows(dec: Decision, loss: np.ndarray, capacity: np.ndarray, tol: float):
    """Per-sample masks of active-or-violated provision and cap rows."""
    prov = loss >= dec.u - tol * (1.0 + np.abs(loss))
    cap = capacity <= dec.b + tol * (1.0 + np.abs(capacity))
    # Reduce over every axis except the sample one.
    axes = tuple(range(1, loss.ndim))
    return prov.any(axis=axes), cap.any(axis=axes)


def support_count_exact(cfg: HorizonConfig, prices: PriceSchedule, requests: RequestSchedule,
                        scen_set: ScenarioSet, aux_losses: bool = True,
                        sol_tol: float = _SOL_TOL, screen: bool = True) -> ComplexityReport:
    """Leave-one-out support count of the unrelaxed scenario program.

    A sample is of support when resolving without it moves the tie-broken
    plan (r, b, u) by more than sol_tol in any coordinate.  A change caused
    by a sample whose rows were all strictly slack indicates a degenerate
    (non-unique) optimum and sets degenerate_suspected.
    """
    n = scen_set.n_scenarios
    if n < 2:
        raise DomainError("support counting needs at least two scenarios")
    lp0 = build_plm_scenario(cfg, prices, requests, scen_set, aux_losses)
    dec0 = decision_from_report(cfg, lp0, solve_unique(lp0))
    plan0 = _plan_vector(dec0)

    prov_act, cap_act = _active_rows(dec0, scen_set.loss, scen_set.capacity, _SCREEN_TOL)
    candidates = np.nonzero(prov_act | cap_act)[0] if screen else np.arange(n)

    indices = []
    reasons: dict[int, str] = {}
    degenerate = False
    for i in candidates:
        reduced = scen_set.without(int(i))
        lp_i = build_plm_scenario(cfg, prices, requests, reduced, aux_losses)
        dec_i = decision_from_report(cfg, lp_i, solve_unique(lp_i))
        if float(np.max(np.abs(_plan_vector(dec_i) - plan0))) > sol_tol:
            indices.append(int(i))
            reasons[int(i)] = "removed-changes-solution"
            if not (prov_act[i] or cap_act[i]):
                degenerate = True
    if len(indices) > 2 * cfg.n_steps:
        degenerate = True
    return ComplexityReport(len(indices), tuple(indices), reasons, degenerate)


def _active_or_violated(dec: Decision, loss: np.ndarray, capacity: np.ndarray,
                        n: int, tol: float, prov_reason: str, cap_reason: str) -> ComplexityReport:
    if dec.xi is None or dec.xi.shape != (n,):
        raise DimensionMismatchError("decision slacks disagree with the sample count")
    xi_act = dec.xi > tol
    prov_act, cap_act = _active_rows(dec, loss, capacity, tol)
    counted = xi_act | prov_act | cap_act
    indices = tuple(int(i) for i in np.nonzero(counted)[0])
    reasons = {}
    for i in indices:
        if xi_act[i]:
            reasons[i] = "slack"
        elif prov_act[i]:
            reasons[i] = prov_reason
        else:
            reasons[i] = cap_reason
    return ComplexityReport(len(indices), indices, reasons)


def relaxed_complexity(dec: Decision, scen_set: ScenarioSet,
                       tol: float = _ACTIVE_TOL) -> ComplexityReport:
    """Active-or-violated sample count for a solved relaxed program."""
    if dec.n_steps != scen_set.n_steps:
        raise DimensionMismatchError("decision horizon disagrees with the scenario set")
    return _active_or_violated(dec, scen_set.loss, scen_set.capacity,
                               scen_set.n_scenarios, tol, "provision", "cap")


def adversarial_complexity(dec: Decision, cloud: PerturbationCloud,
                           tol: float = _ACTIVE_TOL) -> ComplexityReport:
    """Active-or-violated sample count for a solved hull-robustified program.

    A sample counts when any of its hull points activates or violates a row.
    """
    if dec.n_steps != cloud.n_steps:
        raise DimensionMismatchError("decision horizon disagrees with the cloud")
    return _active_or_violated(dec, cloud.loss, cloud.capacity,
                               cloud.n_scenarios, tol, "hull-provision", "hull-cap")
