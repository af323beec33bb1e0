"""End-to-end procedures behind the experiment tables.

Four workflows: the certificate tuning loop (grow the scenario count and the
relaxation price until the distributionally robust violation level meets a
goal), the profit-versus-risk sweep over perturbation radii, per-step
trajectory tables for a solved plan, and the distribution-shift experiment
that scores one plan across a family of perturbed generators.

The tuning loop appends fresh scenarios on growth, so the constraint set only
tightens across iterations and the trace is monotone in both the sample count
and the relaxation price.  Sweeps draw their clouds with paired noise across
radii, so monotone trends are not masked by sampling jitter.  Every CSV
emitted here carries a provenance header and is a pure function of config and
seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certificates import AmbiguitySpec, CertificateReport, dro_bound, posterior_bounds
from .complexity import adversarial_complexity
from .datagen import (GeneratorSpec, ShiftFamily, derive_rng, paired_clouds,
                      sample_cloud, sample_scenarios, shift_family)
from .errors import DomainError, ValidationError
from .evaluate import OODReport, empirical_violation, ood_metrics
from .lp import solve_unique
from .model import (Decision, HorizonConfig, PriceSchedule, RequestSchedule,
                    build_plm_adversarial, decision_from_report)
from .serialize import write_csv

__all__ = [
    "TuneConfig",
    "TuneIteration",
    "TuneResult",
    "tune",
    "SweepCell",
    "SweepTable",
    "tradeoff_sweep",
    "trajectory_report",
    "ood_experiment",
    "write_tradeoff_csv",
    "write_trajectory_csv",
    "write_ood_csv",
    "write_tune_trace_csv",
]


@dataclass(frozen=True)
class TuneConfig:
    """Knobs of the tuning loop.

    eps_goal is the target certified violation level; each iteration solves
    the hull-robustified program, certifies it, and grows the scenario count
    by n_plus and the relaxation price by rho_plus until the goal is met.
    """

    eps_goal: float
    n_init: int
    rho_init: float
    n_plus: int
    rho_plus: float
    delta: float
    amb: AmbiguitySpec
    m_points: int
    sigma: float
    max_iterations: int = 20

    def __post_init__(self):
        if not (0.0 < self.eps_goal <= 1.0):
            raise ValidationError("eps_goal must lie in (0, 1]")
        if not isinstance(self.n_init, (int, np.integer)) or self.n_init < 1:
            raise ValidationError("n_init must be a positive integer")
        if not np.isfinite(self.rho_init) or self.rho_init < 0:
            raise ValidationError("rho_init must be non-negative and finite")
        if not isinstance(self.n_plus, (int, np.integer)) or self.n_plus < 0:
            raise ValidationError("n_plus must be a non-negative integer")
        if not np.isfinite(self.rho_plus) or self.rho_plus < 0:
            raise ValidationError("rho_plus must be non-negative and finite")
        if self.n_plus == 0 and self.rho_plus == 0:
            raise ValidationError("at least one of n_plus, rho_plus must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ValidationError("delta must lie strictly inside (0, 1)")
        if not isinstance(self.amb, AmbiguitySpec):
            raise ValidationError("amb must be an AmbiguitySpec")
        if not isinstance(self.m_points, (int, np.integer)) or self.m_points < 1:
            raise ValidationError("m_points must be a positive integer")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValidationError("sigma must be non-negative and finite")
        if not isinstance(self.max_iterations, (int, np.integer)) or self.max_iterations < 1:
            raise ValidationError("max_iterations must be a positive integer")


@dataclass(frozen=True)
class TuneIteration:
    """One row of the tuning trace."""

    iteration: int
    n_scenarios: int
    rho: float
    objective: float
    complexity: int
    certificate: CertificateReport
    eps: float


@dataclass(frozen=True)
class TuneResult:
    """Outcome of the tuning loop.

    When the goal is never met within max_iterations, attained is False and
    the decision/eps fields carry the best (lowest-eps) iteration instead of
    the last one.
    """

    decision: Decision
    eps: float
    trace: tuple
    attained: bool
    n_scenarios: int
    rho: float


def _dro_certificate(n: int, complexity: int, delta: float,
                     amb: AmbiguitySpec) -> CertificateReport:
    _, eps_up, t_small, t_large = posterior_bounds(n, complexity, delta)
    addend = amb.mu / amb.radius
    return CertificateReport(
        method="dro",
        delta=delta,
        eps_lower=0.0,
        eps_upper=min(1.0, eps_up + addend),
        complexity=complexity,
        n_scenarios=n,
        t_small=t_small,
        t_large=t_large,
        dro_addend=addend,
        vacuous=bool(eps_up + addend >= 1.0),
    )


def tune(tcfg: TuneConfig, cfg: HorizonConfig, prices: PriceSchedule,
         requests: RequestSchedule, gen_spec: GeneratorSpec,
         master_seed: int) -> TuneResult:
    """Grow (N, rho) until the certified violation level meets the goal.

    Scenario growth appends fresh draws to the existing set, so each
    iteration's feasible region is contained in the previous one.  Clouds are
    redrawn per iteration to cover the appended scenarios.
    """
    scen = sample_scenarios(gen_spec, tcfg.n_init,
                            derive_rng(master_seed, "tune", "scenarios", 0))
    rho = float(tcfg.rho_init)
    trace: list[TuneIteration] = []
    best: TuneIteration | None = None
    best_dec: Decision | None = None
    for it in range(1, tcfg.max_iterations + 1):
        cloud = sample_cloud(scen, tcfg.m_points, tcfg.sigma,
                             derive_rng(master_seed, "tune", "cloud", it))
        lp = build_plm_adversarial(cfg, prices, requests, cloud, rho)
        dec = decision_from_report(cfg, lp, solve_unique(lp))
        m = adversarial_complexity(dec, cloud).count
        cert = _dro_certificate(scen.n_scenarios, m, tcfg.delta, tcfg.amb)
        row = TuneIteration(iteration=it, n_scenarios=scen.n_scenarios, rho=rho,
                            objective=dec.objective, complexity=m,
                            certificate=cert, eps=cert.eps_upper)
        trace.append(row)
        if best is None or row.eps < best.eps:
            best, best_dec = row, dec
        if row.eps <= tcfg.eps_goal:
            return TuneResult(decision=dec, eps=row.eps, trace=tuple(trace),
                              attained=True, n_scenarios=row.n_scenarios, rho=rho)
        if it < tcfg.max_iterations:
            if tcfg.n_plus:
                extra = sample_scenarios(gen_spec, tcfg.n_plus,
                                         derive_rng(master_seed, "tune", "scenarios", it))
                scen = scen.extend(extra)
            rho += tcfg.rho_plus
    return TuneResult(decision=best_dec, eps=best.eps, trace=tuple(trace),
                      attained=False, n_scenarios=best.n_scenarios, rho=best.rho)


@dataclass(frozen=True)
class SweepCell:
    """One (radius, sample count) cell of the trade-off sweep."""

    radius: float
    n_scenarios: int
    rho: float
    objective: float
    violation: float
    eps_upper: float
    complexity: int

    def __post_init__(self):
        for name in ("violation", "eps_upper"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1]")

    @property
    def profit(self) -> float:
        return -self.objective


@dataclass(frozen=True)
class SweepTable:
    """Rectangular grid of sweep cells, radius-major within each sample count."""

    radii: tuple
    n_values: tuple
    cells: tuple

    def __post_init__(self):
        if len(self.cells) != len(self.radii) * len(self.n_values):
            raise ValidationError("sweep table is not a complete grid")

    def cell(self, radius: float, n: int) -> SweepCell:
        for c in self.cells:
            if c.radius == radius and c.n_scenarios == n:
                return c
        raise DomainError(f"no sweep cell at radius={radius}, n={n}")


def tradeoff_sweep(cfg: HorizonConfig, prices: PriceSchedule,
                   requests: RequestSchedule, gen_spec: GeneratorSpec,
                   radii, n_values, *, rho: float, delta: float, m_points: int,
                   test_size: int, master_seed: int,
                   event: str = "balance") -> SweepTable:
    """Profit-versus-risk sweep over perturbation radii and sample counts.

    The cloud radius is tied to the sweep radius (sigma = R); all radii at a
    given sample count share one noise draw, and every cell is scored on one
    held-out test set, so the monotone trade-off direction is visible without
    averaging over seeds.
    """
    radii = tuple(float(r) for r in radii)
    n_values = tuple(int(n) for n in n_values)
    if not radii or not n_values:
        raise ValidationError("radius and sample-count grids must be non-empty")
    if any(r <= 0 or not np.isfinite(r) for r in radii):
        raise ValidationError("sweep radii must be positive and finite")
    if any(n < 1 for n in n_values):
        raise ValidationError("sample counts must be positive")
    if test_size < 1:
        raise ValidationError("test_size must be positive")
    test = sample_scenarios(gen_spec, test_size,
                            derive_rng(master_seed, "sweep", "test"))
    cells: list[SweepCell] = []
    for n in n_values:
        train = sample_scenarios(gen_spec, n,
                                 derive_rng(master_seed, "sweep", "train", n))
        clouds = paired_clouds(train, m_points, radii,
                               derive_rng(master_seed, "sweep", "cloud", n))
        for radius, cloud in zip(radii, clouds):
            lp = build_plm_adversarial(cfg, prices, requests, cloud, rho)
            dec = decision_from_report(cfg, lp, solve_unique(lp))
            m = adversarial_complexity(dec, cloud).count
            _, eps_up, _, _ = posterior_bounds(n, m, delta)
            stats = empirical_violation(dec, test, requests, event=event)
            cells.append(SweepCell(radius=radius, n_scenarios=n, rho=rho,
                                   objective=dec.objective, violation=stats.rate,
                                   eps_upper=eps_up, complexity=m))
    return SweepTable(radii=radii, n_values=n_values, cells=tuple(cells))


def trajectory_report(dec: Decision) -> tuple:
    """Per-step rows (k, b_k, r_k, u_k) with 1-based step numbering."""
    return tuple((k + 1, float(dec.b[k]), float(dec.r[k]), float(dec.u[k]))
                 for k in range(dec.n_steps))


def ood_experiment(dec: Decision, nominal: GeneratorSpec,
                   requests: RequestSchedule, amb: AmbiguitySpec,
                   eps_upper: float, *, n_variants: int, test_size: int,
                   master_seed: int, event: str = "balance") -> OODReport:
    """Score one plan across a family of perturbed generators.

    The family is drawn within the ambiguity budget amb.mu (a zero budget
    yields copies of the nominal generator), and the worst observed rate is
    compared against the distributionally robust bound built from eps_upper.
    """
    if n_variants < 1:
        raise ValidationError("n_variants must be positive")
    if amb.mu == 0.0:
        family = ShiftFamily(nominal=nominal, variants=(nominal,) * n_variants,
                             distances=(0.0,) * n_variants, mu=0.0)
    else:
        family = shift_family(nominal, n_variants, amb.mu, master_seed)
    bound = dro_bound(eps_upper, amb)
    return ood_metrics(dec, family, requests, test_size, master_seed, bound,
                       event=event)


def write_tradeoff_csv(path, table: SweepTable, prov: dict | None = None) -> None:
    """Figure CSV: one (R, N, profit, violation) row per sweep cell."""
    rows = [(c.radius, c.n_scenarios, c.profit, c.violation) for c in table.cells]
    write_csv(path, ("R", "N", "profit", "violation"), rows, prov)


def write_trajectory_csv(path, dec: Decision, prov: dict | None = None) -> None:
    """Figure CSV: one (k, b, r, u) row per step."""
    write_csv(path, ("k", "b", "r", "u"), trajectory_report(dec), prov)


def _variant_labels(n: int) -> list:
    width = max(2, len(str(n - 1)))
    return [f"shift-{i:0{width}d}" for i in range(n)]


def write_ood_csv(path, report: OODReport, prov: dict | None = None) -> None:
    """Figure CSV: one (variant, rate) row per shift, then the bound row."""
    rows = list(zip(_variant_labels(len(report.rates)), report.rates))
    rows.append(("bound", report.bound))
    write_csv(path, ("variant", "rate"), rows, prov)


def write_tune_trace_csv(path, trace, prov: dict | None = None) -> None:
    """Tuning-loop trace: one row per iteration with its certified level."""
    rows = [(row.iteration, row.n_scenarios, row.rho, row.objective,
             row.complexity, row.eps) for row in trace]
    write_csv(path, ("iteration", "N", "rho", "objective", "complexity", "eps"),
              rows, prov)
