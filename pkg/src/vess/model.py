"""Domain types and LP builders for virtual-storage dispatch scheduling.

A parking lot is operated as one aggregate storage unit over a discrete
horizon of n_steps slots.  The operator commits a trading plan r (buy > 0,
sell < 0, |r| <= rate_cap), a planned state-of-charge trajectory b, and a
per-step worst-loss provision u covering the energy that departing vehicles
remove.  Uncertain per-step data are the loss trajectory and the available
aggregate capacity; both enter either as fixed values (deterministic and
box-robust programs), as sampled trajectories (scenario programs, with an
optional per-sample relaxation), or as per-sample perturbation clouds whose
convex hulls the plan must respect (adversarial program).

Two balance conventions are supported.  "envelope" keeps the one-sided
planning form b_k >= b_{k-1} + q_k + r_k - u_k; "equality" pins the
trajectory to the dynamics exactly, which is the physically meaningful
dispatch variant.  Two objective conventions are supported: "arbitrage"
prices purchases at the buy tariff and credits sales at the sell tariff;
"printed" charges the buy tariff on both sides (the symmetric-cost form).

Every sampled constraint row in a built LP is tagged with its originating
sample index (and hull-point index where applicable) so complexity counting
can be audited against the row set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .lp import HULL, SAMPLE, STRUCTURAL, LinearProgram, SolveReport

__all__ = [
    "HorizonConfig",
    "PriceSchedule",
    "RequestSchedule",
    "Scenario",
    "ScenarioSet",
    "BoxSupport",
    "PerturbationCloud",
    "Decision",
    "VarLayout",
    "BALANCE_MODES",
    "OBJECTIVE_MODES",
    "build_plm_base",
    "build_plm_robust",
    "build_plm_scenario",
    "build_plm_relaxed",
    "build_plm_adversarial",
    "objective_value",
    "decision_from_report",
]

BALANCE_MODES = ("envelope", "equality")
OBJECTIVE_MODES = ("arbitrage", "printed")

_DECISION_TOL = 1e-6


def _as_steps(name: str, x, n_steps: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != (n_steps,):
        raise DimensionMismatchError(f"{name} must have length {n_steps}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class HorizonConfig:
    """Horizon length, initial state of charge, trading rate cap, and modes."""

    n_steps: int
    initial_soc: float = 0.0
    rate_cap: float = 1.0
    balance_mode: str = "envelope"
    objective_mode: str = "arbitrage"

    def __post_init__(self):
        if not isinstance(self.n_steps, (int, np.integer)) or self.n_steps < 1:
            raise ValidationError("n_steps must be a positive integer")
        if not np.isfinite(self.rate_cap) or self.rate_cap <= 0:
            raise ValidationError("rate_cap must be positive and finite")
        if not np.isfinite(self.initial_soc) or self.initial_soc < 0:
            raise ValidationError("initial_soc must be non-negative and finite")
        if self.balance_mode not in BALANCE_MODES:
            raise ValidationError(f"balance_mode must be one of {BALANCE_MODES}")
        if self.objective_mode not in OBJECTIVE_MODES:
            raise ValidationError(f"objective_mode must be one of {OBJECTIVE_MODES}")


@dataclass(frozen=True)
class PriceSchedule:
    """Per-step buy and sell tariffs; buy_k >= sell_k >= 0."""

    buy: np.ndarray
    sell: np.ndarray

    def __post_init__(self):
        buy = np.asarray(self.buy, dtype=float)
        sell = np.asarray(self.sell, dtype=float)
        if buy.ndim != 1 or buy.shape != sell.shape:
            raise DimensionMismatchError("buy and sell must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(buy)) and np.all(np.isfinite(sell))):
            raise ValidationError("prices contain non-finite entries")
        if np.any(sell < 0) or np.any(buy < sell):
            raise ValidationError("prices must satisfy buy_k >= sell_k >= 0 at every step")
        object.__setattr__(self, "buy", buy)
        object.__setattr__(self, "sell", sell)

    @property
    def n_steps(self) -> int:
        return self.buy.shape[0]


@dataclass(frozen=True)
class RequestSchedule:
    """Signed per-step net energy requests from contracted prosumers."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise DimensionMismatchError("request values must be a 1-D array")
        if not np.all(np.isfinite(v)):
            raise ValidationError("request values contain non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Scenario:
    """One sampled trajectory of per-step losses and available capacity."""

    loss: np.ndarray
    capacity: np.ndarray

    def __post_init__(self):
        loss = np.asarray(self.loss, dtype=float)
        capacity = np.asarray(self.capacity, dtype=float)
        if loss.ndim != 1 or loss.shape != capacity.shape:
            raise DimensionMismatchError("loss and capacity must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(loss)) and np.all(np.isfinite(capacity))):
            raise ValidationError("scenario contains non-finite entries")
        if np.any(loss < 0) or np.any(capacity < 0):
            raise ValidationError("scenario loss and capacity must be non-negative")
        object.__setattr__(self, "loss", loss)
        object.__setattr__(self, "capacity", capacity)

    @property
    def n_steps(self) -> int:
        return self.loss.shape[0]


class ScenarioSet:
    """A batch of sampled trajectories stored as (n, n_steps) arrays."""

    def __init__(self, loss, capacity):
        loss = np.asarray(loss, dtype=float)
        capacity = np.asarray(capacity, dtype=float)
        if loss.ndim != 2 or loss.shape != capacity.shape:
            raise DimensionMismatchError("loss and capacity must be (n, n_steps) arrays of equal shape")
        if loss.shape[0] < 1:
            raise ValidationError("a scenario set needs at least one scenario")
        if not (np.all(np.isfinite(loss)) and np.all(np.isfinite(capacity))):
            raise ValidationError("scenario set contains non-finite entries")
        if np.any(loss < 0) or np.any(capacity < 0):
            raise ValidationError("scenario set loss and capacity must be non-negative")
        self.loss = loss
        self.capacity = capacity

    @classmethod
    def from_scenarios(cls, scenarios) -> "ScenarioSet":
        scenarios = list(scenarios)
        return cls(np.stack([s.loss for s in scenarios]),
                   np.stack([s.capacity for s in scenarios]))

    @property
    def n_scenarios(self) -> int:
        return self.loss.shape[0]

    @property
    def n_steps(self) -> int:
        return self.loss.shape[1]

    def scenario(self, i: int) -> Scenario:
        return Scenario(self.loss[i], self.capacity[i])

    def subset(self, indices) -> "ScenarioSet":
        idx = np.asarray(indices, dtype=np.int64)
        return ScenarioSet(self.loss[idx], self.capacity[idx])

    def without(self, i: int) -> "ScenarioSet":
        keep = np.concatenate([np.arange(0, i), np.arange(i + 1, self.n_scenarios)])
        return self.subset(keep)

    def extend(self, other: "ScenarioSet") -> "ScenarioSet":
        if other.n_steps != self.n_steps:
            raise DimensionMismatchError("cannot extend with a different horizon length")
        return ScenarioSet(np.vstack([self.loss, other.loss]),
                           np.vstack([self.capacity, other.capacity]))


@dataclass(frozen=True)
class BoxSupport:
    """Axis-aligned uncertainty box: per-step worst loss and worst capacity."""

    loss_max: np.ndarray
    capacity_min: np.ndarray

    def __post_init__(self):
        loss_max = np.asarray(self.loss_max, dtype=float)
        capacity_min = np.asarray(self.capacity_min, dtype=float)
        if loss_max.ndim != 1 or loss_max.shape != capacity_min.shape:
            raise DimensionMismatchError("loss_max and capacity_min must be 1-D of equal length")
        if np.any(loss_max < 0) or np.any(capacity_min < 0):
            raise ValidationError("box support entries must be non-negative")
        if not (np.all(np.isfinite(loss_max)) and np.all(np.isfinite(capacity_min))):
            raise ValidationError("box support contains non-finite entries")
        object.__setattr__(self, "loss_max", loss_max)
        object.__setattr__(self, "capacity_min", capacity_min)

    @property
    def n_steps(self) -> int:
        return self.loss_max.shape[0]


class PerturbationCloud:
    """Per-sample clouds of perturbed copies; the plan must cover each hull.

    loss and capacity have shape (n, m_points, n_steps).  For affine
    constraints, robustness over a convex hull is equivalent to robustness at
    the hull's generating points, so the builders emit one row per point.
    """

    def __init__(self, base: ScenarioSet, loss, capacity, sigma: float):
        loss = np.asarray(loss, dtype=float)
        capacity = np.asarray(capacity, dtype=float)
        if loss.ndim != 3 or loss.shape != capacity.shape:
            raise DimensionMismatchError("cloud arrays must be (n, m, n_steps) of equal shape")
        if loss.shape[0] != base.n_scenarios or loss.shape[2] != base.n_steps:
            raise DimensionMismatchError("cloud shape disagrees with its base scenario set")
        if loss.shape[1] < 1:
            raise ValidationError("cloud needs at least one point per sample")
        if np.any(loss < 0) or np.any(capacity < 0):
            raise ValidationError("cloud entries must be non-negative")
        if not (np.isfinite(sigma) and sigma >= 0):
            raise ValidationError("sigma must be non-negative and finite")
        self.base = base
        self.loss = loss
        self.capacity = capacity
        self.sigma = float(sigma)

    @property
    def n_scenarios(self) -> int:
        return self.loss.shape[0]

    @property
    def n_points(self) -> int:
        return self.loss.shape[1]

    @property
    def n_steps(self) -> int:
        return self.loss.shape[2]


@dataclass(frozen=True)
class Decision:
    """An optimal plan: trades r, planned SoC b, loss provision u, slacks xi."""

    r: np.ndarray
    b: np.ndarray
    u: np.ndarray
    xi: np.ndarray | None
    objective: float
    initial_soc: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        b = np.asarray(self.b, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if r.ndim != 1 or r.shape != b.shape or r.shape != u.shape:
            raise DimensionMismatchError("r, b, u must be 1-D arrays of equal length")
        if np.any(b < -_DECISION_TOL):
            raise ValidationError("planned SoC must be non-negative")
        if np.any(u < -_DECISION_TOL):
            raise ValidationError("loss provision must be non-negative")
        xi = self.xi
        if xi is not None:
            xi = np.asarray(xi, dtype=float)
            if xi.ndim != 1:
                raise DimensionMismatchError("xi must be a 1-D array")
            if np.any(xi < -_DECISION_TOL):
                raise ValidationError("relaxation slacks must be non-negative")
        if not np.isfinite(self.objective):
            raise ValidationError("objective must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "xi", xi)

    @property
    def n_steps(self) -> int:
        return self.r.shape[0]


@dataclass(frozen=True)
class VarLayout:
    """Column layout of a built LP: [r+ | r- | b | u | xi]."""

    n_steps: int
    n_xi: int

    @property
    def n_var(self) -> int:
        return 4 * self.n_steps + self.n_xi

    def rp(self, k):
        return k

    def rm(self, k):
        return self.n_steps + k

    def b(self, k):
        return 2 * self.n_steps + k

    def u(self, k):
        return 3 * self.n_steps + k

    def xi(self, i):
        return 4 * self.n_steps + i


def _check_horizon(cfg: HorizonConfig, prices: PriceSchedule, requests: RequestSchedule):
    if prices.n_steps != cfg.n_steps:
        raise DimensionMismatchError("price schedule length disagrees with the horizon")
    if requests.n_steps != cfg.n_steps:
        raise DimensionMismatchError("request schedule length disagrees with the horizon")


def _scaffold(cfg: HorizonConfig, prices: PriceSchedule, n_xi: int, rho: float,
              u_fixed: np.ndarray | None) -> LinearProgram:
    k_n = cfg.n_steps
    lay = VarLayout(k_n, n_xi)
    n = lay.n_var
    c = np.zeros(n)
    c[:k_n] = prices.buy
    c[k_n:2 * k_n] = prices.buy if cfg.objective_mode == "printed" else -prices.sell
    if n_xi:
        c[4 * k_n:] = rho
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    upper[:2 * k_n] = cfg.rate_cap
    if u_fixed is not None:
        lower[3 * k_n:4 * k_n] = u_fixed
        upper[3 * k_n:4 * k_n] = u_fixed
    names = ([f"rp_{k}" for k in range(k_n)] + [f"rm_{k}" for k in range(k_n)]
             + [f"b_{k}" for k in range(k_n)] + [f"u_{k}" for k in range(k_n)]
             + [f"xi_{i}" for i in range(n_xi)])
    lp = LinearProgram(n, c, lower, upper, names)
    lp.layout = lay
    return lp


def _balance_coefs(lay: VarLayout, k: int):
    """Columns/values of b_k - b_{k-1} - r_k + u_k for one step (b_{-1} folded to rhs)."""
    if k == 0:
        return [lay.b(0), lay.rp(0), lay.rm(0), lay.u(0)], [1.0, -1.0, 1.0, 1.0]
    return ([lay.b(k), lay.b(k - 1), lay.rp(k), lay.rm(k), lay.u(k)],
            [1.0, -1.0, -1.0, 1.0, 1.0])


def _add_balance(lp: LinearProgram, cfg: HorizonConfig, requests: RequestSchedule,
                 relax_n: int | None) -> None:
    """Dynamics rows.

    Envelope mode emits one-sided rows; with relax_n set they are replicated
    per sample and carry that sample's slack column.  Equality mode emits hard
    equality rows; the relaxation never touches them (slack buys only cap
    headroom there, never phantom trades).
    """
    lay = lp.layout
    k_n = cfg.n_steps
    rhs0 = requests.values.copy()
    rhs0[0] += cfg.initial_soc
    if cfg.balance_mode == "equality":
        for k in range(k_n):
            cols, vals = _balance_coefs(lay, k)
            lp.add_row(cols, vals, "==", rhs0[k], STRUCTURAL, "balance", step=k)
        return
    if relax_n is None:
        for k in range(k_n):
            cols, vals = _balance_coefs(lay, k)
            lp.add_row(cols, vals, ">=", rhs0[k], STRUCTURAL, "balance", step=k)
        return
    width = 6
    m = relax_n * k_n
    cols = np.full((m, width), -1, dtype=np.int64)
    vals = np.zeros((m, width))
    rhs = np.empty(m)
    sample = np.repeat(np.arange(relax_n), k_n)
    step = np.tile(np.arange(k_n), relax_n)
    for k in range(k_n):
        ccols, cvals = _balance_coefs(lay, k)
        rows = step == k
        cols[rows, :len(ccols)] = ccols
        vals[rows, :len(cvals)] = cvals
        rhs[rows] = rhs0[k]
    cols[np.arange(m), 5] = lay.xi(sample)
    vals[np.arange(m), 5] = 1.0
    lp.add_rows(cols, vals, ">=", rhs, SAMPLE, "balance_relaxed", sample=sample, step=step)


def _add_provision_rows(lp: LinearProgram, loss: np.ndarray, kind: str) -> None:
    """u_k >= loss rows, one per (sample[, hull point], step)."""
    lay = lp.layout
    k_n = lay.n_steps
    if loss.ndim == 2:
        n = loss.shape[0]
        sample = np.repeat(np.arange(n), k_n)
        hull = None
        flat = loss.reshape(-1)
    else:
        n, m_pts = loss.shape[0], loss.shape[1]
        sample = np.repeat(np.arange(n), m_pts * k_n)
        hull = np.tile(np.repeat(np.arange(m_pts), k_n), n)
        flat = loss.reshape(-1)
    step = np.tile(np.arange(k_n), flat.shape[0] // k_n)
    cols = lay.u(step).reshape(-1, 1)
    vals = np.ones_like(cols, dtype=float)
    lp.add_rows(cols, vals, ">=", flat, kind, "provision", sample=sample, hull=hull, step=step)


def _add_cap_rows(lp: LinearProgram, capacity: np.ndarray, kind: str, relaxed: bool) -> None:
    """b_k <= capacity (+ xi_i when relaxed) rows per (sample[, hull], step)."""
    lay = lp.layout
    k_n = lay.n_steps
    if capacity.ndim == 1:
        step = np.arange(k_n)
        cols = lay.b(step).reshape(-1, 1)
        vals = np.ones_like(cols, dtype=float)
        lp.add_rows(cols, vals, "<=", capacity, STRUCTURAL, "cap", step=step)
        return
    if capacity.ndim == 2:
        n = capacity.shape[0]
        sample = np.repeat(np.arange(n), k_n)
        hull = None
    else:
        n, m_pts = capacity.shape[0], capacity.shape[1]
        sample = np.repeat(np.arange(n), m_pts * k_n)
        hull = np.tile(np.repeat(np.arange(m_pts), k_n), n)
    flat = capacity.reshape(-1)
    step = np.tile(np.arange(k_n), flat.shape[0] // k_n)
    if relaxed:
        cols = np.column_stack([lay.b(step), lay.xi(sample)])
        vals = np.column_stack([np.ones_like(flat), -np.ones_like(flat)])
    else:
        cols = lay.b(step).reshape(-1, 1)
        vals = np.ones_like(cols, dtype=float)
    lp.add_rows(cols, vals, "<=", flat, kind, "cap", sample=sample, hull=hull, step=step)


def build_plm_base(cfg: HorizonConfig, prices: PriceSchedule, requests: RequestSchedule,
                   scenario: Scenario) -> LinearProgram:
    """Deterministic dispatch with known data.

    Uses equality dynamics regardless of cfg.balance_mode (the deterministic
    schedule is the exact trajectory), with the loss provision pinned to the
    known losses and structural capacity rows.
    """
    _check_horizon(cfg, prices, requests)
    if scenario.n_steps != cfg.n_steps:
        raise DimensionMismatchError("scenario length disagrees with the horizon")
    lp = _scaffold(cfg, prices, 0, 0.0, u_fixed=scenario.loss)
    eq_cfg = cfg if cfg.balance_mode == "equality" else \
        HorizonConfig(cfg.n_steps, cfg.initial_soc, cfg.rate_cap, "equality", cfg.objective_mode)
    _add_balance(lp, eq_cfg, requests, None)
    _add_cap_rows(lp, scenario.capacity, STRUCTURAL, relaxed=False)
    return lp


def build_plm_robust(cfg: HorizonConfig, prices: PriceSchedule, requests: RequestSchedule,
                     box: BoxSupport) -> LinearProgram:
    """Box-robust dispatch: worst loss and worst capacity from the support box."""
    _check_horizon(cfg, prices, requests)
    if box.n_steps != cfg.n_steps:
        raise DimensionMismatchError("box support length disagrees with the horizon")
    lp = _scaffold(cfg, prices, 0, 0.0, u_fixed=box.loss_max)
    _add_balance(lp, cfg, requests, None)
    _add_cap_rows(lp, box.capacity_min, STRUCTURAL, relaxed=False)
    return lp


def build_plm_scenario(cfg: HorizonConfig, prices: PriceSchedule, requests: RequestSchedule,
                       scen_set: ScenarioSet, aux_losses: bool = True) -> LinearProgram:
    """Scenario program over sampled trajectories.

    aux_losses=True models the loss provision as a free variable lower-bounded
    by every sampled loss (one tagged row per sample and step); aux_losses=False
    folds the per-step sample maximum into fixed provision bounds instead.
    Both forms share the same optimal trades and SoC.
    """
    _check_horizon(cfg, prices, requests)
    if scen_set.n_steps != cfg.n_steps:
        raise DimensionMismatchError("scenario set horizon disagrees with the config")
    u_fixed = None if aux_losses else scen_set.loss.max(axis=0)
    lp = _scaffold(cfg, prices, 0, 0.0, u_fixed=u_fixed)
    _add_balance(lp, cfg, requests, None)
    if aux_losses:
        _add_provision_rows(lp, scen_set.loss, SAMPLE)
    _add_cap_rows(lp, scen_set.capacity, SAMPLE, relaxed=False)
    return lp


def build_plm_relaxed(cfg: HorizonConfig, prices: PriceSchedule, requests: RequestSchedule,
                      scen_set: ScenarioSet, rho: float, aux_losses: bool = True) -> LinearProgram:
    """Scenario program with per-sample slack xi_i penalized at rate rho.

    In envelope mode the slack relaxes the sample's dynamics rows and its cap
    rows; in equality mode only the cap rows (the dynamics stay hard).  The
    loss-provision rows are never relaxed.  As rho grows the program tightens
    to the unrelaxed scenario program.
    """
    _check_horizon(cfg, prices, requests)
    if scen_set.n_steps != cfg.n_steps:
        raise DimensionMismatchError("scenario set horizon disagrees with the config")
    if not np.isfinite(rho) or rho < 0:
        raise ValidationError("rho must be non-negative and finite")
    n = scen_set.n_scenarios
    u_fixed = None if aux_losses else scen_set.loss.max(axis=0)
    lp = _scaffold(cfg, prices, n, rho, u_fixed=u_fixed)
    _add_balance(lp, cfg, requests, relax_n=n)
    if aux_losses:
        _add_provision_rows(lp, scen_set.loss, SAMPLE)
    _add_cap_rows(lp, scen_set.capacity, SAMPLE, relaxed=True)
    return lp


def build_plm_adversarial(cfg: HorizonConfig, prices: PriceSchedule, requests: RequestSchedule,
                          cloud: PerturbationCloud, rho: float) -> LinearProgram:
    """Relaxed scenario program robustified over per-sample perturbation hulls.

    The plan must cover every generating point of each sample's cloud, which
    is exact hull robustness for these affine rows.  Slack xi_i relaxes sample
    i's rows as in the relaxed program.
    """
    _check_horizon(cfg, prices, requests)
    if cloud.n_steps != cfg.n_steps:
        raise DimensionMismatchError("cloud horizon disagrees with the config")
    if not np.isfinite(rho) or rho < 0:
        raise ValidationError("rho must be non-negative and finite")
    n = cloud.n_scenarios
    lp = _scaffold(cfg, prices, n, rho, u_fixed=None)
    _add_balance(lp, cfg, requests, relax_n=n)
    _add_provision_rows(lp, cloud.loss, HULL)
    _add_cap_rows(lp, cloud.capacity, HULL, relaxed=True)
    return lp


def objective_value(prices: PriceSchedule, r, objective_mode: str = "arbitrage") -> float:
    """Trading cost of a plan r under the chosen objective convention.

    arbitrage: sum_k buy_k * [r_k]_+ - sell_k * [r_k]_-
    printed:   sum_k buy_k * ([r_k]_+ + [r_k]_-)
    """
    if objective_mode not in OBJECTIVE_MODES:
        raise ValidationError(f"objective_mode must be one of {OBJECTIVE_MODES}")
    r = _as_steps("r", r, prices.n_steps)
    pos = np.maximum(r, 0.0)
    neg = np.maximum(-r, 0.0)
    if objective_mode == "printed":
        return float(np.dot(prices.buy, pos + neg))
    return float(np.dot(prices.buy, pos) - np.dot(prices.sell, neg))


def decision_from_report(cfg: HorizonConfig, lp: LinearProgram, report: SolveReport) -> Decision:
    """Extract the plan from an optimal solve of a built LP."""
    if report.status != "optimal" or report.x is None:
        raise ValidationError("decision extraction requires an optimal report")
    lay: VarLayout = lp.layout
    k_n = lay.n_steps
    x = report.x
    rp = x[:k_n]
    rm = x[k_n:2 * k_n]
    r = rp - rm
    if np.any(np.abs(r) > cfg.rate_cap + _DECISION_TOL):
        raise ValidationError("extracted trades exceed the rate cap")
    b = x[2 * k_n:3 * k_n].copy()
    u = x[3 * k_n:4 * k_n].copy()
    xi = x[4 * k_n:].copy() if lay.n_xi else None
    return Decision(r=r, b=b, u=u, xi=xi, objective=float(report.objective),
                    initial_soc=cfg.initial_soc)
