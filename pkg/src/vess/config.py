"""Strict run-configuration schema.

One JSON document drives a whole run: horizon and modes, tariffs, delivery
requests, the scenario generator, the perturbation cloud, the ambiguity
budget, the confidence budget, the tuning loop, and seeds.  Parsing is
strict in both directions: every required key must be present and every
present key must be known, at every nesting level, so a typo fails loudly
instead of silently activating a default.  The raw document is kept on the
parsed object because its canonical hash is the provenance identity of all
emitted files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certificates import AmbiguitySpec
from .datagen import GeneratorSpec
from .errors import SchemaError
from .model import (BALANCE_MODES, OBJECTIVE_MODES, BoxSupport, HorizonConfig,
                    PriceSchedule, RequestSchedule)
from .orchestrate import TuneConfig
from .serialize import config_hash, read_json

__all__ = [
    "AdversarialConfig",
    "TradeoffGrid",
    "OODGrid",
    "CalibrationGrid",
    "ExperimentConfig",
    "RunConfig",
    "parse_config",
    "load_config",
]


@dataclass(frozen=True)
class AdversarialConfig:
    """Perturbation cloud shape and relaxation price for solves."""

    sigma: float
    m_points: int
    rho: float


@dataclass(frozen=True)
class TradeoffGrid:
    radii: tuple
    n_values: tuple
    test_size: int


@dataclass(frozen=True)
class OODGrid:
    n_variants: int
    test_size: int


@dataclass(frozen=True)
class CalibrationGrid:
    trials: int
    n_train: int
    n_eval: int


@dataclass(frozen=True)
class ExperimentConfig:
    """Sizes of the experiment workflows; absent grids disable their runs."""

    n_scenarios: int
    test_size: int
    tradeoff: TradeoffGrid | None = None
    ood: OODGrid | None = None
    calibration: CalibrationGrid | None = None


@dataclass(frozen=True)
class RunConfig:
    """Fully parsed run document plus the raw dict it was parsed from."""

    raw: dict
    horizon: HorizonConfig
    prices: PriceSchedule
    requests: RequestSchedule
    generator: GeneratorSpec
    adversarial: AdversarialConfig
    amb: AmbiguitySpec
    delta: float
    tune: TuneConfig
    master_seed: int
    out_dir: str | None = None
    support_box: BoxSupport | None = None
    experiment: ExperimentConfig | None = None

    def __post_init__(self):
        k = self.horizon.n_steps
        for name, n in (("prices", self.prices.n_steps),
                        ("requests", self.requests.n_steps),
                        ("generator", self.generator.n_steps)):
            if n != k:
                raise SchemaError(f"section '{name}' has {n} steps, horizon has {k}")
        if self.support_box is not None and self.support_box.n_steps != k:
            raise SchemaError(f"section 'support_box' has {self.support_box.n_steps} "
                              f"steps, horizon has {k}")

    @property
    def sha256(self) -> str:
        return config_hash(self.raw)


_TOP_REQUIRED = ("horizon", "modes", "prices", "requests", "generator",
                 "adversarial", "ambiguity", "certificates", "tune", "seeds")
_TOP_OPTIONAL = ("paths", "support_box", "experiment")


def _section(doc: dict, name: str, required, optional=()) -> dict:
    sec = doc[name]
    if not isinstance(sec, dict):
        raise SchemaError(f"config section '{name}' must be an object")
    unknown = sorted(set(sec) - set(required) - set(optional))
    if unknown:
        raise SchemaError(f"unknown key '{unknown[0]}' in config section '{name}'")
    missing = sorted(set(required) - set(sec))
    if missing:
        raise SchemaError(f"config section '{name}' is missing key '{missing[0]}'")
    return sec


def _real(sec: dict, key: str, name: str) -> float:
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"'{name}.{key}' must be a real number")
    return float(v)


def _int(sec: dict, key: str, name: str) -> int:
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"'{name}.{key}' must be an integer")
    return v


def _reals(sec: dict, key: str, name: str) -> np.ndarray:
    v = sec[key]
    if not isinstance(v, list) or not v or any(
            isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise SchemaError(f"'{name}.{key}' must be a non-empty list of real numbers")
    return np.array(v, dtype=float)


def _str(sec: dict, key: str, name: str) -> str:
    v = sec[key]
    if not isinstance(v, str):
        raise SchemaError(f"'{name}.{key}' must be a string")
    return v


def _parse_experiment(doc: dict) -> ExperimentConfig:
    sec = _section(doc, "experiment", ("n_scenarios", "test_size"),
                   ("tradeoff", "ood", "calibration"))
    tradeoff = ood = calibration = None
    if "tradeoff" in sec:
        sub = _section(sec, "tradeoff", ("radii", "n_values", "test_size"))
        radii = _reals(sub, "radii", "experiment.tradeoff")
        n_values = sub["n_values"]
        if not isinstance(n_values, list) or not n_values or any(
                isinstance(x, bool) or not isinstance(x, int) or x < 1 for x in n_values):
            raise SchemaError("'experiment.tradeoff.n_values' must be a non-empty "
                              "list of positive integers")
        if np.any(radii <= 0):
            raise SchemaError("'experiment.tradeoff.radii' must be positive")
        tradeoff = TradeoffGrid(radii=tuple(float(r) for r in radii),
                                n_values=tuple(n_values),
                                test_size=_positive_int(sub, "test_size",
                                                        "experiment.tradeoff"))
    if "ood" in sec:
        sub = _section(sec, "ood", ("n_variants", "test_size"))
        ood = OODGrid(n_variants=_positive_int(sub, "n_variants", "experiment.ood"),
                      test_size=_positive_int(sub, "test_size", "experiment.ood"))
    if "calibration" in sec:
        sub = _section(sec, "calibration", ("trials", "n_train", "n_eval"))
        calibration = CalibrationGrid(
            trials=_positive_int(sub, "trials", "experiment.calibration"),
            n_train=_positive_int(sub, "n_train", "experiment.calibration"),
            n_eval=_positive_int(sub, "n_eval", "experiment.calibration"))
    return ExperimentConfig(
        n_scenarios=_positive_int(sec, "n_scenarios", "experiment"),
        test_size=_positive_int(sec, "test_size", "experiment"),
        tradeoff=tradeoff, ood=ood, calibration=calibration)


def _positive_int(sec: dict, key: str, name: str) -> int:
    v = _int(sec, key, name)
    if v < 1:
        raise SchemaError(f"'{name}.{key}' must be a positive integer")
    return v


def parse_config(doc: dict) -> RunConfig:
    """Validate a raw config document and assemble the typed run object."""
    if not isinstance(doc, dict):
        raise SchemaError("config must be a JSON object")
    unknown = sorted(set(doc) - set(_TOP_REQUIRED) - set(_TOP_OPTIONAL))
    if unknown:
        raise SchemaError(f"unknown top-level config section '{unknown[0]}'")
    missing = sorted(set(_TOP_REQUIRED) - set(doc))
    if missing:
        raise SchemaError(f"missing config section '{missing[0]}'")

    hsec = _section(doc, "horizon", ("n_steps", "initial_soc", "rate_cap"))
    msec = _section(doc, "modes", ("balance", "objective"))
    balance = _str(msec, "balance", "modes")
    objective = _str(msec, "objective", "modes")
    if balance not in BALANCE_MODES:
        raise SchemaError(f"'modes.balance' must be one of {BALANCE_MODES}")
    if objective not in OBJECTIVE_MODES:
        raise SchemaError(f"'modes.objective' must be one of {OBJECTIVE_MODES}")
    horizon = HorizonConfig(
        n_steps=_positive_int(hsec, "n_steps", "horizon"),
        initial_soc=_real(hsec, "initial_soc", "horizon"),
        rate_cap=_real(hsec, "rate_cap", "horizon"),
        balance_mode=balance,
        objective_mode=objective)

    psec = _section(doc, "prices", ("buy", "sell"))
    prices = PriceSchedule(_reals(psec, "buy", "prices"),
                           _reals(psec, "sell", "prices"))
    rsec = _section(doc, "requests", ("values",))
    requests = RequestSchedule(_reals(rsec, "values", "requests"))

    gsec = _section(doc, "generator", ("loss_mean", "loss_spread", "beta_base",
                                       "occ_init", "walk_step"))
    generator = GeneratorSpec(
        n_steps=horizon.n_steps,
        loss_mean=_reals(gsec, "loss_mean", "generator"),
        loss_spread=_real(gsec, "loss_spread", "generator"),
        beta_base=_real(gsec, "beta_base", "generator"),
        occ_init=_real(gsec, "occ_init", "generator"),
        walk_step=_real(gsec, "walk_step", "generator"))

    asec = _section(doc, "adversarial", ("sigma", "m_points", "rho"))
    sigma = _real(asec, "sigma", "adversarial")
    rho = _real(asec, "rho", "adversarial")
    if sigma < 0 or not np.isfinite(sigma):
        raise SchemaError("'adversarial.sigma' must be non-negative and finite")
    if rho < 0 or not np.isfinite(rho):
        raise SchemaError("'adversarial.rho' must be non-negative and finite")
    adversarial = AdversarialConfig(
        sigma=sigma, m_points=_positive_int(asec, "m_points", "adversarial"),
        rho=rho)

    bsec = _section(doc, "ambiguity", ("mu", "r_ell", "r_beta"))
    amb = AmbiguitySpec(mu=_real(bsec, "mu", "ambiguity"),
                        r_ell=_real(bsec, "r_ell", "ambiguity"),
                        r_beta=_real(bsec, "r_beta", "ambiguity"))

    csec = _section(doc, "certificates", ("delta",))
    delta = _real(csec, "delta", "certificates")

    tsec = _section(doc, "tune", ("eps_goal", "n_init", "rho_init", "n_plus",
                                  "rho_plus"), ("max_iterations",))
    tune = TuneConfig(
        eps_goal=_real(tsec, "eps_goal", "tune"),
        n_init=_positive_int(tsec, "n_init", "tune"),
        rho_init=_real(tsec, "rho_init", "tune"),
        n_plus=_int(tsec, "n_plus", "tune"),
        rho_plus=_real(tsec, "rho_plus", "tune"),
        delta=delta,
        amb=amb,
        m_points=adversarial.m_points,
        sigma=adversarial.sigma,
        max_iterations=(_positive_int(tsec, "max_iterations", "tune")
                        if "max_iterations" in tsec else 20))

    ssec = _section(doc, "seeds", ("master",))
    master_seed = _int(ssec, "master", "seeds")
    if master_seed < 0:
        raise SchemaError("'seeds.master' must be non-negative")

    out_dir = None
    if "paths" in doc:
        out_dir = _str(_section(doc, "paths", ("out_dir",)), "out_dir", "paths")

    support_box = None
    if "support_box" in doc:
        xsec = _section(doc, "support_box", ("loss_max", "capacity_min"))
        support_box = BoxSupport(_reals(xsec, "loss_max", "support_box"),
                                 _reals(xsec, "capacity_min", "support_box"))

    experiment = _parse_experiment(doc) if "experiment" in doc else None

    return RunConfig(raw=doc, horizon=horizon, prices=prices, requests=requests,
                     generator=generator, adversarial=adversarial, amb=amb,
                     delta=delta, tune=tune, master_seed=master_seed,
                     out_dir=out_dir, support_box=support_box,
                     experiment=experiment)


def load_config(path) -> RunConfig:
    """Read and parse a config file."""
    doc = read_json(path)
    return parse_config(doc)
