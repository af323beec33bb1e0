"""Command-line surface binding the package into reproducible runs.

Four subcommands cover the full workflow: generate draws a scenario CSV,
solve produces a dispatch plan for one program variant, certify prices a
stored plan against a scenario file, and experiment runs the batch studies
that feed the figure CSVs.  All state comes from the JSON config document
and the flags; environment variables are never consulted.  Given identical
config and seed every command writes identical bytes.

Exit codes: 0 success, 2 validation (including IO and schema problems),
3 infeasible program, 4 numerical failure, 5 tuning goal not attained.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .certificates import CertificateReport, apriori_eps, posterior_bounds, support_dimension
from .complexity import adversarial_complexity, relaxed_complexity
from .config import RunConfig, load_config
from .datagen import derive_rng, sample_cloud, sample_scenarios
from .errors import (
    InfeasibleError,
    NumericalFailureError,
    SchemaError,
    UnboundedError,
    ValidationError,
)
from .evaluate import calibration_trial
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, diagnose_infeasible, solve_unique
from .model import (
    Scenario,
    build_plm_adversarial,
    build_plm_base,
    build_plm_relaxed,
    build_plm_robust,
    build_plm_scenario,
    decision_from_report,
)
from .orchestrate import (
    ood_experiment,
    tradeoff_sweep,
    tune,
    write_ood_csv,
    write_tradeoff_csv,
    write_trajectory_csv,
    write_tune_trace_csv,
)
from .serialize import (
    decision_from_dict,
    decision_to_dict,
    provenance,
    read_json,
    read_scenarios,
    report_to_dict,
    write_csv,
    write_json,
    write_scenarios,
)

__all__ = ["main", "cmd_generate", "cmd_solve", "cmd_certify", "cmd_experiment"]

VARIANTS = ("base", "robust", "scenario", "relaxed", "adversarial")
METHODS = ("apriori", "posteriori", "dro")
EXPERIMENTS = ("tradeoff", "ood", "calibration", "tune")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4
EXIT_NOT_ATTAINED = 5


def _emit_error(kind: str, message: str, **extra) -> None:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _load_run(args) -> tuple[RunConfig, int, str]:
    """Config document, effective seed, and output directory for a command."""
    run = load_config(args.config)
    seed = run.master_seed if args.seed is None else args.seed
    if not isinstance(seed, int) or seed < 0:
        raise SchemaError("--seed must be a non-negative integer")
    out = args.out if args.out is not None else run.out_dir
    if out is None:
        raise SchemaError("no output directory: pass --out or set paths.out_dir")
    os.makedirs(out, exist_ok=True)
    return run, seed, out


def _experiment_section(run: RunConfig):
    if run.experiment is None:
        raise SchemaError("this command needs an 'experiment' config section")
    return run.experiment


def _nominal_scenario(spec) -> Scenario:
    # Zero-noise limit of the sampler: the occupancy walk stays at its start.
    return Scenario(spec.loss_mean, np.full(spec.n_steps, spec.beta_base * spec.occ_init))


def _tag_dict(tag, deficit: float) -> dict:
    return {
        "row": tag.label(),
        "kind": tag.kind,
        "family": tag.family,
        "sample": tag.sample,
        "hull": tag.hull,
        "step": tag.step,
        "deficit": deficit,
    }


def cmd_generate(args) -> int:
    """Draw the configured number of scenarios and write scenarios.csv."""
    run, seed, out = _load_run(args)
    exp = _experiment_section(run)
    scen = sample_scenarios(run.generator, exp.n_scenarios, derive_rng(seed, "generate"))
    write_scenarios(os.path.join(out, "scenarios.csv"), scen, provenance(run.sha256, seed))
    return EXIT_OK


def cmd_solve(args) -> int:
    """Solve one program variant and write decision.json + trajectory.csv."""
    run, seed, out = _load_run(args)
    cfg, prices, requests = run.horizon, run.prices, run.requests
    adv = run.adversarial
    if args.variant == "base":
        lp = build_plm_base(cfg, prices, requests, _nominal_scenario(run.generator))
    elif args.variant == "robust":
        if run.support_box is None:
            raise SchemaError("variant 'robust' needs a 'support_box' config section")
        lp = build_plm_robust(cfg, prices, requests, run.support_box)
    else:
        if args.scenarios is None:
            raise SchemaError(f"variant '{args.variant}' needs --scenarios")
        scen, _ = read_scenarios(args.scenarios)
        if args.variant == "scenario":
            lp = build_plm_scenario(cfg, prices, requests, scen)
        elif args.variant == "relaxed":
            lp = build_plm_relaxed(cfg, prices, requests, scen, adv.rho)
        else:
            cloud = sample_cloud(scen, adv.m_points, adv.sigma,
                                 derive_rng(seed, "solve", "cloud"))
            lp = build_plm_adversarial(cfg, prices, requests, cloud, adv.rho)

    report = solve_unique(lp)
    if report.status == INFEASIBLE:
        rows = [_tag_dict(tag, deficit) for tag, deficit in diagnose_infeasible(lp)]
        _emit_error("infeasible", "program is infeasible", certifying_rows=rows)
        return EXIT_INFEASIBLE
    if report.status == UNBOUNDED:
        _emit_error("numerical", "program is unbounded below")
        return EXIT_NUMERICAL

    dec = decision_from_report(cfg, lp, report)
    prov = provenance(run.sha256, seed)
    write_json(os.path.join(out, "decision.json"),
               {"variant": args.variant,
                "decision": decision_to_dict(dec),
                "report": report_to_dict(report)},
               prov)
    write_trajectory_csv(os.path.join(out, "trajectory.csv"), dec, prov)
    return EXIT_OK


def _observed_complexity(dec, scen) -> int:
    # A plan without relaxation slacks is scored with all-zero slacks so the
    # active-or-violated counting rule applies to every variant uniformly.
    if dec.xi is None:
        dec = dataclasses.replace(dec, xi=np.zeros(scen.n_scenarios))
    return relaxed_complexity(dec, scen).count


def cmd_certify(args) -> int:
    """Certify a stored decision against a scenario file."""
    run, seed, out = _load_run(args)
    doc = read_json(args.decision)
    if "decision" not in doc:
        raise SchemaError(f"{args.decision} has no 'decision' entry")
    dec = decision_from_dict(doc["decision"])
    scen, _ = read_scenarios(args.scenarios)
    if scen.n_steps != run.horizon.n_steps:
        raise SchemaError(f"scenario file has {scen.n_steps} steps, config horizon "
                          f"has {run.horizon.n_steps}")
    n, delta = scen.n_scenarios, run.delta

    if args.method == "apriori":
        # The a-priori level prices complexity at the support dimension.
        cert = CertificateReport(
            method="apriori", delta=delta,
            eps_lower=0.0, eps_upper=apriori_eps(n, run.horizon.n_steps, delta),
            complexity=support_dimension(run.horizon.n_steps), n_scenarios=n)
    else:
        m = _observed_complexity(dec, scen)
        eps_lo, eps_up, t_small, t_large = posterior_bounds(n, m, delta)
        if args.method == "posteriori":
            cert = CertificateReport(
                method="posteriori", delta=delta,
                eps_lower=eps_lo, eps_upper=eps_up,
                complexity=m, n_scenarios=n, t_small=t_small, t_large=t_large)
        else:
            addend = run.amb.mu / run.amb.radius
            cert = CertificateReport(
                method="dro", delta=delta,
                eps_lower=0.0, eps_upper=min(1.0, eps_up + addend),
                complexity=m, n_scenarios=n, t_small=t_small, t_large=t_large,
                dro_addend=addend, vacuous=bool(eps_up + addend >= 1.0))

    write_json(os.path.join(out, "certificate.json"),
               {"event": "provision",
                "complexity_rule": "active-or-violated",
                "certificate": cert.to_dict()},
               provenance(run.sha256, seed))
    return EXIT_OK


def _run_tradeoff(run: RunConfig, seed: int, out: str, prov: dict) -> int:
    exp = _experiment_section(run)
    if exp.tradeoff is None:
        raise SchemaError("experiment section has no 'tradeoff' grid")
    grid = exp.tradeoff
    table = tradeoff_sweep(run.horizon, run.prices, run.requests, run.generator,
                           grid.radii, grid.n_values,
                           rho=run.adversarial.rho, delta=run.delta,
                           m_points=run.adversarial.m_points,
                           test_size=grid.test_size, master_seed=seed)
    write_tradeoff_csv(os.path.join(out, "tradeoff.csv"), table, prov)
    write_json(os.path.join(out, "tradeoff.json"),
               {"radii": list(table.radii),
                "n_values": list(table.n_values),
                "cells": [{"radius": c.radius, "n_scenarios": c.n_scenarios,
                           "rho": c.rho, "objective": c.objective,
                           "profit": c.profit, "violation": c.violation,
                           "eps_upper": c.eps_upper, "complexity": c.complexity}
                          for c in table.cells]},
               prov)
    return EXIT_OK


def _run_ood(run: RunConfig, seed: int, out: str, prov: dict) -> int:
    exp = _experiment_section(run)
    if exp.ood is None:
        raise SchemaError("experiment section has no 'ood' grid")
    grid = exp.ood
    cfg, prices, requests, adv = run.horizon, run.prices, run.requests, run.adversarial
    scen = sample_scenarios(run.generator, exp.n_scenarios, derive_rng(seed, "ood-train"))
    cloud = sample_cloud(scen, adv.m_points, adv.sigma, derive_rng(seed, "ood-cloud"))
    lp = build_plm_adversarial(cfg, prices, requests, cloud, adv.rho)
    report = solve_unique(lp)
    if report.status != OPTIMAL:
        raise InfeasibleError(f"adversarial training program is {report.status}")
    dec = decision_from_report(cfg, lp, report)
    m = adversarial_complexity(dec, cloud).count
    _, eps_up, _, _ = posterior_bounds(exp.n_scenarios, m, run.delta)
    ood = ood_experiment(dec, run.generator, requests, run.amb, eps_up,
                         n_variants=grid.n_variants, test_size=grid.test_size,
                         master_seed=seed)
    write_ood_csv(os.path.join(out, "ood.csv"), ood, prov)
    write_json(os.path.join(out, "ood.json"),
               {"complexity": m, "eps_upper": eps_up, "bound": ood.bound,
                "mean_rate": ood.mean_rate, "worst_rate": ood.worst_rate,
                "best_rate": ood.best_rate, "bounded": ood.bounded,
                "rates": list(ood.rates)},
               prov)
    return EXIT_OK


def _run_calibration(run: RunConfig, seed: int, out: str, prov: dict) -> int:
    exp = _experiment_section(run)
    if exp.calibration is None:
        raise SchemaError("experiment section has no 'calibration' grid")
    grid = exp.calibration
    trials = [calibration_trial(run.horizon, run.prices, run.requests, run.generator,
                                grid.n_train, run.delta, grid.n_eval, seed, t)
              for t in range(grid.trials)]
    miscoverage = 1.0 - float(np.mean([t.contained for t in trials]))
    exceedance = 1.0 - float(np.mean([t.contained_apriori for t in trials]))
    slack = 3.0 * float(np.sqrt(run.delta * (1.0 - run.delta) / grid.trials))
    write_csv(os.path.join(out, "calibration.csv"),
              ("trial", "complexity", "eps_lower", "eps_upper", "eps_apriori",
               "rate", "contained", "contained_apriori"),
              [(i, t.complexity, t.eps_lower, t.eps_upper, t.eps_apriori,
                t.rate, int(t.contained), int(t.contained_apriori))
               for i, t in enumerate(trials)],
              prov)
    write_json(os.path.join(out, "calibration.json"),
               {"trials": grid.trials, "delta": run.delta, "slack": slack,
                "miscoverage": miscoverage, "apriori_exceedance": exceedance,
                "interval_calibrated": bool(miscoverage <= run.delta + slack),
                "apriori_calibrated": bool(exceedance <= run.delta + slack)},
               prov)
    return EXIT_OK


def _run_tune(run: RunConfig, seed: int, out: str, prov: dict) -> int:
    res = tune(run.tune, run.horizon, run.prices, run.requests, run.generator, seed)
    write_tune_trace_csv(os.path.join(out, "tune_trace.csv"), res.trace, prov)
    write_json(os.path.join(out, "tune.json"),
               {"attained": res.attained, "eps": res.eps,
                "n_scenarios": res.n_scenarios, "rho": res.rho,
                "iterations": len(res.trace),
                "decision": decision_to_dict(res.decision)},
               prov)
    return EXIT_OK if res.attained else EXIT_NOT_ATTAINED


def cmd_experiment(args) -> int:
    """Run one batch study and write its figure CSV + JSON bundle."""
    run, seed, out = _load_run(args)
    prov = provenance(run.sha256, seed)
    runner = {"tradeoff": _run_tradeoff, "ood": _run_ood,
              "calibration": _run_calibration, "tune": _run_tune}[args.which]
    return runner(run, seed, out, prov)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vess",
        description="Scenario-based dispatch planning with finite-sample "
                    "violation certificates.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--out", default=None, help="output directory "
                       "(default: paths.out_dir from the config)")
        p.add_argument("--seed", type=int, default=None,
                       help="override seeds.master from the config")

    p = sub.add_parser("generate", help="draw scenarios and write scenarios.csv")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve one program variant")
    common(p)
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--scenarios", default=None,
                   help="scenario CSV (scenario/relaxed/adversarial variants)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="certify a stored decision")
    common(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--decision", required=True, help="decision JSON from solve")
    p.add_argument("--scenarios", required=True, help="scenario CSV to score against")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("experiment", help="run one batch study")
    common(p)
    p.add_argument("--which", required=True, choices=EXPERIMENTS)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        _emit_error("validation", str(exc))
        return EXIT_VALIDATION
    except InfeasibleError as exc:
        _emit_error("infeasible", str(exc))
        return EXIT_INFEASIBLE
    except (NumericalFailureError, UnboundedError) as exc:
        _emit_error("numerical", str(exc))
        return EXIT_NUMERICAL
    except OSError as exc:
        _emit_error("io", str(exc))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
