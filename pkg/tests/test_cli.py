"""Command-line surface: exit codes, output bundles, byte determinism."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from vess.cli import main
from vess.serialize import payload_hash, read_csv, read_json, read_scenarios

K = 4
_BUY = [1.0 + 0.5 * math.sin(2 * math.pi * i / K) for i in range(K)]


def base_doc(**over):
    doc = {
        "horizon": {"n_steps": K, "initial_soc": 0.5, "rate_cap": 3.0},
        "modes": {"balance": "equality", "objective": "arbitrage"},
        "prices": {"buy": _BUY, "sell": [b - 0.3 for b in _BUY]},
        "requests": {"values": [1.0] * K},
        "generator": {"loss_mean": [0.4, 0.5, 0.6, 0.5], "loss_spread": 0.3,
                      "beta_base": 4.0, "occ_init": 0.8, "walk_step": 0.1},
        "adversarial": {"sigma": 0.05, "m_points": 3, "rho": 1.0},
        "ambiguity": {"mu": 1e-4, "r_ell": 0.005, "r_beta": 0.005},
        "certificates": {"delta": 0.05},
        "tune": {"eps_goal": 0.9, "n_init": 40, "rho_init": 0.5, "n_plus": 0,
                 "rho_plus": 0.5, "max_iterations": 3},
        "seeds": {"master": 11},
        "support_box": {"loss_max": [1.5] * K, "capacity_min": [1.0] * K},
        "experiment": {"n_scenarios": 60, "test_size": 400},
    }
    doc.update(over)
    return doc


def write_doc(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def run_cli(*argv):
    return main(list(argv))


def stderr_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(err)


# ----------------------------------------------------------------- generate


def test_generate_writes_complete_grid(tmp_path):
    cfg = write_doc(tmp_path, base_doc())
    assert run_cli("generate", "--config", cfg, "--out", str(tmp_path / "a")) == 0
    scen, prov = read_scenarios(tmp_path / "a" / "scenarios.csv")
    assert (scen.n_scenarios, scen.n_steps) == (60, K)
    assert prov["seed"] == "11"
    text = (tmp_path / "a" / "scenarios.csv").read_text().splitlines()
    data = [line for line in text if not line.startswith("#")]
    assert len(data) == 1 + 60 * K


def test_generate_is_byte_deterministic(tmp_path):
    cfg = write_doc(tmp_path, base_doc())
    run_cli("generate", "--config", cfg, "--out", str(tmp_path / "a"))
    run_cli("generate", "--config", cfg, "--out", str(tmp_path / "b"))
    fa = (tmp_path / "a" / "scenarios.csv").read_bytes()
    fb = (tmp_path / "b" / "scenarios.csv").read_bytes()
    assert fa == fb


def test_generate_seed_override_changes_payload(tmp_path):
    cfg = write_doc(tmp_path, base_doc())
    run_cli("generate", "--config", cfg, "--out", str(tmp_path / "a"))
    run_cli("generate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "99")
    pa = tmp_path / "a" / "scenarios.csv"
    pb = tmp_path / "b" / "scenarios.csv"
    assert payload_hash(pa) != payload_hash(pb)
    _, prov = read_scenarios(pb)
    assert prov["seed"] == "99"


def test_generate_without_experiment_section_exits_2(tmp_path, capsys):
    doc = base_doc()
    del doc["experiment"]
    cfg = write_doc(tmp_path, doc)
    assert run_cli("generate", "--config", cfg, "--out", str(tmp_path / "a")) == 2
    assert stderr_json(capsys)["error"] == "validation"


def test_out_dir_falls_back_to_config_paths(tmp_path):
    doc = base_doc(paths={"out_dir": str(tmp_path / "from_cfg")})
    cfg = write_doc(tmp_path, doc)
    assert run_cli("generate", "--config", cfg) == 0
    assert (tmp_path / "from_cfg" / "scenarios.csv").exists()


def test_no_out_dir_anywhere_exits_2(tmp_path, capsys):
    cfg = write_doc(tmp_path, base_doc())
    assert run_cli("generate", "--config", cfg) == 2
    assert "output directory" in stderr_json(capsys)["message"]


def test_missing_config_file_exits_2(tmp_path, capsys):
    code = run_cli("generate", "--config", str(tmp_path / "nope.json"),
                   "--out", str(tmp_path / "a"))
    assert code == 2
    assert stderr_json(capsys)["error"] == "io"


# ----------------------------------------------------------------- solve


def _generated(tmp_path, doc=None):
    cfg = write_doc(tmp_path, doc or base_doc())
    out = str(tmp_path / "gen")
    assert run_cli("generate", "--config", cfg, "--out", out) == 0
    return cfg, out + "/scenarios.csv"


def test_solve_writes_decision_and_trajectory(tmp_path):
    cfg, scen = _generated(tmp_path)
    out = tmp_path / "sol"
    code = run_cli("solve", "--config", cfg, "--out", str(out),
                   "--variant", "scenario", "--scenarios", scen)
    assert code == 0
    doc = read_json(out / "decision.json")
    assert doc["variant"] == "scenario"
    assert doc["report"]["status"] == "optimal"
    assert len(doc["decision"]["r"]) == K
    cols, rows, _ = read_csv(out / "trajectory.csv")
    assert tuple(cols) == ("k", "b", "r", "u")
    assert [int(r[0]) for r in rows] == [1, 2, 3, 4]


def test_solve_base_and_robust_need_no_scenarios(tmp_path):
    cfg = write_doc(tmp_path, base_doc())
    for variant in ("base", "robust"):
        out = tmp_path / variant
        assert run_cli("solve", "--config", cfg, "--out", str(out),
                       "--variant", variant) == 0
        doc = read_json(out / "decision.json")
        assert doc["decision"]["xi"] is None


def test_solve_scenario_matches_relaxed_at_huge_rho(tmp_path):
    doc = base_doc()
    doc["adversarial"]["rho"] = 1e6
    cfg, scen = _generated(tmp_path, doc)
    plans = {}
    for variant in ("scenario", "relaxed"):
        out = tmp_path / variant
        assert run_cli("solve", "--config", cfg, "--out", str(out),
                       "--variant", variant, "--scenarios", scen) == 0
        plans[variant] = read_json(out / "decision.json")["decision"]
    for key in ("r", "b"):
        assert np.allclose(plans["scenario"][key], plans["relaxed"][key], atol=1e-5)
    assert max(plans["relaxed"]["xi"]) <= 1e-6


def test_solve_variant_needing_scenarios_without_flag_exits_2(tmp_path, capsys):
    cfg = write_doc(tmp_path, base_doc())
    code = run_cli("solve", "--config", cfg, "--out", str(tmp_path / "s"),
                   "--variant", "adversarial")
    assert code == 2
    assert "--scenarios" in stderr_json(capsys)["message"]


def test_solve_robust_without_box_exits_2(tmp_path, capsys):
    doc = base_doc()
    del doc["support_box"]
    cfg = write_doc(tmp_path, doc)
    code = run_cli("solve", "--config", cfg, "--out", str(tmp_path / "s"),
                   "--variant", "robust")
    assert code == 2
    assert "support_box" in stderr_json(capsys)["message"]


def test_solve_infeasible_exits_3_with_certifying_row(tmp_path, capsys):
    doc = base_doc()
    # Equality dynamics force the SoC far above the tiny capacity ceiling.
    doc["horizon"]["initial_soc"] = 5.0
    doc["support_box"] = {"loss_max": [1.5] * K, "capacity_min": [0.5] * K}
    cfg = write_doc(tmp_path, doc)
    code = run_cli("solve", "--config", cfg, "--out", str(tmp_path / "s"),
                   "--variant", "robust")
    assert code == 3
    err = stderr_json(capsys)
    assert err["error"] == "infeasible"
    rows = err["certifying_rows"]
    assert rows and rows[0]["deficit"] > 0
    assert "[" in rows[0]["row"]


def test_solve_is_byte_deterministic(tmp_path):
    cfg, scen = _generated(tmp_path)
    for name in ("a", "b"):
        run_cli("solve", "--config", cfg, "--out", str(tmp_path / name),
                "--variant", "adversarial", "--scenarios", scen)
    for fname in ("decision.json", "trajectory.csv"):
        assert (tmp_path / "a" / fname).read_bytes() == \
            (tmp_path / "b" / fname).read_bytes()


# ----------------------------------------------------------------- certify


def _solved(tmp_path, variant="scenario"):
    cfg, scen = _generated(tmp_path)
    out = tmp_path / "sol"
    assert run_cli("solve", "--config", cfg, "--out", str(out),
                   "--variant", variant, "--scenarios", scen) == 0
    return cfg, scen, str(out / "decision.json")


def _certify(tmp_path, cfg, scen, dec, method, out="cert", extra=()):
    out_dir = tmp_path / out
    code = run_cli("certify", "--config", cfg, "--out", str(out_dir),
                   "--method", method, "--decision", dec, "--scenarios", scen,
                   *extra)
    return code, out_dir / "certificate.json"


def test_certify_posteriori_bounds_and_tags(tmp_path):
    cfg, scen, dec = _solved(tmp_path)
    code, path = _certify(tmp_path, cfg, scen, dec, "posteriori")
    assert code == 0
    doc = read_json(path)
    assert doc["event"] == "provision"
    cert = doc["certificate"]
    assert cert["method"] == "posteriori"
    assert 0.0 <= cert["eps_lower"] <= cert["eps_upper"] <= 1.0
    assert 0.0 <= cert["t_small"] <= cert["t_large"] <= 1.0
    assert cert["n_scenarios"] == 60


def test_certify_dro_adds_exactly_mu_over_radius(tmp_path):
    cfg, scen, dec = _solved(tmp_path)
    _, p_post = _certify(tmp_path, cfg, scen, dec, "posteriori", out="p")
    _, p_dro = _certify(tmp_path, cfg, scen, dec, "dro", out="d")
    post = read_json(p_post)["certificate"]
    dro = read_json(p_dro)["certificate"]
    assert dro["complexity"] == post["complexity"]
    assert dro["dro_addend"] == pytest.approx(1e-4 / 0.01)
    assert dro["eps_upper"] == pytest.approx(post["eps_upper"] + 1e-4 / 0.01)
    assert dro["eps_lower"] == 0.0


def test_certify_apriori_uses_support_dimension(tmp_path):
    cfg, scen, dec = _solved(tmp_path)
    code, path = _certify(tmp_path, cfg, scen, dec, "apriori")
    assert code == 0
    cert = read_json(path)["certificate"]
    assert cert["complexity"] == 2 * K
    assert cert["eps_lower"] == 0.0
    assert 0.0 < cert["eps_upper"] < 1.0


def test_certify_apriori_too_few_samples_exits_2(tmp_path, capsys):
    doc = base_doc()
    doc["experiment"]["n_scenarios"] = 2 * K
    cfg, scen = _generated(tmp_path, doc)
    out = tmp_path / "sol"
    run_cli("solve", "--config", cfg, "--out", str(out),
            "--variant", "scenario", "--scenarios", scen)
    code, _ = _certify(tmp_path, cfg, scen, str(out / "decision.json"), "apriori")
    assert code == 2
    assert stderr_json(capsys)["error"] == "validation"


def test_certify_horizon_mismatch_exits_2(tmp_path, capsys):
    cfg, scen, dec = _solved(tmp_path)
    other = base_doc()
    other["horizon"]["n_steps"] = 3
    for key in ("prices", "requests", "generator", "support_box"):
        sec = other[key]
        for name, vals in sec.items():
            if isinstance(vals, list):
                sec[name] = vals[:3]
    cfg3 = write_doc(tmp_path, other, name="run3.json")
    code, _ = _certify(tmp_path, cfg3, scen, dec, "posteriori")
    assert code == 2
    assert "steps" in stderr_json(capsys)["message"]


def test_certify_decision_without_entry_exits_2(tmp_path, capsys):
    cfg, scen = _generated(tmp_path)
    bogus = tmp_path / "bogus.json"
    bogus.write_text(json.dumps({"not_a_decision": 1}))
    code, _ = _certify(tmp_path, cfg, scen, str(bogus), "posteriori")
    assert code == 2
    assert "decision" in stderr_json(capsys)["message"]


# ----------------------------------------------------------------- experiment


def test_experiment_tradeoff_bundle(tmp_path):
    doc = base_doc()
    doc["experiment"]["tradeoff"] = {"radii": [0.01, 0.05], "n_values": [40, 80],
                                     "test_size": 400}
    cfg = write_doc(tmp_path, doc)
    out = tmp_path / "e"
    assert run_cli("experiment", "--config", cfg, "--out", str(out),
                   "--which", "tradeoff") == 0
    cols, rows, _ = read_csv(out / "tradeoff.csv")
    assert tuple(cols) == ("R", "N", "profit", "violation")
    assert len(rows) == 4
    cells = read_json(out / "tradeoff.json")["cells"]
    assert len(cells) == 4
    assert all(0.0 <= c["violation"] <= 1.0 for c in cells)


def test_experiment_ood_bundle(tmp_path):
    doc = base_doc()
    doc["experiment"]["ood"] = {"n_variants": 5, "test_size": 300}
    cfg = write_doc(tmp_path, doc)
    out = tmp_path / "e"
    assert run_cli("experiment", "--config", cfg, "--out", str(out),
                   "--which", "ood") == 0
    cols, rows, _ = read_csv(out / "ood.csv")
    assert tuple(cols) == ("variant", "rate")
    assert len(rows) == 6
    assert rows[-1][0] == "bound"
    doc_out = read_json(out / "ood.json")
    assert doc_out["bound"] == pytest.approx(doc_out["eps_upper"] + 1e-4 / 0.01)
    assert len(doc_out["rates"]) == 5


def test_experiment_calibration_bundle(tmp_path):
    doc = base_doc()
    doc["experiment"]["calibration"] = {"trials": 5, "n_train": 30, "n_eval": 400}
    cfg = write_doc(tmp_path, doc)
    out = tmp_path / "e"
    assert run_cli("experiment", "--config", cfg, "--out", str(out),
                   "--which", "calibration") == 0
    cols, rows, _ = read_csv(out / "calibration.csv")
    assert len(rows) == 5
    assert tuple(cols[:2]) == ("trial", "complexity")
    verdict = read_json(out / "calibration.json")
    assert set(verdict) >= {"miscoverage", "apriori_exceedance", "slack",
                            "interval_calibrated", "apriori_calibrated"}
    assert 0.0 <= verdict["miscoverage"] <= 1.0


def test_experiment_tune_attained_and_not(tmp_path):
    cfg = write_doc(tmp_path, base_doc())
    out = tmp_path / "hit"
    assert run_cli("experiment", "--config", cfg, "--out", str(out),
                   "--which", "tune") == 0
    assert read_json(out / "tune.json")["attained"] is True

    doc = base_doc()
    doc["tune"] = {"eps_goal": 1e-6, "n_init": 20, "rho_init": 0.1, "n_plus": 0,
                   "rho_plus": 0.1, "max_iterations": 2}
    cfg2 = write_doc(tmp_path, doc, name="miss.json")
    out2 = tmp_path / "miss"
    assert run_cli("experiment", "--config", cfg2, "--out", str(out2),
                   "--which", "tune") == 5
    trace = read_json(out2 / "tune.json")
    assert trace["attained"] is False
    _, rows, _ = read_csv(out2 / "tune_trace.csv")
    assert len(rows) == 2


def test_experiment_missing_grid_exits_2(tmp_path, capsys):
    cfg = write_doc(tmp_path, base_doc())
    for which in ("tradeoff", "ood", "calibration"):
        assert run_cli("experiment", "--config", cfg,
                       "--out", str(tmp_path / which), "--which", which) == 2
        assert which in stderr_json(capsys)["message"]


def test_experiment_ood_is_byte_deterministic(tmp_path):
    doc = base_doc()
    doc["experiment"]["ood"] = {"n_variants": 4, "test_size": 200}
    cfg = write_doc(tmp_path, doc)
    for name in ("a", "b"):
        run_cli("experiment", "--config", cfg, "--out", str(tmp_path / name),
                "--which", "ood")
    for fname in ("ood.csv", "ood.json"):
        assert (tmp_path / "a" / fname).read_bytes() == \
            (tmp_path / "b" / fname).read_bytes()


# ----------------------------------------------------------------- parser


def test_bad_subcommand_and_bad_choice_exit_2():
    for argv in (["nonsense"], ["solve", "--config", "x", "--variant", "bogus"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_module_entry_point_runs(tmp_path):
    cfg = write_doc(tmp_path, base_doc())
    proc = subprocess.run(
        [sys.executable, "-m", "vess.cli", "generate", "--config", cfg,
         "--out", str(tmp_path / "a")],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "a" / "scenarios.csv").exists()
