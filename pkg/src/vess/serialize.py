"""Deterministic file IO: scenario CSV, decision JSON, provenance headers.

Every emitted file is a pure function of config and seed.  CSV files open
with `# key=value` provenance comment lines (artifact version, config hash,
seed); JSON files carry the same fields under a "provenance" key.  Floats
are written with repr, the shortest round-tripping form, so byte equality
follows from value equality.  `payload_hash` hashes a file with the
provenance stripped, which is the identity the determinism contract is
stated over.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SchemaError
from .lp import SolveReport
from .model import Decision, ScenarioSet

__all__ = [
    "config_hash",
    "provenance",
    "write_csv",
    "read_csv",
    "write_scenarios",
    "read_scenarios",
    "decision_to_dict",
    "decision_from_dict",
    "report_to_dict",
    "write_json",
    "read_json",
    "payload_hash",
    "SCENARIO_COLUMNS",
]

SCENARIO_COLUMNS = ("scenario", "k", "ell", "beta")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def config_hash(config: dict) -> str:
    """Canonical sha256 of a config document."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def provenance(cfg_hash: str, seed: int) -> dict:
    return {
        "artifact_version": __version__,
        "config_sha256": cfg_hash,
        "seed": int(seed),
    }


def write_csv(path, columns, rows, prov: dict | None = None) -> None:
    """Write a provenance-headed CSV with repr-formatted values."""
    path = Path(path)
    lines = []
    if prov:
        lines.extend(f"# {k}={_fmt(v)}" for k, v in prov.items())
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise SchemaError(f"row width {len(row)} disagrees with {len(columns)} columns")
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path):
    """Read a provenance-headed CSV into (columns, string rows, provenance)."""
    path = Path(path)
    prov: dict[str, str] = {}
    columns: list[str] | None = None
    rows: list[list[str]] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                k, v = body.split("=", 1)
                prov[k.strip()] = v.strip()
            continue
        cells = line.split(",")
        if columns is None:
            columns = [c.strip() for c in cells]
            continue
        if len(cells) != len(columns):
            raise SchemaError(f"row width {len(cells)} disagrees with header in {path}")
        rows.append(cells)
    if columns is None:
        raise SchemaError(f"no header row in {path}")
    return columns, rows, prov


def write_scenarios(path, scen_set: ScenarioSet, prov: dict | None = None) -> None:
    """Scenario CSV: one row per (scenario, step) with loss and capacity.

    The scenario index is 0-based; the step column k is 1-based, matching the
    physical step numbering used by the trajectory CSV.
    """
    n, k_n = scen_set.n_scenarios, scen_set.n_steps
    idx = np.repeat(np.arange(n), k_n)
    steps = np.tile(np.arange(1, k_n + 1), n)
    rows = zip(idx.tolist(), steps.tolist(),
               scen_set.loss.reshape(-1).tolist(), scen_set.capacity.reshape(-1).tolist())
    write_csv(path, SCENARIO_COLUMNS, rows, prov)


def read_scenarios(path):
    """Load a scenario CSV back into a ScenarioSet, checking completeness."""
    columns, rows, prov = read_csv(path)
    if tuple(columns) != SCENARIO_COLUMNS:
        raise SchemaError(
            f"scenario CSV must have columns {','.join(SCENARIO_COLUMNS)}, got {','.join(columns)}")
    if not rows:
        raise SchemaError(f"scenario CSV {path} has no data rows")
    try:
        idx = np.array([int(r[0]) for r in rows])
        steps = np.array([int(r[1]) for r in rows])
        ell = np.array([float(r[2]) for r in rows])
        beta = np.array([float(r[3]) for r in rows])
    except ValueError as exc:
        raise SchemaError(f"unparsable cell in {path}: {exc}") from None
    n, k_n = int(idx.max()) + 1, int(steps.max())
    if len(rows) != n * k_n or idx.min() < 0 or steps.min() < 1:
        raise SchemaError(f"scenario CSV {path} is not a complete {n} x {k_n} grid")
    loss = np.full((n, k_n), np.nan)
    cap = np.full((n, k_n), np.nan)
    loss[idx, steps - 1] = ell
    cap[idx, steps - 1] = beta
    if np.any(np.isnan(loss)) or np.any(np.isnan(cap)):
        raise SchemaError(f"scenario CSV {path} has duplicate or missing (scenario, k) pairs")
    return ScenarioSet(loss, cap), prov


def decision_to_dict(dec: Decision) -> dict:
    return {
        "r": dec.r.tolist(),
        "b": dec.b.tolist(),
        "u": dec.u.tolist(),
        "xi": None if dec.xi is None else dec.xi.tolist(),
        "objective": float(dec.objective),
        "initial_soc": float(dec.initial_soc),
    }


def decision_from_dict(doc: dict) -> Decision:
    required = {"r", "b", "u", "xi", "objective", "initial_soc"}
    if not isinstance(doc, dict) or set(doc) - required or required - set(doc):
        raise SchemaError(f"decision document must have exactly the keys {sorted(required)}")
    return Decision(
        r=np.asarray(doc["r"], dtype=float),
        b=np.asarray(doc["b"], dtype=float),
        u=np.asarray(doc["u"], dtype=float),
        xi=None if doc["xi"] is None else np.asarray(doc["xi"], dtype=float),
        objective=float(doc["objective"]),
        initial_soc=float(doc["initial_soc"]),
    )


def report_to_dict(rep: SolveReport) -> dict:
    def _finite(v):
        return float(v) if v is not None and np.isfinite(v) else None

    return {
        "status": rep.status,
        "objective": _finite(rep.objective),
        "iterations": int(rep.iterations),
        "primal_residual": _finite(rep.primal_residual),
        "duality_gap": _finite(rep.duality_gap),
        "tie_broken": bool(rep.tie_broken),
        "message": str(rep.message),
    }


def write_json(path, payload: dict, prov: dict | None = None) -> None:
    doc = dict(payload)
    if prov:
        doc["provenance"] = prov
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path}: {exc}") from None


def payload_hash(path) -> str:
    """sha256 of a file's content with the provenance header stripped."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        doc = json.loads(text)
        doc.pop("provenance", None)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()
