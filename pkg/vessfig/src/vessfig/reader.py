"""CSV ingestion for the four figure kinds.

The planner's CSV files carry ``# key=value`` provenance lines before the
header row; those are skipped here.  Each figure kind declares the columns
it needs; missing columns and unparsable cells raise SchemaMismatch naming
the offending column.  Extra columns are ignored.
"""

import csv

from .errors import SchemaMismatch

__all__ = ["SCHEMAS", "load_columns", "read_table", "split_ood_rows"]

SCHEMAS = {
    "tradeoff": ("R", "N", "profit", "violation"),
    "soc": ("k", "b", "r", "u"),
    "retail": ("k", "b", "r", "u"),
    "ood": ("variant", "rate"),
}

# Column parsed as text rather than a number.
_TEXT_COLUMNS = {"variant"}


def read_table(path):
    """Header and data rows of a CSV file, provenance lines skipped."""
    with open(path, newline="") as handle:
        rows = [row for row in csv.reader(handle)
                if row and not row[0].startswith("#")]
    if not rows:
        raise SchemaMismatch(f"{path} has no header row", column="")
    return rows[0], rows[1:]


def load_columns(kind: str, path) -> dict:
    """Columns required by the kind, as name -> list of parsed values."""
    if kind not in SCHEMAS:
        raise ValueError(f"kind must be one of {tuple(SCHEMAS)}, got {kind!r}")
    header, rows = read_table(path)
    index = {}
    for name in SCHEMAS[kind]:
        if name not in header:
            raise SchemaMismatch(
                f"{kind} figure needs column '{name}'; {path} has "
                f"{','.join(header) or 'no columns'}", column=name)
        index[name] = header.index(name)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaMismatch(
                f"{path} data row {i} has {len(row)} cells, header has "
                f"{len(header)}", column=header[min(len(row), len(header) - 1)])
    out = {}
    for name, j in index.items():
        cells = [row[j] for row in rows]
        if name in _TEXT_COLUMNS:
            out[name] = cells
            continue
        values = []
        for i, cell in enumerate(cells):
            try:
                values.append(float(cell))
            except ValueError:
                raise SchemaMismatch(
                    f"column '{name}' has non-numeric value {cell!r} at data "
                    f"row {i} of {path}", column=name) from None
        out[name] = values
    return out


def split_ood_rows(columns: dict, path) -> tuple:
    """Separate variant bars from the certified-bound row.

    Returns (labels, rates, bound); bound is None when the file has no rows
    at all (the axes-only case).  Data rows without exactly one bound row
    violate the contract.
    """
    labels, rates, bounds = [], [], []
    for label, rate in zip(columns["variant"], columns["rate"]):
        if label == "bound":
            bounds.append(rate)
        else:
            labels.append(label)
            rates.append(rate)
    if not labels and not bounds:
        return [], [], None
    if len(bounds) != 1:
        raise SchemaMismatch(
            f"ood figure needs exactly one 'bound' row in column 'variant'; "
            f"{path} has {len(bounds)}", column="variant")
    return labels, rates, bounds[0]
