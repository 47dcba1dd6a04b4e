"""Readers for the experiment output contract (trajectory CSV + index JSON).

Only the public files are touched, never any library internals; every reader
validates the schema tag / column header and names the offending field on
mismatch.
"""

import csv
import json
from pathlib import Path

SCHEMA_TAG = "lowrank-phases/v1"

TRAJECTORY_COLUMNS = [
    "t",
    "loss",
    "test_error",
    "test_error_rel",
    "sigma_rstar",
    "sigma_rstar_plus1",
    "spec_norm",
    "angle_L_Lt",
    "angle_X_Lt",
    "signal_sigma_min",
    "noise_spec",
    "angle_X_signal",
    "sigma_min_VXU",
]

THETA_COLUMNS = ["t", "theta_gd", "theta_p", "err_norm", "err_bound"]


class SchemaError(ValueError):
    pass


def read_csv(path, expected_columns):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing input file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        for want, got in zip(expected_columns, header + [None] * len(expected_columns)):
            if want != got:
                raise SchemaError(f"{path}: expected column '{want}', found '{got}'")
        if len(header) != len(expected_columns):
            raise SchemaError(f"{path}: unexpected extra column '{header[len(expected_columns)]}'")
        rows = [[float(x) for x in row] for row in reader if row]
    cols = {name: [row[i] for row in rows] for i, name in enumerate(expected_columns)}
    return cols


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing input file: {path}")
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    tag = data.get("schema")
    if tag != SCHEMA_TAG:
        raise SchemaError(f"{path}: expected schema '{SCHEMA_TAG}', found '{tag}'")
    return data


def read_trajectory(run_dir):
    return read_csv(Path(run_dir) / "trajectory.csv", TRAJECTORY_COLUMNS)


def read_summary(run_dir):
    return read_json(Path(run_dir) / "summary.json")


def read_theta(compare_dir):
    return read_csv(Path(compare_dir) / "theta.csv", THETA_COLUMNS)


def read_index(sweep_dir):
    return read_json(Path(sweep_dir) / "index.json")
