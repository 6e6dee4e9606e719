import csv
from pathlib import Path

import numpy as np
import pytest

from campclust import synth
from campclust.config import RunConfig
from campclust.pipeline import run_pipeline
from campclust.tabular import write_csv, write_schema


def read_csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@pytest.fixture(scope="session")
def default_data(tmp_path_factory):
    """The default synthetic table written to disk with its schema and labels."""
    root = tmp_path_factory.mktemp("synth")
    spec = synth.default_spec()
    table, labels = synth.generate(spec)
    write_csv(table, root / "synth.csv")
    write_schema(list(spec.schema), root / "schema.csv")
    return {"root": root, "spec": spec, "table": table, "labels": labels,
            "csv": root / "synth.csv", "schema": root / "schema.csv"}


@pytest.fixture(scope="session")
def default_run(default_data, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "run1"
    config = RunConfig(input=str(default_data["csv"]), schema=str(default_data["schema"]), seed=42).validate()
    return run_pipeline(config, out)


def planted_for(ids, table, labels):
    position = {v: i for i, v in enumerate(table["campaign"].values)}
    return np.array([labels[position[i]] for i in ids])


def tree_bytes(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
