"""Run configuration: flat ``key = value`` files and their command-line twins."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

log = logging.getLogger(__name__)

STAGES = ("clean", "encode", "impute", "trim", "standardize", "correlate", "pca", "cluster", "summarize", "report")
MOVABLE = ("encode", "impute", "trim", "standardize")


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a pipeline run except where its output goes.

    Keys (file syntax ``key = value``; lines starting with ``#`` and dotted
    keys are ignored on load):

    input, schema          data CSV and its ``name,kind,role`` schema (schema may be empty: inferred)
    target                 dependent column used for record filtering and summaries
                           (falls back to the first dependent column when absent)
    seed                   64-bit seed for every random choice
    k                      cluster count or ``auto`` (elbow over k_min..k_max)
    k_min, k_max           elbow sweep range
    restarts, max_iter, tol, init   k-means controls
    refine                 polish each Lloyd fit with Hartigan single-point moves
    impute_k               neighbours for k-NN imputation
    trim_fraction          tail fraction removed per numeric variable
    winsorize              clip instead of dropping rows
    variance_threshold     cumulative explained variance used to pick PCA components
    cluster_space          ``pca`` (top components) or ``full`` (all standardized features)
    pca_input              ``standardized`` or ``raw`` (centred only)
    summary_m, nearest_m   rows per cluster for the summary table / highlighted in the scatter
    compare                ``auto`` or ``a,b`` cluster pair for the improvement line
    bins                   histogram bins
    stage_order            comma-separated stages; encode/impute/trim/standardize may be reordered
    """

    input: str = ""
    schema: str = ""
    target: str = "schp_total"
    seed: int = 42
    k: str = "auto"
    k_min: int = 1
    k_max: int = 10
    restarts: int = 10
    max_iter: int = 300
    tol: float = 1e-4
    init: str = "random"
    refine: bool = True
    impute_k: int = 5
    trim_fraction: float = 0.10
    winsorize: bool = False
    variance_threshold: float = 0.95
    cluster_space: str = "pca"
    pca_input: str = "standardized"
    summary_m: int = 7
    nearest_m: int = 10
    compare: str = "auto"
    bins: int = 30
    stage_order: str = ",".join(STAGES)

    def validate(self) -> RunConfig:
        if not self.input:
            raise ConfigError("no input file given")
        if self.k != "auto":
            try:
                if int(self.k) < 1:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"k must be a positive integer or 'auto', got {self.k!r}") from None
        if not 0.0 < self.trim_fraction < 0.5:
            raise ConfigError(f"trim_fraction must lie in (0, 0.5), got {self.trim_fraction}")
        if not 0.0 < self.variance_threshold <= 1.0:
            raise ConfigError(f"variance_threshold must lie in (0, 1], got {self.variance_threshold}")
        if self.impute_k < 1 or self.summary_m < 1 or self.nearest_m < 1 or self.restarts < 1 or self.bins < 1:
            raise ConfigError("impute_k, summary_m, nearest_m, restarts and bins must be positive")
        if self.k_min < 1 or self.k_min >= self.k_max:
            raise ConfigError(f"need 1 <= k_min < k_max, got {self.k_min}, {self.k_max}")
        if self.cluster_space not in ("pca", "full"):
            raise ConfigError("cluster_space must be 'pca' or 'full'")
        if self.pca_input not in ("standardized", "raw"):
            raise ConfigError("pca_input must be 'standardized' or 'raw'")
        if self.init not in ("random", "k-means++"):
            raise ConfigError("init must be 'random' or 'k-means++'")
        if self.compare != "auto":
            parts = self.compare.split(",")
            if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
                raise ConfigError(f"compare must be 'auto' or 'a,b', got {self.compare!r}")
        self.stages()
        return self

    def stages(self) -> list[str]:
        order = [s.strip() for s in self.stage_order.split(",") if s.strip()]
        if sorted(order) != sorted(STAGES):
            raise ConfigError(f"stage_order must be a permutation of {','.join(STAGES)}")
        fixed = [s for s in order if s not in MOVABLE]
        if fixed != [s for s in STAGES if s not in MOVABLE]:
            raise ConfigError("only encode, impute, trim and standardize may be reordered")
        if order[0] != "clean" or order.index("correlate") != len(MOVABLE) + 1:
            raise ConfigError("encode, impute, trim and standardize must sit between clean and correlate")
        if order.index("encode") > order.index("standardize"):
            raise ConfigError("encode must precede standardize")
        return order

    def lines(self) -> list[str]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            out.append(f"{f.name} = {text}")
        return out


def _coerce(name: str, text: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def parse_config_text(text: str) -> dict:
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if "." in key:
            continue
        if key not in known:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def load_config(path: str | Path) -> dict:
    try:
        return parse_config_text(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def merge(base: RunConfig, overrides: dict) -> RunConfig:
    clean = {k: v for k, v in overrides.items() if v is not None}
    return replace(base, **clean)


def record(key: str, value) -> str:
    """Manifest line for a non-config record; non-scalar values are JSON encoded."""
    if isinstance(value, float):
        text = format(value, ".17g")
    elif isinstance(value, (int, str)):
        text = str(value)
    else:
        text = json.dumps(value, sort_keys=True)
    return f"{key} = {text}"
