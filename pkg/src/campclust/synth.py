"""Synthetic campaign tables with planted cluster archetypes and MCAR missingness.

The default spec plants the three campaign archetypes (fulfilment method,
giveaway network, run length, allocated deliveries, participations) and
blanks cells at the reference non-null proportions, giving the test suite
a ground truth the real data cannot provide.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import SpecError
from .rng import SplitMix64, derive_seed
from .tabular import Column, ColumnKind, Role, SchemaEntry, Table

# non-null counts out of 907 rows
NON_NULL = {"giveaways": 646, "fm": 729, "ad": 591}
RECORDS = {"schm_total": 907, "schp_total": 654, "sche_total": 612}
TOTAL_RECORDS = 907


@dataclass(frozen=True)
class ClusterArchetype:
    label: int
    weight: float
    categorical_values: dict[str, str] = field(default_factory=dict)
    numeric_means: dict[str, float] = field(default_factory=dict)
    numeric_stds: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int
    archetypes: tuple[ClusterArchetype, ...]
    schema: tuple[SchemaEntry, ...]
    missing_rates: dict[str, float] = field(default_factory=dict)
    categorical_noise: float = 0.0
    seed: int = 42
    nonnegative: tuple[str, ...] = ()
    id_column: str | None = "campaign"

    def validate(self) -> None:
        if self.n_rows < 1:
            raise SpecError("n_rows must be positive")
        if not self.archetypes:
            raise SpecError("at least one archetype is required")
        if abs(sum(a.weight for a in self.archetypes) - 1.0) > 1e-9:
            raise SpecError("archetype weights must sum to 1")
        if any(not 0 < a.weight <= 1 for a in self.archetypes):
            raise SpecError("archetype weights must lie in (0, 1]")
        if not 0.0 <= self.categorical_noise < 1.0:
            raise SpecError("categorical_noise must lie in [0, 1)")
        names = {e.name for e in self.schema}
        for col, rate in self.missing_rates.items():
            if col not in names:
                raise SpecError(f"missing rate given for unknown column {col!r}")
            if not 0.0 <= rate < 1.0:
                raise SpecError(f"missing rate for {col!r} must lie in [0, 1), got {rate}")
        for entry in self.schema:
            for a in self.archetypes:
                if entry.kind is ColumnKind.NUMERIC:
                    if entry.name not in a.numeric_means or not a.numeric_stds.get(entry.name, 0) > 0:
                        raise SpecError(f"archetype {a.label} lacks mean/positive std for {entry.name!r}")
                elif entry.kind is ColumnKind.CATEGORICAL and entry.name not in a.categorical_values:
                    raise SpecError(f"archetype {a.label} lacks a value for {entry.name!r}")

    def to_json(self) -> str:
        data = asdict(self)
        data["schema"] = [[e.name, e.kind.value, e.role.value] for e in self.schema]
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> SynthSpec:
        try:
            data = json.loads(text)
            data["schema"] = tuple(SchemaEntry.of(*e) for e in data["schema"])
            data["archetypes"] = tuple(ClusterArchetype(**a) for a in data["archetypes"])
            data["nonnegative"] = tuple(data.get("nonnegative", ()))
            spec = cls(**data)
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"bad synthetic spec: {exc}") from None
        spec.validate()
        return spec

    @property
    def planted_k(self) -> int:
        return len(self.archetypes)


def _universe(spec: SynthSpec, column: str) -> list[str]:
    return sorted({a.categorical_values[column] for a in spec.archetypes})


def generate(spec: SynthSpec) -> tuple[Table, np.ndarray]:
    """Draw ``spec.n_rows`` rows and return them with the planted labels.

    Sampling order is fixed: labels, then each schema column in order, all
    from one SplitMix64 stream; missingness uses a derived stream.
    """
    spec.validate()
    rng = SplitMix64(spec.seed)
    n = spec.n_rows
    cum = np.cumsum([a.weight for a in spec.archetypes])
    cum[-1] = 1.0
    labels = np.searchsorted(cum, rng.random(n), side="right").astype(np.int64)
    columns = []
    for entry in spec.schema:
        if entry.kind is ColumnKind.IDENTIFIER:
            width = max(4, len(str(n - 1)))
            columns.append(Column.identifier(entry.name, [f"c{i:0{width}d}" for i in range(n)]))
        elif entry.kind is ColumnKind.NUMERIC:
            means = np.array([a.numeric_means[entry.name] for a in spec.archetypes])
            stds = np.array([a.numeric_stds[entry.name] for a in spec.archetypes])
            values = means[labels] + stds[labels] * rng.normal(n)
            if entry.name in spec.nonnegative:
                values = np.maximum(values, 0.0)
            columns.append(Column(entry.name, entry.kind, entry.role, values))
        else:
            base = [spec.archetypes[l].categorical_values[entry.name] for l in labels]
            universe = _universe(spec, entry.name)
            flip = rng.random(n) < spec.categorical_noise
            picks = rng.integers(len(universe), n)
            cells = [universe[p] if f else b for b, f, p in zip(base, flip, picks)]
            columns.append(Column(entry.name, entry.kind, entry.role, cells))
    table = Table(tuple(columns))
    if spec.missing_rates:
        table = inject_missing(table, spec.missing_rates, derive_seed(spec.seed, 1))
    return table, labels


def inject_missing(table: Table, rates: Mapping[str, float], seed: int) -> Table:
    """Blank each cell of the named columns independently with that column's rate."""
    for col, rate in rates.items():
        if col not in table:
            raise SpecError(f"missing rate given for unknown column {col!r}")
        if not 0.0 <= rate < 1.0:
            raise SpecError(f"missing rate for {col!r} must lie in [0, 1), got {rate}")
    rng = SplitMix64(seed)
    replaced = []
    for col in table.columns:
        if col.name not in rates:
            continue
        blank = rng.random(table.row_count) < rates[col.name]
        if col.kind is ColumnKind.NUMERIC:
            values = np.where(blank, np.nan, col.values)
        else:
            values = [None if b else v for b, v in zip(blank, col.values)]
        replaced.append(col.replace(values))
    return table.with_columns(replaced)


# ----------------------------------------------------------------- presets

FCD_SCHEMA = (
    SchemaEntry("campaign", ColumnKind.IDENTIFIER, Role.IDENTIFIER),
    SchemaEntry("cf_total_days", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("cf_total_seconds", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("cf_type", ColumnKind.CATEGORICAL, Role.INDEPENDENT),
    SchemaEntry("giveaways_categories", ColumnKind.CATEGORICAL, Role.INDEPENDENT),
    SchemaEntry("giveaways_totals", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("pt_categories", ColumnKind.CATEGORICAL, Role.INDEPENDENT),
    SchemaEntry("pt_totals", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("fm_categories", ColumnKind.CATEGORICAL, Role.INDEPENDENT),
    SchemaEntry("fm_total", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("sch_categories", ColumnKind.CATEGORICAL, Role.INDEPENDENT),
    SchemaEntry("sch_total", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("ad_categories", ColumnKind.CATEGORICAL, Role.INDEPENDENT),
    SchemaEntry("ad_total", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("schm_total", ColumnKind.NUMERIC, Role.DEPENDENT),
    SchemaEntry("schp_total", ColumnKind.NUMERIC, Role.DEPENDENT),
    SchemaEntry("sche_total", ColumnKind.NUMERIC, Role.DEPENDENT),
)

# fulfilment, giveaway network, run days, allocated deliveries, participations
_ARCHETYPE_TABLE = (
    ("Delivery", "Delivery Network 1", 3.00, 791.66, 3367.00),
    ("Delivery + Mailed", "Delivery Network 1, 2", 1.57, 1267.14, 3984.71),
    ("Delivery", "Delivery Network 3", 2.14, 379.33, 1018.28),
)

# columns shared by every archetype: (mean, std)
_SHARED_NUMERIC = {
    "giveaways_totals": (40.0, 8.0),
    "pt_totals": (25.0, 5.0),
    "fm_total": (60.0, 12.0),
    "sch_total": (3.0, 0.6),
}


def _missing_rate(count: int) -> float:
    return 1.0 - count / TOTAL_RECORDS


def fcd_missing_rates() -> dict[str, float]:
    """Independent-variable missingness at the reference non-null proportions."""
    rates = {}
    for prefix, col_pair in (
        ("giveaways", ("giveaways_categories", "giveaways_totals")),
        ("fm", ("fm_categories", "fm_total")),
        ("ad", ("ad_categories", "ad_total")),
    ):
        for col in col_pair:
            rates[col] = _missing_rate(NON_NULL[prefix])
    return rates


def target_missing_rates() -> dict[str, float]:
    """Dependent-variable missingness reproducing the per-target record counts."""
    return {name: _missing_rate(count) for name, count in RECORDS.items() if count < TOTAL_RECORDS}


def default_spec(n_rows: int = 900, seed: int = 42, categorical_noise: float = 0.02,
                 with_target_missing: bool = False) -> SynthSpec:
    archetypes = []
    for label, (fm, give, days, ad, part) in enumerate(_ARCHETYPE_TABLE):
        means = {
            "cf_total_days": days,
            "cf_total_seconds": days * 86400.0,
            "ad_total": ad,
            "schm_total": part * 1.8,
            "schp_total": part,
            "sche_total": part * 4.5,
        }
        stds = {
            "cf_total_days": 0.08,
            "cf_total_seconds": 0.08 * 86400.0,
            "ad_total": 0.04 * ad,
            "schm_total": 0.03 * part * 1.8,
            "schp_total": 0.03 * part,
            "sche_total": 0.03 * part * 4.5,
        }
        for col, (mu, sd) in _SHARED_NUMERIC.items():
            means[col] = mu
            stds[col] = sd
        cats = {
            "cf_type": "Timed",
            "giveaways_categories": give,
            "pt_categories": "Delivery",
            "fm_categories": fm,
            "sch_categories": "Twitter",
            "ad_categories": "Allocated",
        }
        archetypes.append(ClusterArchetype(label, 1.0 / 3.0, cats, means, stds))
    rates = fcd_missing_rates()
    if with_target_missing:
        rates.update(target_missing_rates())
    return SynthSpec(
        n_rows=n_rows,
        archetypes=tuple(archetypes),
        schema=FCD_SCHEMA,
        missing_rates=rates,
        categorical_noise=categorical_noise,
        seed=seed,
        nonnegative=tuple(e.name for e in FCD_SCHEMA if e.kind is ColumnKind.NUMERIC),
    )


VARIANCE_SCHEMA = (
    SchemaEntry("campaign", ColumnKind.IDENTIFIER, Role.IDENTIFIER),
    SchemaEntry("fm_score", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("giveaways_score", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("cf_total_days", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("ad_total", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("pt_totals", ColumnKind.NUMERIC, Role.INDEPENDENT),
    SchemaEntry("sch_total", ColumnKind.NUMERIC, Role.INDEPENDENT),
)


def variance_share_spec(n_rows: int = 900, seed: int = 42) -> SynthSpec:
    """Complete numeric table whose standardized PCA spectrum mimics the four-component shape.

    Three archetypes spread over two directions carry most of the variance;
    two noisier columns feed the third and fourth components, so two
    components explain a bit under 90% and four pass 95%.
    """
    centres = ((0.0, 0.0), (3.0, 0.0), (1.0, 2.6))
    # (column, loading on direction 1, loading on direction 2, within-cluster std)
    layout = (
        ("fm_score", 1.0, 0.0, 0.2),
        ("giveaways_score", 0.0, 1.0, 0.2),
        ("cf_total_days", 0.7, 0.5, 0.2),
        ("ad_total", 0.5, -0.6, 0.2),
        ("pt_totals", 0.4, 0.4, 0.6),
        ("sch_total", -0.4, 0.3, 0.55),
    )
    archetypes = []
    for label, (u, v) in enumerate(centres):
        means = {name: a * u + b * v for name, a, b, _ in layout}
        stds = {name: s for name, _, _, s in layout}
        archetypes.append(ClusterArchetype(label, 1.0 / 3.0, {}, means, stds))
    return SynthSpec(n_rows=n_rows, archetypes=tuple(archetypes), schema=VARIANCE_SCHEMA, seed=seed)


PRESETS = {"default": default_spec, "variance": variance_share_spec}


def load_spec(path: str | Path) -> SynthSpec:
    return SynthSpec.from_json(Path(path).read_text(encoding="utf-8"))


def with_seed(spec: SynthSpec, seed: int) -> SynthSpec:
    return replace(spec, seed=seed)

