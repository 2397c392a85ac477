"""Stated-preference panel dataset: schema, ingestion, descriptives and a
synthetic generator with known true parameters.

The dataset is a long/wide hybrid: one row per respondent-task, with the six
neighbourhood attributes repeated for each of the three unlabelled
alternatives (columns ``stores_A .. cost_C``), the observed choice and the
respondent covariates.  Missing values may occur in covariate columns only
and are stored as NaN.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
import pandas as pd

from .errors import (
    AllRowsDeleted,
    ArityMismatch,
    EmptyDataset,
    InvalidConfig,
    MalformedFile,
    UnknownTask,
    UnknownVariable,
    ZeroVariance,
)

ALTERNATIVES = ("A", "B", "C")
ATTRIBUTE_NAMES = ("Stores", "Transport", "City", "Noise", "Green", "Cost")
COVARIATE_NAMES = ("Age", "Woman", "Homeowner", "Carowner", "Respcity", "Job")

#: true-parameter names accepted by the synthetic generator
TRUE_PARAM_NAMES = (
    "asc_B", "asc_C",
    "b_stores", "b_transport", "b_city", "b_noise", "b_green", "b_cost",
)


@dataclass(frozen=True)
class AttributeDef:
    """One entry of the data dictionary."""

    name: str
    description: str
    kind: str  # {"attribute", "covariate", "id", "choice"}
    levels: tuple = ()
    numeric_codes: tuple = ()
    units: str = ""

    def __post_init__(self):
        if len(self.levels) != len(self.numeric_codes):
            raise InvalidConfig(f"{self.name}: levels/numeric_codes length mismatch")
        codes = list(self.numeric_codes)
        if any(b <= a for a, b in zip(codes, codes[1:])):
            raise InvalidConfig(f"{self.name}: numeric_codes must be strictly increasing")


def _dictionary() -> list[AttributeDef]:
    walk = ("2", "5", "10", "15")
    walk_codes = (2.0, 5.0, 10.0, 15.0)
    ordinal = (1.0, 2.0, 3.0, 4.0)
    return [
        AttributeDef("ID", "Respondent identifier", "id"),
        AttributeDef("TaskID", "Choice task identifier", "id"),
        AttributeDef("Stores", "Distance to grocery store in walking time",
                     "attribute", walk, walk_codes, "minutes"),
        AttributeDef("Transport", "Distance to public transport stop in walking time",
                     "attribute", walk, walk_codes, "minutes"),
        AttributeDef("City", "Distance to city centre",
                     "attribute", ("<1", "1 to 2", "3 to 4", ">4"), ordinal, "km"),
        AttributeDef("Noise", "Street traffic noise",
                     "attribute", ("None", "Little", "Medium", "High"), ordinal),
        AttributeDef("Green", "Green areas in residential area",
                     "attribute", ("None", "Few", "Some", "Many"), ordinal),
        AttributeDef("Cost", "Monthly change in housing cost vs current",
                     "attribute", ("-150", "-50", "50", "150"),
                     (-150.0, -50.0, 50.0, 150.0), "euros/month"),
        AttributeDef("Choice", "Chosen neighbourhood", "choice",
                     ("A", "B", "C"), (1.0, 2.0, 3.0)),
        AttributeDef("Age", "Age band of the respondent", "covariate",
                     ("<30", "30 to 50", ">=50"), (1.0, 2.0, 3.0)),
        AttributeDef("Woman", "Respondent is a woman", "covariate",
                     ("no", "yes"), (0.0, 1.0)),
        AttributeDef("Homeowner", "Respondent owns their home", "covariate",
                     ("no", "yes"), (0.0, 1.0)),
        AttributeDef("Carowner", "Respondent owns a car", "covariate",
                     ("no", "yes"), (0.0, 1.0)),
        AttributeDef("Respcity", "City of residence", "covariate",
                     ("city 1", "city 2", "city 3", "city 4"), (1.0, 2.0, 3.0, 4.0)),
        AttributeDef("Job", "Respondent is employed", "covariate",
                     ("no", "yes"), (0.0, 1.0)),
    ]


def attribute_column(attr: str, alt: str) -> str:
    return f"{attr.lower()}_{alt}"


def _columns() -> list[str]:
    cols = ["ID", "TaskID"]
    for alt in ALTERNATIVES:
        cols += [attribute_column(a, alt) for a in ATTRIBUTE_NAMES]
    cols.append("Choice")
    cols += list(COVARIATE_NAMES)
    return cols


COLUMNS = _columns()


@dataclass(frozen=True)
class ChoiceDataset:
    """Immutable stated-preference panel.

    ``df`` carries one row per respondent-task in the wide per-task layout;
    every operation returns a fresh value, the frame is never mutated.
    """

    df: pd.DataFrame
    dictionary: list[AttributeDef] = field(default_factory=_dictionary)

    @property
    def n_rows(self) -> int:
        return len(self.df)

    @property
    def n_individuals(self) -> int:
        return self.df["ID"].nunique()

    @property
    def n_tasks_per_individual(self) -> int:
        if len(self.df) == 0:
            return 0
        return int(self.df.groupby("ID").size().max())

    def __eq__(self, other):
        if not isinstance(other, ChoiceDataset):
            return NotImplemented
        return self.df.equals(other.df) and self.dictionary == other.dictionary


@dataclass(frozen=True)
class SyntheticConfig:
    """Configuration of the synthetic data generator.

    ``true_params`` are the fixed utility coefficients of the generating
    multinomial logit.  ``random_params`` optionally makes an attribute
    coefficient normally distributed across individuals (name -> (mean, sd)).
    ``class_mix`` optionally replaces ``true_params`` with a finite mixture:
    a list of (weight, params-dict) pairs, one per latent class.
    """

    n_individuals: int
    n_tasks: int
    true_params: dict = field(default_factory=dict)
    missing_rate: float = 0.0
    seed: int = 0
    random_params: dict = field(default_factory=dict)
    class_mix: tuple = ()

    def __post_init__(self):
        if self.n_individuals <= 0 or self.n_tasks <= 0:
            raise InvalidConfig("n_individuals and n_tasks must be positive")
        if not 0.0 <= self.missing_rate < 1.0:
            raise InvalidConfig("missing_rate must lie in [0, 1)")
        bad = set(self.true_params) - set(TRUE_PARAM_NAMES)
        if bad:
            raise InvalidConfig(f"unknown true_params: {sorted(bad)}")
        bad = set(self.random_params) - set(TRUE_PARAM_NAMES[2:])
        if bad:
            raise InvalidConfig(f"unknown random_params: {sorted(bad)}")
        for w, params in self.class_mix:
            if w <= 0:
                raise InvalidConfig("class_mix weights must be positive")
            if set(params) - set(TRUE_PARAM_NAMES):
                raise InvalidConfig("unknown class_mix parameter name")


# ---------------------------------------------------------------------------
# ingestion

def _empty_frame() -> pd.DataFrame:
    return pd.DataFrame({c: pd.Series(dtype=float) for c in COLUMNS})


def load_dataset(path) -> ChoiceDataset:
    """Read a dataset CSV.  Empty fields become NaN (ABSENT)."""
    try:
        raw = pd.read_csv(path, na_values=[""], keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise MalformedFile(f"{path}: no header row")
    if list(raw.columns) != COLUMNS:
        raise MalformedFile(f"{path}: header does not match the data dictionary")
    if len(raw) == 0:
        raise EmptyDataset(f"{path}: no data rows")
    df = pd.DataFrame(index=raw.index)
    for col in COLUMNS:
        series = pd.to_numeric(raw[col], errors="coerce")
        if col in ("ID", "TaskID", "Choice"):
            if series.isna().any():
                raise MalformedFile(f"{path}: non-numeric or absent values in {col}")
            df[col] = series.astype(np.int64)
        else:
            df[col] = series.astype(float)
            if col not in COVARIATE_NAMES and df[col].isna().any():
                raise MalformedFile(f"{path}: absent values in attribute column {col}")
    if not df["Choice"].isin([1, 2, 3]).all():
        raise MalformedFile(f"{path}: Choice outside {{1,2,3}}")
    if df.duplicated(["ID", "TaskID"]).any():
        raise MalformedFile(f"{path}: duplicate (ID, TaskID) pairs")
    return ChoiceDataset(df.reset_index(drop=True))


def save_dataset(ds: ChoiceDataset, path) -> None:
    """Write the dataset CSV; NaN is written as an empty field.

    Integral values are written without a decimal point so that a
    save/load round-trip is the identity.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in ds.df.itertuples(index=False):
            out = []
            for value in row:
                if isinstance(value, float) and math.isnan(value):
                    out.append("")
                elif float(value) == int(value):
                    out.append(str(int(value)))
                else:
                    out.append(repr(float(value)))
            writer.writerow(out)


# ---------------------------------------------------------------------------
# descriptives

def data_dictionary(ds: ChoiceDataset) -> list[AttributeDef]:
    return list(ds.dictionary)


def _resolve(ds: ChoiceDataset, name: str) -> np.ndarray:
    """Values for a variable: a frame column, or an attribute name pooled
    over the three alternatives."""
    if name in ds.df.columns:
        return ds.df[name].to_numpy(dtype=float)
    if name in ATTRIBUTE_NAMES:
        cols = [attribute_column(name, alt) for alt in ALTERNATIVES]
        return ds.df[cols].to_numpy(dtype=float).ravel(order="F")
    raise UnknownVariable(name)


def _variable_names(ds: ChoiceDataset) -> list[str]:
    return [d.name for d in ds.dictionary]


def summary_statistics(ds: ChoiceDataset, variable: str | None = None) -> pd.DataFrame:
    """Mean / median / min / max / sample sd per variable, NaN excluded."""
    names = [variable] if variable is not None else _variable_names(ds)
    rows = {}
    for name in names:
        values = _resolve(ds, name)
        present = values[~np.isnan(values)]
        if len(present) == 0:
            rows[name] = dict.fromkeys(("mean", "median", "min", "max", "sd"), np.nan)
            continue
        sd = float(np.std(present, ddof=1)) if len(present) > 1 else 0.0
        rows[name] = {
            "mean": float(np.mean(present)),
            "median": float(np.median(present)),
            "min": float(np.min(present)),
            "max": float(np.max(present)),
            "sd": sd,
        }
    return pd.DataFrame.from_dict(rows, orient="index")[["mean", "median", "min", "max", "sd"]]


def choice_shares(ds: ChoiceDataset) -> dict:
    if len(ds.df) == 0:
        raise EmptyDataset("no choice observations")
    counts = ds.df["Choice"].value_counts()
    total = len(ds.df)
    # exact rational shares, converted to float at the boundary
    return {
        alt: float(Fraction(int(counts.get(code, 0)), total))
        for alt, code in zip(ALTERNATIVES, (1, 2, 3))
    }


def missing_report(ds: ChoiceDataset) -> dict:
    return {col: int(ds.df[col].isna().sum()) for col in ds.df.columns}


def handle_missing(ds: ChoiceDataset, strategy: str) -> ChoiceDataset:
    """Delete rows with absent cells, or fill per-column with mean/mode/median."""
    df = ds.df
    if strategy == "delete":
        out = df.dropna()
        if len(out) == 0:
            raise AllRowsDeleted("delete-missing removed every row")
        return replace(ds, df=out.reset_index(drop=True))
    if strategy not in ("replace_mean", "replace_mode", "replace_median"):
        raise InvalidConfig(f"unknown strategy {strategy!r}")
    out = df.copy()
    for col in COVARIATE_NAMES:
        if not out[col].isna().any():
            continue
        present = out[col].dropna()
        if strategy == "replace_mean":
            fill = float(present.mean())
        elif strategy == "replace_median":
            fill = float(present.median())
        else:
            fill = float(present.mode().iloc[0])
        out[col] = out[col].fillna(fill)
    return replace(ds, df=out)


def correlation_matrix(ds: ChoiceDataset, variables: list) -> pd.DataFrame:
    """Pairwise-complete Pearson correlations."""
    series = {}
    for name in variables:
        series[name] = _resolve(ds, name)
    lengths = {len(v) for v in series.values()}
    if len(lengths) > 1:
        raise ArityMismatch("variables of different observation counts cannot be correlated")
    for name, v in series.items():
        present = v[~np.isnan(v)]
        if len(present) > 0 and float(np.std(present)) == 0.0:
            raise ZeroVariance(name)
    n = len(variables)
    mat = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            x, y = series[variables[i]], series[variables[j]]
            mask = ~(np.isnan(x) | np.isnan(y))
            if mask.sum() < 2:
                raise ArityMismatch(
                    f"fewer than 2 complete observations for ({variables[i]}, {variables[j]})")
            r = float(np.corrcoef(x[mask], y[mask])[0, 1])
            mat[i, j] = mat[j, i] = r
    return pd.DataFrame(mat, index=variables, columns=variables)


def _freedman_diaconis_bins(values: np.ndarray) -> int:
    q1, q3 = np.percentile(values, [25, 75])
    iqr = q3 - q1
    span = float(np.max(values) - np.min(values))
    if iqr <= 0 or span <= 0:
        return 5
    width = 2.0 * iqr * len(values) ** (-1.0 / 3.0)
    return int(np.clip(math.ceil(span / width), 5, 50))


def chart_data(ds: ChoiceDataset, chart: str, variables: list) -> dict:
    """Chart-ready payloads; the client never sees raw rows."""
    need = 2 if chart == "scatter" else 1
    if len(variables) != need:
        raise ArityMismatch(f"{chart} needs {need} variable(s), got {len(variables)}")
    if chart == "scatter":
        x, y = (_resolve(ds, v) for v in variables)
        if len(x) != len(y):
            raise ArityMismatch("scatter variables have different observation counts")
        mask = ~(np.isnan(x) | np.isnan(y))
        return {"chart": "scatter", "x_label": variables[0], "y_label": variables[1],
                "x": x[mask].tolist(), "y": y[mask].tolist()}

    values = _resolve(ds, variables[0])
    values = values[~np.isnan(values)]
    if len(values) == 0:
        raise EmptyDataset(f"no present values for {variables[0]}")
    if chart == "histogram":
        nbins = _freedman_diaconis_bins(values)
        counts, edges = np.histogram(values, bins=nbins)
        return {"chart": "histogram", "variable": variables[0],
                "bin_edges": edges.tolist(), "counts": counts.tolist()}
    if chart == "boxplot":
        q1, med, q3 = np.percentile(values, [25, 50, 75])
        iqr = q3 - q1
        lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = values[(values >= lo) & (values <= hi)]
        outliers = values[(values < lo) | (values > hi)]
        return {"chart": "boxplot", "variable": variables[0],
                "min": float(inside.min()), "q1": float(q1), "median": float(med),
                "q3": float(q3), "max": float(inside.max()),
                "outliers": sorted(outliers.tolist())}
    if chart in ("pie", "bar"):
        labels, counts = np.unique(values, return_counts=True)
        payload = {"chart": chart, "variable": variables[0],
                   "labels": labels.tolist(), "counts": counts.tolist()}
        if chart == "pie":
            payload["fractions"] = (counts / counts.sum()).tolist()
        return payload
    raise InvalidConfig(f"unknown chart type {chart!r}")


def sort_dataset(ds: ChoiceDataset, variable: str, order: str = "asc") -> ChoiceDataset:
    if variable not in ds.df.columns:
        raise UnknownVariable(variable)
    out = ds.df.sort_values(variable, ascending=(order != "desc"), kind="mergesort")
    return replace(ds, df=out.reset_index(drop=True))


def head(ds: ChoiceDataset, n: int = 5) -> pd.DataFrame:
    return ds.df.head(n).copy()


def choice_task_example(ds: ChoiceDataset, respondent: int, task: int) -> dict:
    """Render one choice task with raw level labels."""
    rows = ds.df[(ds.df["ID"] == respondent) & (ds.df["TaskID"] == task)]
    if len(rows) == 0:
        raise UnknownTask(f"respondent {respondent}, task {task}")
    row = rows.iloc[0]
    defs = {d.name: d for d in ds.dictionary}
    alternatives = {}
    for alt in ALTERNATIVES:
        rendered = {}
        for attr in ATTRIBUTE_NAMES:
            code = float(row[attribute_column(attr, alt)])
            d = defs[attr]
            label = dict(zip(d.numeric_codes, d.levels)).get(code, str(code))
            rendered[attr] = label
        alternatives[alt] = rendered
    return {"respondent": int(respondent), "task": int(task),
            "alternatives": alternatives,
            "choice": ALTERNATIVES[int(row["Choice"]) - 1]}


# ---------------------------------------------------------------------------
# synthetic generator

_COVARIATE_MARGINALS = {
    "Woman": ("bernoulli", 0.5),
    "Homeowner": ("bernoulli", 0.5),
    "Carowner": ("bernoulli", 0.6),
    "Job": ("bernoulli", 0.7),
    "Age": ("uniform", (1, 2, 3)),
    "Respcity": ("uniform", (1, 2, 3, 4)),
}

_PARAM_TO_ATTR = {
    "b_stores": "Stores", "b_transport": "Transport", "b_city": "City",
    "b_noise": "Noise", "b_green": "Green", "b_cost": "Cost",
}


def generate_synthetic(cfg: SyntheticConfig) -> ChoiceDataset:
    """Draw a full design and simulate choices from the generating logit.

    The draw order is fixed (attributes, covariates, class assignment,
    random coefficients, choices, missingness) so equal configs produce
    bit-identical datasets.
    """
    rng = np.random.default_rng(cfg.seed)
    n, t = cfg.n_individuals, cfg.n_tasks
    n_rows = n * t
    dictionary = _dictionary()
    defs = {d.name: d for d in dictionary}

    df = pd.DataFrame({
        "ID": np.repeat(np.arange(1, n + 1), t).astype(np.int64),
        "TaskID": np.tile(np.arange(1, t + 1), n).astype(np.int64),
    })
    x = {}  # (attr, alt) -> values
    for alt in ALTERNATIVES:
        for attr in ATTRIBUTE_NAMES:
            codes = np.asarray(defs[attr].numeric_codes)
            x[(attr, alt)] = codes[rng.integers(0, len(codes), size=n_rows)]

    cov = {}
    for name in COVARIATE_NAMES:
        kind, spec_ = _COVARIATE_MARGINALS[name]
        if kind == "bernoulli":
            values = (rng.random(n) < spec_).astype(float)
        else:
            values = np.asarray(spec_, dtype=float)[rng.integers(0, len(spec_), size=n)]
        cov[name] = np.repeat(values, t)

    # per-individual coefficient vectors
    betas = {p: np.full(n, float(cfg.true_params.get(p, 0.0))) for p in TRUE_PARAM_NAMES}
    if cfg.class_mix:
        weights = np.array([w for w, _ in cfg.class_mix], dtype=float)
        weights /= weights.sum()
        assignment = rng.choice(len(cfg.class_mix), size=n, p=weights)
        for c, (_, params) in enumerate(cfg.class_mix):
            mask = assignment == c
            for p in TRUE_PARAM_NAMES:
                betas[p][mask] = float(params.get(p, 0.0))
    for name, (mean, sd) in cfg.random_params.items():
        betas[name] = rng.normal(mean, sd, size=n)

    v = np.zeros((n_rows, 3))
    v[:, 1] += np.repeat(betas["asc_B"], t)
    v[:, 2] += np.repeat(betas["asc_C"], t)
    for p, attr in _PARAM_TO_ATTR.items():
        b = np.repeat(betas[p], t)
        for j, alt in enumerate(ALTERNATIVES):
            v[:, j] += b * x[(attr, alt)]
    v -= v.max(axis=1, keepdims=True)
    prob = np.exp(v)
    prob /= prob.sum(axis=1, keepdims=True)
    u = rng.random(n_rows)
    cum = np.cumsum(prob, axis=1)
    choice = (u[:, None] > cum).sum(axis=1) + 1  # 1..3

    for alt in ALTERNATIVES:
        for attr in ATTRIBUTE_NAMES:
            df[attribute_column(attr, alt)] = x[(attr, alt)].astype(float)
    df["Choice"] = choice.astype(np.int64)
    for name in COVARIATE_NAMES:
        values = cov[name].copy()
        if cfg.missing_rate > 0:
            mask = rng.random(n_rows) < cfg.missing_rate
            values[mask] = np.nan
        df[name] = values

    return ChoiceDataset(df[COLUMNS], dictionary)
