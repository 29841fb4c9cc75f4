"""Dataset container, CSV ingestion and the propensity design matrix."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .config import ROLES, AnalysisConfig, Categorical, CovariateSpec
from .errors import (
    ConfigError,
    DataError,
    EmptyGroup,
    InvalidLevel,
    MissingColumn,
    MissingValue,
    NonBinaryGroup,
    RankDeficient,
)

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "."})
RANK_TOL = 1e-10


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Analysis records: group indicator, outcome and (expanded) covariates.

    Arrays are stored read-only so a Dataset can be shared freely. Categorical
    covariates appear as indicator columns named ``"name[level]"``; ``sources``
    maps each declared covariate to its expanded column names.
    """

    group: np.ndarray
    outcome: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...]
    roles: dict
    sources: dict = field(default_factory=dict)
    group_name: str = "group"
    outcome_name: str = "outcome"

    def __post_init__(self):
        z = np.asarray(self.group)
        if not np.all((z == 0) | (z == 1)):
            bad = int(np.flatnonzero((z != 0) & (z != 1))[0])
            raise NonBinaryGroup(bad + 1, z[bad])
        object.__setattr__(self, "group", _frozen(z, np.int64))
        object.__setattr__(self, "outcome", _frozen(self.outcome, np.float64))
        x = np.asarray(self.covariates, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if x.size else x.reshape(len(self.group), 0)
        object.__setattr__(self, "covariates", _frozen(x, np.float64))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        n = self.group.shape[0]
        if self.outcome.shape != (n,) or self.covariates.shape != (n, len(self.covariate_names)):
            raise DataError(
                f"inconsistent shapes: group {self.group.shape}, outcome {self.outcome.shape}, "
                f"covariates {self.covariates.shape} for {len(self.covariate_names)} names"
            )
        if len(set(self.covariate_names)) != len(self.covariate_names):
            raise DataError("duplicate covariate names")
        for g in (1, 0):
            if not np.any(self.group == g):
                raise EmptyGroup(g)
        for arr, what in ((self.outcome, self.outcome_name), (self.covariates, "covariates")):
            if not np.all(np.isfinite(arr)):
                row = int(np.flatnonzero(~np.isfinite(arr.reshape(n, -1)).all(axis=1))[0])
                raise MissingValue(row + 1, what)
        if set(self.roles) != set(self.covariate_names):
            raise DataError("roles must assign exactly one role to every covariate column")
        bad_roles = {r for r in self.roles.values() if r not in ROLES}
        if bad_roles:
            raise DataError(f"unknown roles {sorted(bad_roles)}")
        if not self.sources:
            object.__setattr__(self, "sources", {c: (c,) for c in self.covariate_names})

    @property
    def n_units(self) -> int:
        return int(self.group.shape[0])

    def column(self, name: str) -> np.ndarray:
        try:
            return self.covariates[:, self.covariate_names.index(name)]
        except ValueError:
            raise MissingColumn(name) from None

    def expanded(self, name: str) -> tuple[str, ...]:
        """Column names carrying covariate ``name`` (itself, or its indicators)."""
        if name in self.sources:
            return tuple(self.sources[name])
        if name in self.covariate_names:
            return (name,)
        raise MissingColumn(name)

    def columns_with_role(self, role: str) -> tuple[str, ...]:
        return tuple(c for c in self.covariate_names if self.roles[c] == role)

    def matrix(self, names) -> np.ndarray:
        idx = [self.covariate_names.index(c) for c in names]
        return self.covariates[:, idx]

    def take(self, index) -> "Dataset":
        """Row subset (or resample, when ``index`` repeats rows)."""
        index = np.asarray(index)
        return Dataset(
            self.group[index], self.outcome[index], self.covariates[index],
            self.covariate_names, self.roles, self.sources, self.group_name, self.outcome_name,
        )

    def with_outcome(self, y) -> "Dataset":
        return Dataset(
            self.group, y, self.covariates, self.covariate_names, self.roles,
            self.sources, self.group_name, self.outcome_name,
        )

    def flipped(self) -> "Dataset":
        """Same records with the group labels exchanged."""
        return Dataset(
            1 - self.group, self.outcome, self.covariates, self.covariate_names,
            self.roles, self.sources, self.group_name, self.outcome_name,
        )

    def numeric_config(self) -> dict:
        """Config dict that reloads a file written by :func:`write_dataset`."""
        return {
            "group": self.group_name,
            "outcome": self.outcome_name,
            "covariates": {c: {"role": self.roles[c]} for c in self.covariate_names},
        }


def _parse_float(text, row, column):
    if text.strip().lower() in MISSING_TOKENS:
        raise MissingValue(row, column)
    try:
        return float(text)
    except ValueError:
        raise DataError(f"row {row}, column {column!r}: cannot parse {text!r} as a number") from None


def load_dataset(path, config) -> Dataset:
    """Read a CSV file and validate it against an analysis configuration.

    ``config`` is an :class:`AnalysisConfig` or a plain dict following the
    config schema. Only the group, outcome and declared covariate columns are
    read; other columns are ignored. Row numbers in errors count data rows
    from 1 (the header is not counted).
    """
    if isinstance(config, dict):
        config = AnalysisConfig.from_dict(config)
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty; a header row is required") from None
        rows = list(reader)

    wanted = [config.group, config.outcome, *config.covariates]
    for col in wanted:
        if col not in header:
            raise MissingColumn(col)
    pos = {h: i for i, h in enumerate(header)}
    expansion = config.expansion()

    z, y = [], []
    cols = {name: [] for name in config.covariates}
    for r, rec in enumerate(rows, start=1):
        if not rec or all(not v.strip() for v in rec):
            continue
        if len(rec) != len(header):
            raise DataError(f"row {r} has {len(rec)} fields, header has {len(header)}")
        g = _parse_float(rec[pos[config.group]], r, config.group)
        if g not in (0.0, 1.0):
            raise NonBinaryGroup(r, rec[pos[config.group]])
        z.append(int(g))
        y.append(_parse_float(rec[pos[config.outcome]], r, config.outcome))
        for name in config.covariates:
            raw = rec[pos[name]]
            if name in expansion:
                level = raw.strip()
                if level.lower() in MISSING_TOKENS:
                    raise MissingValue(r, name)
                if level not in expansion[name].levels:
                    raise InvalidLevel(r, name, level)
                cols[name].append(level)
            else:
                cols[name].append(_parse_float(raw, r, name))

    if not z:
        raise DataError(f"{path} has no data rows")
    names, blocks, roles, sources = [], [], {}, {}
    for name, spec in config.covariates.items():
        if name in expansion:
            rule: Categorical = expansion[name]
            values = np.array(cols[name], dtype=object)
            expanded = []
            for level in rule.indicator_levels():
                cname = f"{name}[{level}]"
                blocks.append((values == level).astype(np.float64))
                expanded.append(cname)
        else:
            blocks.append(np.array(cols[name], dtype=np.float64))
            expanded = [name]
        for cname in expanded:
            roles[cname] = spec["role"]
        names.extend(expanded)
        sources[name] = tuple(expanded)
    x = np.column_stack(blocks) if blocks else np.empty((len(z), 0))
    return Dataset(
        np.array(z), np.array(y), x, tuple(names), roles, sources,
        group_name=config.group, outcome_name=config.outcome,
    )


def write_dataset(ds: Dataset, path) -> None:
    """Write the expanded dataset as CSV; floats use shortest round-trip repr."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ds.group_name, ds.outcome_name, *ds.covariate_names])
        for i in range(ds.n_units):
            w.writerow([int(ds.group[i]), repr(float(ds.outcome[i]))]
                       + [repr(float(v)) for v in ds.covariates[i]])


def design_columns(ds: Dataset, spec: CovariateSpec) -> tuple[str, ...]:
    cols = []
    for name in spec.selected:
        cols.extend(ds.expanded(name))
    return tuple(cols)


def check_full_rank(x: np.ndarray, names) -> None:
    """Raise :class:`RankDeficient` for constant or linearly dependent columns.

    Column 0 is expected to be the intercept. Columns are scaled to unit norm
    and ranked by pivoted QR with relative tolerance ``RANK_TOL``.
    """
    names = list(names)
    const = [names[j] for j in range(1, x.shape[1]) if np.ptp(x[:, j]) == 0]
    if const:
        raise RankDeficient(const)
    norms = np.linalg.norm(x, axis=0)
    if np.any(norms == 0):
        raise RankDeficient([names[j] for j in np.flatnonzero(norms == 0)])
    if x.shape[0] < x.shape[1]:
        raise RankDeficient(names[x.shape[0]:])
    r, piv = scipy.linalg.qr(x / norms, mode="r", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > RANK_TOL * d[0]))
    if rank < x.shape[1]:
        raise RankDeficient([names[j] for j in piv[rank:]])


def design_matrix(ds: Dataset, spec: CovariateSpec) -> np.ndarray:
    """Intercept column followed by the selected (expanded) covariates."""
    cols = design_columns(ds, spec)
    x = np.column_stack([np.ones(ds.n_units), ds.matrix(cols)])
    check_full_rank(x, ("(intercept)",) + cols)
    return x


def covariate_spec(ds: Dataset, selected=None) -> CovariateSpec:
    """Spec selecting ``selected`` (default: the health-status columns)."""
    if selected is None:
        selected = ds.columns_with_role("health_status")
    unknown = [s for s in selected if s not in ds.sources and s not in ds.covariate_names]
    if unknown:
        raise ConfigError(f"unknown covariates {unknown}")
    return CovariateSpec(tuple(selected))
