"""Panel data model, ingestion, variable derivation and design matrices.

A :class:`PanelDataset` holds an unbalanced firm-year panel. Rows are kept
sorted by ``(firm_id, year)``; missing cells are ``NaN`` and are never
imputed. :func:`build_design` turns a dataset plus a
:class:`~bpvarx.model.ModelSpec` into the stacked matrices of a pooled VARX.

Lag block layout
----------------
Columns of ``DesignMatrices.lagged`` are variable-major, lag-minor::

    y1.L1, y1.L2, ..., y1.LL, y2.L1, ..., ym.LL

so the column for variable ``j`` (0-based) at lag ``l`` (1-based) is
``j * L + (l - 1)``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DataWarning,
    DuplicateObservation,
    EmptyDesign,
    EmptySubsample,
    InvalidRule,
    SchemaMismatch,
    UndefinedRatio,
)
from .model import ModelSpec

ROLES = ("endogenous", "exogenous", "key")
TRANSFORMS = ("level", "first-difference", "natural-log", "reverse-rank-501", "percent-ratio")
MISSING_TOKENS = ("", "NA")
KEY_COLUMNS = ("firm_id", "year")


@dataclass(frozen=True)
class VariableSpec:
    """A named variable, its role, and how it is derived from source columns.

    ``source`` defaults to ``(name,)``. ``percent-ratio`` takes two sources,
    ``(owned, total)``.
    """

    name: str
    role: str = "exogenous"
    transform: str = "level"
    source: tuple[str, ...] = ()

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"transform must be one of {TRANSFORMS}, got {self.transform!r}")
        object.__setattr__(self, "source", tuple(self.source) or (self.name,))
        n_src = 2 if self.transform == "percent-ratio" else 1
        if len(self.source) != n_src:
            raise ValueError(f"{self.transform} needs {n_src} source column(s)")


class PanelDataset:
    """Immutable unbalanced firm-year panel.

    Parameters
    ----------
    frame : DataFrame
        Must contain ``firm_id`` and ``year`` columns; all other columns are
        treated as real-valued variables.
    roles : mapping, optional
        Variable name to declared role.
    warnings : mapping, optional
        Per-column count of cells turned into missing values.
    """

    def __init__(self, frame: pd.DataFrame, roles: Mapping[str, str] | None = None,
                 warnings: Mapping[str, int] | None = None):
        missing = [c for c in KEY_COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaMismatch(f"missing key columns: {missing}")
        df = frame.copy()
        df["firm_id"] = df["firm_id"].astype(str)
        df["year"] = df["year"].astype(np.int64)
        dup = df.duplicated(subset=list(KEY_COLUMNS), keep=False)
        if dup.any():
            first = df.loc[dup, ["firm_id", "year"]].iloc[0]
            raise DuplicateObservation(
                f"duplicate observation for firm {first['firm_id']!r}, year {first['year']}"
            )
        variables = [c for c in df.columns if c not in KEY_COLUMNS]
        for v in variables:
            df[v] = pd.to_numeric(df[v], errors="raise").astype(np.float64)
        df = df[list(KEY_COLUMNS) + variables]
        self._frame = df.sort_values(list(KEY_COLUMNS), kind="mergesort").reset_index(drop=True)
        self._roles = {v: (roles or {}).get(v, "exogenous") for v in variables}
        self.warnings = dict(warnings or {})

    # -- basic accessors -------------------------------------------------
    @property
    def frame(self) -> pd.DataFrame:
        """A copy of the underlying sorted frame."""
        return self._frame.copy()

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self._roles)

    @property
    def roles(self) -> dict[str, str]:
        return dict(self._roles)

    @property
    def n_obs(self) -> int:
        return len(self._frame)

    @property
    def firms(self) -> tuple[str, ...]:
        return tuple(pd.unique(self._frame["firm_id"]))

    @property
    def n_firms(self) -> int:
        return self._frame["firm_id"].nunique()

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(int(y) for y in np.unique(self._frame["year"]))

    def column(self, name: str) -> np.ndarray:
        if name not in self._frame.columns:
            raise KeyError(name)
        return self._frame[name].to_numpy()

    def firm_codes(self) -> np.ndarray:
        return pd.factorize(self._frame["firm_id"], sort=False)[0]

    def gapped_firms(self) -> tuple[str, ...]:
        """Firms whose observed years are not consecutive."""
        df = self._frame
        jump = df.groupby("firm_id", sort=False)["year"].diff()
        return tuple(pd.unique(df.loc[jump > 1, "firm_id"]))

    def series(self, name: str) -> dict[str, np.ndarray]:
        """Per-firm arrays of ``name`` (in year order)."""
        return {f: g[name].to_numpy() for f, g in self._frame.groupby("firm_id", sort=False)}

    # -- derived datasets ------------------------------------------------
    def with_columns(self, columns: Mapping[str, np.ndarray], roles: Mapping[str, str] | None = None,
                     warnings: Mapping[str, int] | None = None) -> "PanelDataset":
        df = self._frame.copy()
        for name, values in columns.items():
            df[name] = np.asarray(values, dtype=np.float64)
        new_roles = dict(self._roles)
        new_roles.update(roles or {})
        counts = dict(self.warnings)
        for k, v in (warnings or {}).items():
            counts[k] = counts.get(k, 0) + v
        return PanelDataset(df, new_roles, counts)

    def select_rows(self, mask) -> "PanelDataset":
        mask = np.asarray(mask, dtype=bool)
        return PanelDataset(self._frame.loc[mask], self._roles, self.warnings)

    def select_firms(self, firms: Iterable[str]) -> "PanelDataset":
        keep = set(firms)
        return self.select_rows(self._frame["firm_id"].isin(keep).to_numpy())

    def __repr__(self) -> str:
        return (f"PanelDataset(firms={self.n_firms}, obs={self.n_obs}, "
                f"variables={list(self.variables)})")

    def __eq__(self, other) -> bool:
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return self._roles == other._roles and self._frame.equals(other._frame)

    # -- serialization ---------------------------------------------------
    def to_csv(self, target=None) -> str | None:
        """Write comma-separated text with ``NA`` for missing cells.

        Floats use their shortest round-trip representation, so output is
        byte-stable for identical data.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = list(self._frame.columns)
        writer.writerow(cols)
        values = [self._frame[c].to_numpy() for c in cols]
        for row in zip(*values):
            writer.writerow([row[0], int(row[1])] + [_fmt_cell(x) for x in row[2:]])
        text = buf.getvalue()
        if target is None:
            return text
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return None


def _fmt_cell(x: float) -> str:
    if x != x:
        return "NA"
    return repr(float(x))


def _parse_cell(text: str) -> float | None:
    """Return the float value, ``nan`` for a missing token, None if unparseable."""
    token = text.strip()
    if token in MISSING_TOKENS:
        return math.nan
    try:
        return float(token)
    except ValueError:
        return None


def load_panel(source, schema: Sequence[VariableSpec] | None = None) -> PanelDataset:
    """Read a panel from delimited text.

    Parameters
    ----------
    source : bytes, binary stream, text stream or path
        Comma-separated UTF-8 text with a header row. Empty cells and ``NA``
        are missing.
    schema : sequence of VariableSpec, optional
        Columns to read, with their roles. All non-key columns are read when
        omitted.

    Raises
    ------
    SchemaMismatch
        A key column or a schema variable is absent from the header.
    DuplicateObservation
        Two rows share ``(firm_id, year)``.
    """
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaMismatch("empty input: no header row") from None
    missing = [c for c in KEY_COLUMNS if c not in header]
    if schema is not None:
        missing += [s.name for s in schema if s.name not in header]
    if missing:
        raise SchemaMismatch(f"missing mandatory columns: {missing}")
    if schema is None:
        names = [h for h in header if h not in KEY_COLUMNS]
        roles = {}
    else:
        names = [s.name for s in schema]
        roles = {s.name: s.role for s in schema}
    pos = {h: i for i, h in enumerate(header)}
    firm, year = [], []
    cols: dict[str, list[float]] = {n: [] for n in names}
    bad: dict[str, int] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        firm.append(row[pos["firm_id"]].strip())
        try:
            year.append(int(float(row[pos["year"]])))
        except ValueError:
            raise SchemaMismatch(f"line {lineno}: unparseable year {row[pos['year']]!r}") from None
        for n in names:
            value = _parse_cell(row[pos[n]])
            if value is None:
                bad[n] = bad.get(n, 0) + 1
                value = math.nan
            cols[n].append(value)
    if bad:
        warnings.warn(f"unparseable cells set to missing: {bad}", DataWarning, stacklevel=2)
    frame = pd.DataFrame({"firm_id": firm, "year": np.asarray(year, dtype=np.int64), **cols})
    return PanelDataset(frame, roles, bad)


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8-sig")
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8-sig", newline="") as fh:
            return fh.read()
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8-sig") if isinstance(data, bytes) else data
    with open(source, "r", encoding="utf-8-sig", newline="") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# variable derivation
# ---------------------------------------------------------------------------

def _previous_year_value(dataset: PanelDataset, values: np.ndarray) -> np.ndarray:
    codes = dataset.firm_codes()
    year = dataset.column("year")
    prev = np.full(values.shape, np.nan)
    same = (codes[1:] == codes[:-1]) & (year[1:] == year[:-1] + 1)
    prev[1:][same] = values[:-1][same]
    return prev


def derive_variables(dataset: PanelDataset, specs: Sequence[VariableSpec]) -> PanelDataset:
    """Add derived columns, applying ``specs`` in order.

    First differences are within firm and only between consecutive years.
    Invalid inputs (non-positive log arguments, ranks outside ``[1, 500]``,
    zero totals) become missing with a :class:`DataWarning`.
    """
    current = dataset
    for spec in specs:
        for src in spec.source:
            if src not in current.variables:
                raise SchemaMismatch(f"{spec.name}: source column {src!r} not in dataset")
        x = current.column(spec.source[0])
        n_bad = 0
        if spec.transform == "level":
            out = x.copy()
        elif spec.transform == "first-difference":
            out = x - _previous_year_value(current, x)
        elif spec.transform == "natural-log":
            bad = np.isfinite(x) & (x <= 0)
            n_bad = int(bad.sum())
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(bad, np.nan, np.log(np.where(bad, 1.0, x)))
            if n_bad:
                warnings.warn(f"{spec.name}: {n_bad} non-positive values set to missing",
                              DataWarning, stacklevel=2)
        elif spec.transform == "reverse-rank-501":
            ok = np.isfinite(x) & (x >= 1) & (x <= 500) & (np.floor(x) == x)
            bad = np.isfinite(x) & ~ok
            n_bad = int(bad.sum())
            out = np.where(ok, 501.0 - x, np.nan)
            if n_bad:
                warnings.warn(f"{spec.name}: {n_bad} ranks outside [1, 500] set to missing",
                              DataWarning, stacklevel=2)
        elif spec.transform == "percent-ratio":
            total = current.column(spec.source[1])
            bad = np.isfinite(x) & np.isfinite(total) & (total == 0)
            n_bad = int(bad.sum())
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(bad, np.nan, 100.0 * x / np.where(bad, 1.0, total))
            invalid = np.isfinite(out) & ((out < 0) | (out > 100))
            if invalid.any():
                n_bad += int(invalid.sum())
                out = np.where(invalid, np.nan, out)
            if n_bad:
                warnings.warn(f"{spec.name}: {n_bad} undefined ratios set to missing",
                              UndefinedRatio, stacklevel=2)
        else:  # pragma: no cover - guarded by VariableSpec
            raise ValueError(spec.transform)
        current = current.with_columns({spec.name: out}, {spec.name: spec.role},
                                       {spec.name: n_bad} if n_bad else None)
    return current


# ---------------------------------------------------------------------------
# design matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignMatrices:
    """Stacked pooled-VARX design.

    ``response`` is ``(n, m)``, ``lagged`` is ``(n, m*L)`` in variable-major,
    lag-minor order, ``exog`` is ``(n, k)`` with the intercept (if any) as
    its last column. ``firm`` and ``year`` index the retained rows.
    """

    response: np.ndarray
    lagged: np.ndarray
    exog: np.ndarray
    firm: np.ndarray
    year: np.ndarray
    endog_names: tuple[str, ...]
    exog_names: tuple[str, ...]
    lags: int
    has_intercept: bool
    dropped_columns: tuple[str, ...] = ()
    demeaned: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("response", "lagged", "exog", "firm", "year"):
            arr = getattr(self, name)
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def nobs(self) -> int:
        return self.response.shape[0]

    @property
    def n_endog(self) -> int:
        return self.response.shape[1]

    @property
    def lag_names(self) -> tuple[str, ...]:
        return tuple(f"{v}.L{l}" for v in self.endog_names for l in range(1, self.lags + 1))

    @property
    def regressor_names(self) -> tuple[str, ...]:
        return self.lag_names + self.exog_names

    @property
    def regressors(self) -> np.ndarray:
        if "X" not in self._cache:
            X = np.hstack([self.lagged, self.exog])
            X.setflags(write=False)
            self._cache["X"] = X
        return self._cache["X"]

    @property
    def index(self) -> list[tuple[str, int]]:
        return list(zip(self.firm.tolist(), self.year.tolist()))

    def lag_column(self, variable: int, lag: int) -> int:
        return variable * self.lags + (lag - 1)

    def blocks(self) -> list[tuple[int, int]]:
        """``[start, stop)`` row ranges of consecutive years within a firm."""
        if self.nobs == 0:
            return []
        brk = (self.firm[1:] != self.firm[:-1]) | (self.year[1:] != self.year[:-1] + 1)
        starts = np.concatenate([[0], np.flatnonzero(brk) + 1])
        stops = np.concatenate([starts[1:], [self.nobs]])
        return list(zip(starts.tolist(), stops.tolist()))

    def take(self, rows) -> "DesignMatrices":
        rows = np.asarray(rows)
        return DesignMatrices(self.response[rows], self.lagged[rows], self.exog[rows],
                              self.firm[rows], self.year[rows], self.endog_names,
                              self.exog_names, self.lags, self.has_intercept,
                              self.dropped_columns, self.demeaned)

    def with_lags(self, lags: int) -> "DesignMatrices":
        """Same rows, keeping only the first ``lags`` lags of each variable."""
        if not 1 <= lags <= self.lags:
            raise ValueError(f"lags must be in [1, {self.lags}]")
        cols = [self.lag_column(j, l) for j in range(self.n_endog) for l in range(1, lags + 1)]
        return DesignMatrices(self.response, self.lagged[:, cols], self.exog, self.firm,
                              self.year, self.endog_names, self.exog_names, lags,
                              self.has_intercept, self.dropped_columns, self.demeaned)

    def without_exog(self) -> "DesignMatrices":
        """Same rows with controls removed (intercept kept)."""
        keep = [i for i, n in enumerate(self.exog_names) if n == "const"]
        return DesignMatrices(self.response, self.lagged, self.exog[:, keep], self.firm,
                              self.year, self.endog_names,
                              tuple(self.exog_names[i] for i in keep), self.lags,
                              self.has_intercept, self.dropped_columns, self.demeaned)


def _level_label(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def build_design(dataset: PanelDataset, model: ModelSpec) -> DesignMatrices:
    """Build the stacked design of a pooled VARX.

    A row at ``(i, t)`` is retained when every model variable is observed at
    ``t`` and the endogenous variables are observed in each of the ``L``
    immediately preceding years of the same firm. Lags never cross a firm
    boundary or a gap in years.

    Raises
    ------
    SchemaMismatch
        A model variable is not in the dataset.
    EmptyDesign
        No row satisfies the lag requirement.
    """
    absent = [v for v in model.variables if v not in dataset.variables]
    if absent:
        raise SchemaMismatch(f"model variables not in dataset: {absent}")
    L = model.lags
    codes = dataset.firm_codes()
    firm_ids = dataset.column("firm_id")
    year = dataset.column("year").astype(np.int64)
    Y = np.column_stack([dataset.column(v) for v in model.endogenous])
    Xraw = (np.column_stack([dataset.column(v) for v in model.exogenous])
            if model.exogenous else np.empty((len(year), 0)))
    n = len(year)
    endog_ok = np.isfinite(Y).all(axis=1)
    keep = endog_ok & np.isfinite(Xraw).all(axis=1)
    lag_rows = []
    for lag in range(1, L + 1):
        src = np.arange(n) - lag
        valid = src >= 0
        srcc = np.where(valid, src, 0)
        valid &= (codes[srcc] == codes) & (year[srcc] == year - lag) & endog_ok[srcc]
        keep &= valid
        lag_rows.append(srcc)
    rows = np.flatnonzero(keep)
    if rows.size == 0:
        raise EmptyDesign(f"no firm supplies {L} consecutive complete prior years")
    m = Y.shape[1]
    lagged = np.empty((rows.size, m * L))
    for j in range(m):
        for lag in range(1, L + 1):
            lagged[:, j * L + lag - 1] = Y[lag_rows[lag - 1][rows], j]

    blocks, names = [], []
    for j, v in enumerate(model.exogenous):
        col = Xraw[rows, j]
        if v in model.categorical:
            levels = np.unique(col)
            for lev in levels[1:]:
                blocks.append((col == lev).astype(np.float64))
                names.append(f"{v}[{_level_label(lev)}]")
        else:
            blocks.append(col)
            names.append(v)
    yr = year[rows]
    if model.year_effects == "dummies":
        for y in np.unique(yr)[1:]:
            blocks.append((yr == y).astype(np.float64))
            names.append(f"year[{int(y)}]")
    elif model.year_effects == "trend":
        blocks.append((yr - yr.min()).astype(np.float64))
        names.append("trend")

    response = Y[rows]
    firm = firm_ids[rows]
    exog = np.column_stack(blocks) if blocks else np.empty((rows.size, 0))
    dropped: list[str] = []
    intercept = model.intercept
    if model.firm_effects:
        fc = codes[rows]
        response = _demean(response, fc)
        lagged = _demean(lagged, fc)
        if exog.shape[1]:
            exog = _demean(exog, fc)
            scale = np.maximum(np.abs(np.column_stack(blocks)).max(axis=0), 1.0)
            alive = np.abs(exog).max(axis=0) > 1e-10 * scale
            dropped = [nm for nm, a in zip(names, alive) if not a]
            exog = exog[:, alive]
            names = [nm for nm, a in zip(names, alive) if a]
        intercept = False
    if intercept:
        exog = np.column_stack([exog, np.ones(rows.size)])
        names.append("const")
    return DesignMatrices(response, lagged, exog, firm, yr, tuple(model.endogenous),
                          tuple(names), L, intercept, tuple(dropped), model.firm_effects)


def _demean(a: np.ndarray, codes: np.ndarray) -> np.ndarray:
    uniq, inv = np.unique(codes, return_inverse=True)
    sums = np.zeros((uniq.size, a.shape[1]))
    np.add.at(sums, inv, a)
    counts = np.bincount(inv, minlength=uniq.size)[:, None]
    return a - (sums / counts)[inv]


# ---------------------------------------------------------------------------
# subsampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Balanced:
    """Keep firms observed in every year of the panel's year span."""


@dataclass(frozen=True)
class ExcludeValues:
    variable: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class TrimPercentile:
    """Drop observations in the lower and upper ``p`` percent tails."""

    variable: str
    p: float


@dataclass(frozen=True)
class SplitMedian:
    """Split firms at the median of their firm-level mean of ``variable``."""

    variable: str


@dataclass(frozen=True)
class SplitCategory:
    """Split firms by the (majority) group their values map to.

    With ``mapping=None`` each distinct value is its own group.
    """

    variable: str
    mapping: Mapping[float, str] | None = None


SubsampleRule = Balanced | ExcludeValues | TrimPercentile | SplitMedian | SplitCategory


def rule_from_config(entry: Mapping) -> SubsampleRule:
    """Build a rule from a mapping such as ``{"rule": "trim-percentile", ...}``."""
    kind = entry.get("rule")
    try:
        if kind == "balanced":
            return Balanced()
        if kind == "exclude-value":
            return ExcludeValues(entry["variable"], tuple(float(v) for v in entry["values"]))
        if kind == "trim-percentile":
            return TrimPercentile(entry["variable"], float(entry["p"]))
        if kind == "split-median":
            return SplitMedian(entry["variable"])
        if kind == "split-category":
            mapping = entry.get("mapping")
            if mapping is not None:
                mapping = {float(k): str(v) for k, v in mapping.items()}
            return SplitCategory(entry["variable"], mapping)
    except KeyError as exc:
        raise InvalidRule(f"rule {kind!r} is missing field {exc}") from None
    raise InvalidRule(f"unknown subsample rule {kind!r}")


def _require(dataset: PanelDataset, variable: str) -> np.ndarray:
    if variable not in dataset.variables:
        raise InvalidRule(f"variable {variable!r} not in dataset")
    return dataset.column(variable)


def subsample(dataset: PanelDataset, rule: SubsampleRule):
    """Apply a subsample rule.

    Returns a :class:`PanelDataset` for filtering rules and an ordered
    ``dict`` of group label to dataset for split rules.

    Raises
    ------
    InvalidRule
        Malformed rule (e.g. a trim percentage outside ``(0, 50)``).
    EmptySubsample
        Nothing survives the rule.
    """
    if isinstance(rule, Balanced):
        df = dataset._frame
        span = set(dataset.years)
        counts = df.groupby("firm_id", sort=False)["year"].nunique()
        keep = counts.index[counts.to_numpy() == len(span)]
        out = dataset.select_firms(keep)
    elif isinstance(rule, ExcludeValues):
        x = _require(dataset, rule.variable)
        out = dataset.select_rows(~np.isin(x, np.asarray(rule.values, dtype=float)))
    elif isinstance(rule, TrimPercentile):
        if not 0 < rule.p < 50:
            raise InvalidRule(f"trim percentage must lie in (0, 50), got {rule.p}")
        x = _require(dataset, rule.variable)
        finite = np.isfinite(x)
        vals = np.sort(x[finite])
        k = int(math.floor(vals.size * rule.p / 100.0))
        if vals.size == 0 or 2 * k >= vals.size:
            raise EmptySubsample(f"trimming {rule.p}% leaves no observations")
        lo, hi = vals[k], vals[vals.size - 1 - k]
        out = dataset.select_rows(~finite | ((x >= lo) & (x <= hi)))
    elif isinstance(rule, (SplitMedian, SplitCategory)):
        return _split(dataset, rule)
    else:
        raise InvalidRule(f"unknown subsample rule {rule!r}")
    if out.n_obs == 0:
        raise EmptySubsample(f"rule {rule!r} leaves no observations")
    return out


def _split(dataset: PanelDataset, rule) -> dict[str, PanelDataset]:
    x = _require(dataset, rule.variable)
    df = pd.DataFrame({"firm_id": dataset.column("firm_id"), "x": x})
    groups: dict[str, list[str]] = {}
    if isinstance(rule, SplitMedian):
        means = df.groupby("firm_id", sort=True)["x"].mean().dropna()
        if means.empty:
            raise EmptySubsample(f"{rule.variable} is missing for every firm")
        med = float(np.median(means.to_numpy()))
        groups["low"] = means.index[means.to_numpy() <= med].tolist()
        groups["high"] = means.index[means.to_numpy() > med].tolist()
    else:
        mapping = rule.mapping
        if mapping is None:
            labels = df["x"].map(lambda v: None if v != v else _level_label(v))
        else:
            labels = df["x"].map(lambda v: mapping.get(float(v)) if v == v else None)
        df["g"] = labels
        df = df.dropna(subset=["g"])
        for firm, sub in df.groupby("firm_id", sort=True):
            counts = sub["g"].value_counts()
            top = sorted(counts.index[counts.to_numpy() == counts.max()])[0]
            groups.setdefault(top, []).append(firm)
    out = {label: dataset.select_firms(firms)
           for label, firms in sorted(groups.items()) if firms}
    if not out:
        raise EmptySubsample(f"splitting on {rule.variable} leaves no groups")
    return out
