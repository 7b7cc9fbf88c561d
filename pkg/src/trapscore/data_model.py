"""Surveillance data model: CSV ingestion, validation, and response labelling.

The canonical input is three CSV files:

* ``sites.csv``   -- ``trap_id,latitude,longitude,<covariate columns...>``
* ``pools.csv``   -- ``trap_id,year,week,day_of_week,pool_size,test_positive,
  mosquito_count_week,pools_in_week,pools_on_day``
* ``cases.csv``   -- ``latitude,longitude,year,week``

All files are UTF-8, comma-separated, with a header row; booleans are 0/1.
Weeks are taken as given in the data (1..53); this module never derives week
numbers from calendar dates.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

from .geo import haversine_km

MAX_POOL_SIZE = 50
MAX_WEEK = 53


class DatasetError(Exception):
    """Base class for ingestion and validation failures."""


class SchemaError(DatasetError):
    """A required CSV column is missing."""


class ParseError(DatasetError):
    """A cell could not be converted to its declared type."""


class ValidationError(DatasetError):
    """A row violates a dataset invariant."""


class ReferentialError(DatasetError):
    """A pool references a trap_id that is not in the site table."""


@dataclass(frozen=True)
class TrapSite:
    """A trap location with pre-aggregated per-site covariates."""

    trap_id: str
    latitude: float
    longitude: float
    covariates: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class PoolObservation:
    """One tested mosquito pool.

    ``risk`` is filled by :func:`trapscore.pooled.annotate_risk` and
    ``response`` by :func:`label_responses`; both are ``None`` until then.
    """

    trap_id: str
    year: int
    week: int
    day_of_week: int
    pool_size: int
    test_positive: bool
    mosquito_count_week: int
    pools_in_week: int
    pools_on_day: int
    risk: float | None = None
    response: bool | None = None


@dataclass(frozen=True)
class HumanCase:
    latitude: float
    longitude: float
    year: int
    week: int


@dataclass(frozen=True)
class Dataset:
    sites: tuple[TrapSite, ...]
    pools: tuple[PoolObservation, ...]
    cases: tuple[HumanCase, ...]

    @cached_property
    def site_by_id(self) -> dict[str, TrapSite]:
        return {s.trap_id: s for s in self.sites}


_POOL_COLUMNS = (
    "trap_id",
    "year",
    "week",
    "day_of_week",
    "pool_size",
    "test_positive",
    "mosquito_count_week",
    "pools_in_week",
    "pools_on_day",
)
_SITE_COLUMNS = ("trap_id", "latitude", "longitude")
_CASE_COLUMNS = ("latitude", "longitude", "year", "week")


def _open_rows(path: Path, required: tuple[str, ...]):
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path.name}: missing column '{col}'")
        rows = list(reader)
    return header, rows


def _parse_float(value: str, path: str, row: int, col: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(f"{path} row {row}: column '{col}': not a number: {value!r}") from None


def _parse_int(value: str, path: str, row: int, col: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ParseError(f"{path} row {row}: column '{col}': not an integer: {value!r}") from None


def _parse_bool(value: str, path: str, row: int, col: str) -> bool:
    if value in ("0", "1"):
        return value == "1"
    raise ParseError(f"{path} row {row}: column '{col}': expected 0 or 1, got {value!r}")


def _check(ok: bool, path: str, row: int, invariant: str) -> None:
    if not ok:
        raise ValidationError(f"{path} row {row}: invariant violated: {invariant}")


def read_sites_csv(sites_csv: str | Path, skip_invalid: bool = False) -> list[TrapSite]:
    """Read and validate the site table alone."""
    sites_csv = Path(sites_csv)
    header, rows = _open_rows(sites_csv, _SITE_COLUMNS)
    covariate_cols = [c for c in header if c not in _SITE_COLUMNS]
    sites: list[TrapSite] = []
    seen_ids: set[str] = set()
    for i, row in enumerate(rows, start=2):
        try:
            trap_id = row["trap_id"].strip()
            lat = _parse_float(row["latitude"], sites_csv.name, i, "latitude")
            lon = _parse_float(row["longitude"], sites_csv.name, i, "longitude")
            _check(bool(trap_id), sites_csv.name, i, "trap_id non-empty")
            _check(trap_id not in seen_ids, sites_csv.name, i, f"trap_id unique (duplicate {trap_id!r})")
            _check(-90.0 <= lat <= 90.0, sites_csv.name, i, "latitude in [-90, 90]")
            _check(-180.0 <= lon <= 180.0, sites_csv.name, i, "longitude in [-180, 180]")
            cov = {c: _parse_float(row[c], sites_csv.name, i, c) for c in covariate_cols}
        except (ParseError, ValidationError) as err:
            if skip_invalid:
                warnings.warn(f"skipping invalid row: {err}", stacklevel=2)
                continue
            raise
        seen_ids.add(trap_id)
        sites.append(TrapSite(trap_id, lat, lon, cov))
    return sites


def parse_dataset(
    pools_csv: str | Path,
    sites_csv: str | Path,
    cases_csv: str | Path,
    skip_invalid: bool = False,
) -> Dataset:
    """Read and validate the three input CSVs into a :class:`Dataset`.

    Rows violating invariants abort ingestion with the offending row number;
    with ``skip_invalid`` they are dropped with a warning instead. Schema
    errors (missing columns) always abort.
    """
    pools_csv, cases_csv = Path(pools_csv), Path(cases_csv)
    sites = read_sites_csv(sites_csv, skip_invalid)

    _, rows = _open_rows(pools_csv, _POOL_COLUMNS)
    pools: list[PoolObservation] = []
    for i, row in enumerate(rows, start=2):
        try:
            name = pools_csv.name
            p = PoolObservation(
                trap_id=row["trap_id"].strip(),
                year=_parse_int(row["year"], name, i, "year"),
                week=_parse_int(row["week"], name, i, "week"),
                day_of_week=_parse_int(row["day_of_week"], name, i, "day_of_week"),
                pool_size=_parse_int(row["pool_size"], name, i, "pool_size"),
                test_positive=_parse_bool(row["test_positive"], name, i, "test_positive"),
                mosquito_count_week=_parse_int(row["mosquito_count_week"], name, i, "mosquito_count_week"),
                pools_in_week=_parse_int(row["pools_in_week"], name, i, "pools_in_week"),
                pools_on_day=_parse_int(row["pools_on_day"], name, i, "pools_on_day"),
            )
            _check(p.pool_size >= 1, name, i, "pool_size >= 1")
            _check(p.pool_size <= MAX_POOL_SIZE, name, i, f"pool_size <= {MAX_POOL_SIZE}")
            _check(1 <= p.week <= MAX_WEEK, name, i, f"week in [1, {MAX_WEEK}]")
            _check(0 <= p.day_of_week <= 6, name, i, "day_of_week in [0, 6]")
            _check(p.pools_on_day >= 1, name, i, "pools_on_day >= 1")
            _check(p.pools_in_week >= p.pools_on_day, name, i, "pools_in_week >= pools_on_day")
            _check(p.mosquito_count_week >= p.pool_size, name, i, "mosquito_count_week >= pool_size")
        except (ParseError, ValidationError) as err:
            if skip_invalid:
                warnings.warn(f"skipping invalid row: {err}", stacklevel=2)
                continue
            raise
        pools.append(p)

    _, rows = _open_rows(cases_csv, _CASE_COLUMNS)
    cases: list[HumanCase] = []
    for i, row in enumerate(rows, start=2):
        try:
            name = cases_csv.name
            c = HumanCase(
                latitude=_parse_float(row["latitude"], name, i, "latitude"),
                longitude=_parse_float(row["longitude"], name, i, "longitude"),
                year=_parse_int(row["year"], name, i, "year"),
                week=_parse_int(row["week"], name, i, "week"),
            )
            _check(1 <= c.week <= MAX_WEEK, name, i, f"week in [1, {MAX_WEEK}]")
            _check(-90.0 <= c.latitude <= 90.0, name, i, "latitude in [-90, 90]")
            _check(-180.0 <= c.longitude <= 180.0, name, i, "longitude in [-180, 180]")
        except (ParseError, ValidationError) as err:
            if skip_invalid:
                warnings.warn(f"skipping invalid row: {err}", stacklevel=2)
                continue
            raise
        cases.append(c)

    known = {s.trap_id for s in sites}
    dangling = sorted({p.trap_id for p in pools} - known)
    if dangling:
        raise ReferentialError(
            "pools reference trap_id(s) absent from the site table: " + ", ".join(dangling)
        )

    return Dataset(sites=tuple(sites), pools=tuple(pools), cases=tuple(cases))


def week_successor(year: int, week: int) -> tuple[int, int]:
    """The week immediately after (year, week); week 53 rolls into week 1."""
    if week < MAX_WEEK:
        return year, week + 1
    return year + 1, 1


def label_responses(
    dataset: Dataset, radius_km: float = 1.5, lead_weeks: int = 2
) -> Dataset:
    """Set each pool's binary response from the human-case table.

    A pool's response is true iff some case lies within ``radius_km`` of the
    pool's trap and the case week falls in the ``lead_weeks`` weeks strictly
    after the pool's collection week (pool week 31 -> case weeks 32-33).
    Idempotent; returns a new Dataset.
    """
    if radius_km <= 0:
        raise ValueError("radius_km must be positive")
    if lead_weeks < 1:
        raise ValueError("lead_weeks must be >= 1")

    cases_by_week: dict[tuple[int, int], list[HumanCase]] = {}
    for c in dataset.cases:
        cases_by_week.setdefault((c.year, c.week), []).append(c)

    site_by_id = dataset.site_by_id
    labelled = []
    for p in dataset.pools:
        site = site_by_id.get(p.trap_id)
        if site is None:
            raise ReferentialError(f"pool references unknown trap_id {p.trap_id!r}")
        hit = False
        yw = (p.year, p.week)
        for _ in range(lead_weeks):
            yw = week_successor(*yw)
            for c in cases_by_week.get(yw, ()):
                if haversine_km(site.latitude, site.longitude, c.latitude, c.longitude) <= radius_km:
                    hit = True
                    break
            if hit:
                break
        labelled.append(replace(p, response=hit))

    return replace(dataset, pools=tuple(labelled))
