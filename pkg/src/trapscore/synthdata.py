"""Ground-truth synthetic surveillance worlds.

Worlds are built so that every downstream stage can be checked against
known latent values: trap locations keep a minimum spacing larger than the
labelling radius, pools are collected on alternating weeks, and each
positive response places one human case at the trap's own coordinates in
the week right after collection. Every case therefore labels exactly one
trap-week, so re-running the labeller on the generated files reproduces the
generated responses bit for bit.

Responses are drawn from the logistic model at the configured true
coefficients, with the site effect sampled from the true Matérn covariance
(one draw per trap, Cholesky of the dense covariance). Pools within a
trap-week necessarily share one response (they share the trap and the
week), so the draw uses the trap-week's first pool.

Site covariates may causally raise a trap's latent test-positivity rate;
traps with a balanced mix of positive and negative pools give the fitted
model something to discriminate with, which is what lifts their
cross-validated score. That is the ground-truth channel for "covariate
raises trap quality".
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data_model import Dataset, HumanCase, PoolObservation, TrapSite
from .geo import haversine_km
from .glmm import GlmmCoefficients, MaternParams, build_correlation_matrix
from .pooled import annotate_risk

DISTRIBUTIONS = ("normal", "uniform", "lognormal")
EFFECTS = ("none", "linear", "plateau")


class WorldConfigError(Exception):
    pass


@dataclass(frozen=True)
class CovariateSpec:
    """One per-trap covariate: its sampling distribution and its causal effect
    on the trap's latent test-positivity rate.

    * ``linear``:  adds  gain * value / scale          (params: gain, scale)
    * ``plateau``: adds  gain * min(value / scale, 1)  (params: gain, scale)
    """

    name: str
    distribution: str
    params: tuple[float, float]
    effect: str = "none"
    effect_params: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise WorldConfigError(f"unknown distribution {self.distribution!r}")
        if self.effect not in EFFECTS:
            raise WorldConfigError(f"unknown effect {self.effect!r}")
        if self.effect != "none" and self.effect_params[1] <= 0:
            raise WorldConfigError("effect scale must be positive")


@dataclass(frozen=True)
class WorldConfig:
    n_traps: int
    true_beta: GlmmCoefficients
    true_matern: MaternParams
    region: tuple[float, float, float, float] = (41.6, 42.1, -88.2, -87.6)  # lat/lat/lon/lon
    years: tuple[int, ...] = (1, 2)
    weeks_per_year: int = 52
    covariate_specs: tuple[CovariateSpec, ...] = ()
    base_positivity: float = 0.08
    pools_per_week: int = 1
    mosquito_mean: float = 120.0
    seed: int = 0
    min_trap_spacing_km: float = 1.6

    def __post_init__(self):
        if self.n_traps < 2:
            raise WorldConfigError("n_traps must be at least 2")
        lat_lo, lat_hi, lon_lo, lon_hi = self.region
        if not (lat_lo < lat_hi and lon_lo < lon_hi):
            raise WorldConfigError("region must be a non-empty lat/lon box")
        if not self.years:
            raise WorldConfigError("at least one year is required")
        if self.weeks_per_year < 4 or self.weeks_per_year > 53:
            raise WorldConfigError("weeks_per_year must lie in [4, 53]")
        if not 0.0 <= self.base_positivity < 1.0:
            raise WorldConfigError("base_positivity must lie in [0, 1)")
        if self.pools_per_week < 1:
            raise WorldConfigError("pools_per_week must be >= 1")
        if self.min_trap_spacing_km <= 1.5:
            raise WorldConfigError("min_trap_spacing_km must exceed the 1.5 km labelling radius")


@dataclass(frozen=True)
class GroundTruth:
    config: WorldConfig
    site_effects: dict[str, float]
    positivity: dict[str, float]
    n_positive_responses: int

    def to_dict(self) -> dict:
        cfg = dataclasses.asdict(self.config)
        return {
            "config": cfg,
            "site_effects": self.site_effects,
            "positivity": self.positivity,
            "n_positive_responses": self.n_positive_responses,
        }


def _sample_locations(config: WorldConfig, rng) -> list[tuple[float, float]]:
    lat_lo, lat_hi, lon_lo, lon_hi = config.region
    lats: list[float] = []
    lons: list[float] = []
    attempts = 0
    while len(lats) < config.n_traps:
        attempts += 1
        if attempts > 200 * config.n_traps:
            raise WorldConfigError(
                f"could not place {config.n_traps} traps with {config.min_trap_spacing_km} km "
                "spacing; enlarge the region or reduce n_traps"
            )
        lat = float(rng.uniform(lat_lo, lat_hi))
        lon = float(rng.uniform(lon_lo, lon_hi))
        if lats:
            d = haversine_km(lat, lon, np.array(lats), np.array(lons))
            if float(np.min(d)) <= config.min_trap_spacing_km:
                continue
        lats.append(lat)
        lons.append(lon)
    return list(zip(lats, lons))


def _sample_covariates(config: WorldConfig, rng) -> dict[str, np.ndarray]:
    values: dict[str, np.ndarray] = {}
    for spec in config.covariate_specs:
        a, b = spec.params
        if spec.distribution == "normal":
            values[spec.name] = rng.normal(a, b, size=config.n_traps)
        elif spec.distribution == "uniform":
            values[spec.name] = rng.uniform(a, b, size=config.n_traps)
        else:
            values[spec.name] = rng.lognormal(a, b, size=config.n_traps)
    return values


def _positivity(config: WorldConfig, covariates: dict[str, np.ndarray]) -> np.ndarray:
    pi = np.full(config.n_traps, config.base_positivity)
    for spec in config.covariate_specs:
        if spec.effect == "none":
            continue
        gain, scale = spec.effect_params
        v = covariates[spec.name] / scale
        pi = pi + gain * (np.minimum(v, 1.0) if spec.effect == "plateau" else v)
    return np.clip(pi, 0.0, 0.9)


def generate_world(config: WorldConfig) -> tuple[Dataset, GroundTruth]:
    """Simulate a labelled, risk-annotated dataset with known latent values."""
    rng = np.random.default_rng(config.seed)
    locations = _sample_locations(config, rng)
    trap_ids = [f"T{i:04d}" for i in range(config.n_traps)]
    covariates = _sample_covariates(config, rng)
    positivity = _positivity(config, covariates)

    if config.true_matern.sigma2 > 0:
        cov = build_correlation_matrix(locations, config.true_matern)
        b = np.linalg.cholesky(cov) @ rng.standard_normal(config.n_traps)
    else:
        b = np.zeros(config.n_traps)

    sites = tuple(
        TrapSite(
            trap_id=trap_ids[i],
            latitude=locations[i][0],
            longitude=locations[i][1],
            covariates={name: float(vals[i]) for name, vals in covariates.items()},
        )
        for i in range(config.n_traps)
    )

    # collection on alternating weeks leaves the following week free for the
    # case placement, so each case labels exactly one trap-week
    collection_weeks = list(range(1, config.weeks_per_year, 2))
    pools: list[PoolObservation] = []
    week_first_pool: list[int] = []  # index of each trap-week's first pool
    week_sizes: list[int] = []
    for i in range(config.n_traps):
        for year in config.years:
            for week in collection_weeks:
                n_pools = int(config.pools_per_week)
                sizes = rng.integers(10, 51, size=n_pools)
                count = int(max(rng.negative_binomial(5, 5.0 / (5.0 + config.mosquito_mean)), sizes.max()))
                day = int(rng.integers(0, 7))
                positive = rng.random(n_pools) < 1.0 - (1.0 - positivity[i]) ** sizes
                week_first_pool.append(len(pools))
                week_sizes.append(n_pools)
                for j in range(n_pools):
                    pools.append(
                        PoolObservation(
                            trap_id=trap_ids[i],
                            year=year,
                            week=week,
                            day_of_week=day,
                            pool_size=int(sizes[j]),
                            test_positive=bool(positive[j]),
                            mosquito_count_week=count,
                            pools_in_week=n_pools,
                            pools_on_day=n_pools,
                        )
                    )

    dataset = Dataset(sites=sites, pools=tuple(pools), cases=())
    dataset = annotate_risk(dataset, grouping="trap_week")

    beta = config.true_beta.as_array()
    site_index = {trap_ids[i]: i for i in range(config.n_traps)}
    cases: list[HumanCase] = []
    labelled: list[PoolObservation] = list(dataset.pools)
    n_positive = 0
    for start, n_pools in zip(week_first_pool, week_sizes):
        first = dataset.pools[start]
        i = site_index[first.trap_id]
        x = np.array([1.0, first.pool_size, float(first.test_positive), first.risk, first.week, first.year])
        eta = float(x @ beta + b[i])
        y = bool(rng.random() < 1.0 / (1.0 + np.exp(-eta)))
        if y:
            n_positive += 1
            cases.append(
                HumanCase(
                    latitude=locations[i][0],
                    longitude=locations[i][1],
                    year=first.year,
                    week=first.week + 1,
                )
            )
        for j in range(start, start + n_pools):
            labelled[j] = replace(labelled[j], response=y)

    dataset = replace(dataset, pools=tuple(labelled), cases=tuple(cases))
    truth = GroundTruth(
        config=config,
        site_effects={trap_ids[i]: float(b[i]) for i in range(config.n_traps)},
        positivity={trap_ids[i]: float(positivity[i]) for i in range(config.n_traps)},
        n_positive_responses=n_positive,
    )
    return dataset, truth


def write_world(out_dir: str | Path, dataset: Dataset, truth: GroundTruth) -> None:
    """Write sites/pools/cases CSVs plus ground_truth.json into a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cov_names = sorted({k for s in dataset.sites for k in s.covariates})

    lines = ["trap_id,latitude,longitude" + ("," + ",".join(cov_names) if cov_names else "")]
    for s in dataset.sites:
        row = [s.trap_id, repr(s.latitude), repr(s.longitude)]
        row += [repr(s.covariates[c]) for c in cov_names]
        lines.append(",".join(row))
    (out / "sites.csv").write_text("\n".join(lines) + "\n")

    lines = [
        "trap_id,year,week,day_of_week,pool_size,test_positive,mosquito_count_week,pools_in_week,pools_on_day"
    ]
    for p in dataset.pools:
        lines.append(
            f"{p.trap_id},{p.year},{p.week},{p.day_of_week},{p.pool_size},"
            f"{int(p.test_positive)},{p.mosquito_count_week},{p.pools_in_week},{p.pools_on_day}"
        )
    (out / "pools.csv").write_text("\n".join(lines) + "\n")

    lines = ["latitude,longitude,year,week"]
    for c in dataset.cases:
        lines.append(f"{repr(c.latitude)},{repr(c.longitude)},{c.year},{c.week}")
    (out / "cases.csv").write_text("\n".join(lines) + "\n")

    (out / "ground_truth.json").write_text(json.dumps(truth.to_dict(), indent=2, sort_keys=True))


def default_world_config(seed: int = 0, n_traps: int = 60) -> WorldConfig:
    """A ready-made world: population raises trap quality up to a plateau,
    canopy cover is causally inert.

    Positivity is a per-mosquito rate, so with pool sizes of 10-50 the
    plateau moves a trap's share of positive pools from ~10% towards the
    balanced mix that gives the fitted model something to discriminate
    with.
    """
    return WorldConfig(
        n_traps=n_traps,
        true_beta=GlmmCoefficients(
            intercept=-2.5, pool_size=0.0, test_positive=2.5, risk=1.0, week=0.0, year=0.0
        ),
        true_matern=MaternParams(nu=0.5, rho=8.0, sigma2=0.5, nugget=1e-6),
        region=(41.5, 42.3, -88.4, -87.5),
        years=(2012, 2013),
        weeks_per_year=52,
        covariate_specs=(
            CovariateSpec("pop_total", "lognormal", (np.log(6000.0), 0.8), "plateau", (0.018, 10000.0)),
            CovariateSpec("canopy_pct", "uniform", (0.0, 60.0), "none"),
        ),
        base_positivity=0.003,
        seed=seed,
    )
