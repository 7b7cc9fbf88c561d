"""Shared fixtures: tiny hand-built datasets and CSV writers."""

from __future__ import annotations

import textwrap

import pytest

from trapscore.data_model import PoolObservation, TrapSite


def make_pool(trap_id="T01", year=2012, week=11, day_of_week=2, pool_size=30,
              test_positive=False, mosquito_count_week=100, pools_in_week=1,
              pools_on_day=1, risk=None, response=None) -> PoolObservation:
    return PoolObservation(
        trap_id=trap_id, year=year, week=week, day_of_week=day_of_week,
        pool_size=pool_size, test_positive=test_positive,
        mosquito_count_week=mosquito_count_week, pools_in_week=pools_in_week,
        pools_on_day=pools_on_day, risk=risk, response=response,
    )


def make_site(trap_id="T01", latitude=41.85, longitude=-87.95, **covariates) -> TrapSite:
    return TrapSite(trap_id=trap_id, latitude=latitude, longitude=longitude,
                    covariates=dict(covariates))


@pytest.fixture
def csv_fixture(tmp_path):
    """Write the minimal well-formed 3-file fixture; returns the three paths."""
    sites = tmp_path / "sites.csv"
    pools = tmp_path / "pools.csv"
    cases = tmp_path / "cases.csv"
    sites.write_text(textwrap.dedent("""\
        trap_id,latitude,longitude,canopy_pct
        T01,41.85,-87.95,12.5
        T02,41.90,-87.80,30.0
        """))
    pools.write_text(textwrap.dedent("""\
        trap_id,year,week,day_of_week,pool_size,test_positive,mosquito_count_week,pools_in_week,pools_on_day
        T01,2012,31,2,50,1,100,2,2
        T01,2012,31,2,50,0,100,2,2
        T02,2012,31,3,25,0,40,1,1
        T02,2012,33,4,30,1,55,1,1
        """))
    cases.write_text(textwrap.dedent("""\
        latitude,longitude,year,week
        41.85,-87.95,2012,32
        """))
    return pools, sites, cases
