import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trapscore.data_model import Dataset
from trapscore.pooled import (
    GroupConsistencyError,
    PoolGroup,
    annotate_risk,
    mle_prevalence,
    vector_index,
)

from conftest import make_pool, make_site


def log_likelihood(p, sizes, positives):
    ll = 0.0
    for n, pos in zip(sizes, positives):
        qn = (1.0 - p) ** n
        ll += np.log(1.0 - qn) if pos else np.log(qn)
    return ll


def grid_search_mle(sizes, positives, refinements=4):
    """Independent oracle: coarse likelihood grid, refined around the peak."""
    lo, hi = 1e-9, 1.0 - 1e-9
    best = None
    for _ in range(refinements):
        grid = np.linspace(lo, hi, 2001)
        values = np.array([log_likelihood(p, sizes, positives) for p in grid])
        best = grid[int(np.nanargmax(values))]
        step = grid[1] - grid[0]
        lo, hi = max(best - 2 * step, 1e-12), min(best + 2 * step, 1.0 - 1e-12)
    return best


class TestMlePrevalence:
    def test_all_negative_is_zero(self):
        assert mle_prevalence(PoolGroup((50, 10, 3), (False, False, False))) == 0.0

    def test_all_positive_is_one_with_warning(self):
        with pytest.warns(UserWarning, match="saturates"):
            assert mle_prevalence(PoolGroup((50, 10), (True, True))) == 1.0

    def test_closed_form_two_equal_pools(self):
        # m equal pools, k positive: 1 - (1 - k/m)^(1/n)
        est = mle_prevalence(PoolGroup((50, 50), (True, False)))
        assert est == pytest.approx(1.0 - 0.5 ** (1.0 / 50.0), abs=1e-9)

    def test_mixed_sizes_match_grid_oracle(self):
        cases = [
            ((10, 50), (True, False)),
            ((5, 20, 35), (True, True, False)),
            ((1, 50), (False, True)),
            ((7, 7, 7, 40), (True, False, False, False)),
        ]
        for sizes, positives in cases:
            est = mle_prevalence(PoolGroup(sizes, positives))
            oracle = grid_search_mle(sizes, positives)
            assert est == pytest.approx(oracle, abs=1e-6)

    def test_equal_size_closed_form_sweep(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 51))
            m = int(rng.integers(2, 9))
            k = int(rng.integers(1, m))  # mixed groups only
            est = mle_prevalence(PoolGroup((n,) * m, (True,) * k + (False,) * (m - k)))
            assert est == pytest.approx(1.0 - (1.0 - k / m) ** (1.0 / n), abs=1e-8)

    @settings(max_examples=60, deadline=None)
    @given(
        sizes=st.lists(st.integers(1, 50), min_size=2, max_size=6),
        positives=st.lists(st.booleans(), min_size=2, max_size=6),
        extra=st.integers(1, 50),
    )
    def test_monotone_in_added_pools(self, sizes, positives, extra):
        k = min(len(sizes), len(positives))
        sizes, positives = tuple(sizes[:k]), tuple(positives[:k])
        with pytest.warns((UserWarning,)) if all(positives) else _nullcontext():
            base = mle_prevalence(PoolGroup(sizes, positives))
        with_pos = mle_prevalence(PoolGroup(sizes + (extra,), positives + (True,)))
        with_neg = mle_prevalence(PoolGroup(sizes + (extra,), positives + (False,)))
        assert with_pos >= base - 1e-9
        assert with_neg <= base + 1e-9

    def test_validation(self):
        with pytest.raises(ValueError):
            PoolGroup((), ())
        with pytest.raises(ValueError):
            PoolGroup((5, 5), (True,))
        with pytest.raises(ValueError):
            PoolGroup((0,), (True,))


class _nullcontext:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


class TestVectorIndex:
    def test_worked_example(self):
        # 100 mosquitoes over 2 weekly pools -> avg abundance 50; 2 pools that day
        assert vector_index(50.0, 2, 0.01) == pytest.approx(0.001)

    def test_zero_prevalence(self):
        assert vector_index(123.0, 4, 0.0) == 0.0

    def test_zero_abundance(self):
        assert vector_index(0.0, 1, 0.5) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(
        ab=st.floats(0.0, 1e4), pod=st.integers(1, 10),
        mle=st.floats(0.0, 1.0), c=st.floats(0.1, 5.0),
    )
    def test_linear_in_mle_and_abundance(self, ab, pod, mle, c):
        base = vector_index(ab, pod, mle)
        assert vector_index(c * ab, pod, mle) == pytest.approx(c * base, rel=1e-12, abs=1e-300)
        if c * mle <= 1.0:
            assert vector_index(ab, pod, c * mle) == pytest.approx(c * base, rel=1e-12, abs=1e-300)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            vector_index(-1.0, 1, 0.5)
        with pytest.raises(ValueError):
            vector_index(1.0, 0, 0.5)
        with pytest.raises(ValueError):
            vector_index(1.0, 1, 1.5)


def small_dataset(pools):
    sites = (make_site("A"), make_site("B", latitude=41.99, longitude=-87.70))
    return Dataset(sites=sites, pools=tuple(pools), cases=())


class TestAnnotateRisk:
    def test_single_negative_pool_risk_zero(self):
        ds = small_dataset([make_pool("A", test_positive=False)])
        assert annotate_risk(ds).pools[0].risk == 0.0

    def test_two_pool_week_worked_example(self):
        pools = [
            make_pool("A", week=31, pool_size=50, test_positive=True,
                      mosquito_count_week=100, pools_in_week=2, pools_on_day=2),
            make_pool("A", week=31, pool_size=50, test_positive=False,
                      mosquito_count_week=100, pools_in_week=2, pools_on_day=2),
        ]
        out = annotate_risk(small_dataset(pools))
        mle = 1.0 - 0.5 ** (1.0 / 50.0)
        expected = 50.0 * 2 * mle / 1000.0
        for p in out.pools:
            # bisection resolves the prevalence to 1e-10, scaled by 0.1 here
            assert p.risk == pytest.approx(expected, abs=1e-10)

    def test_traps_never_share_groups(self):
        base = [
            make_pool("A", test_positive=True, pool_size=20),
            make_pool("B", test_positive=False, pool_size=20),
        ]
        changed = [
            make_pool("A", test_positive=False, pool_size=20),
            make_pool("B", test_positive=False, pool_size=20),
        ]
        with pytest.warns(UserWarning):
            risk_b_before = annotate_risk(small_dataset(base)).pools[1].risk
        risk_b_after = annotate_risk(small_dataset(changed)).pools[1].risk
        assert risk_b_before == risk_b_after

    def test_trap_day_vs_trap_week_grouping(self):
        pools = [
            make_pool("A", week=31, day_of_week=1, test_positive=True, pool_size=40,
                      mosquito_count_week=90, pools_in_week=2, pools_on_day=1),
            make_pool("A", week=31, day_of_week=4, test_positive=False, pool_size=40,
                      mosquito_count_week=90, pools_in_week=2, pools_on_day=1),
        ]
        weekly = annotate_risk(small_dataset(pools), grouping="trap_week")
        with pytest.warns(UserWarning, match="saturate"):
            daily = annotate_risk(small_dataset(pools), grouping="trap_day")
        # weekly group mixes the two pools; daily groups are pure
        assert 0.0 < weekly.pools[0].risk < daily.pools[0].risk
        assert daily.pools[1].risk == 0.0

    def test_inconsistent_weekly_counts_rejected(self):
        pools = [
            make_pool("A", week=31, mosquito_count_week=100, pools_in_week=2, pools_on_day=2),
            make_pool("A", week=31, mosquito_count_week=90, pools_in_week=2, pools_on_day=2),
        ]
        with pytest.raises(GroupConsistencyError, match="inconsistent"):
            annotate_risk(small_dataset(pools))

    def test_unknown_grouping(self):
        with pytest.raises(ValueError):
            annotate_risk(small_dataset([make_pool()]), grouping="trap_month")
