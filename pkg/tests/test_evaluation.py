import numpy as np
import pytest

from trapscore.data_model import Dataset
from trapscore.evaluation import (
    cross_validate,
    make_folds,
    optimal_threshold,
    roc_curve,
    write_confusion_csv,
    read_confusion_csv,
)
from trapscore.glmm import FitConfig

from conftest import make_pool, make_site


def brute_force_rates(labels, probs, k):
    tp = sum(1 for lab, p in zip(labels, probs) if lab and p > k)
    fp = sum(1 for lab, p in zip(labels, probs) if not lab and p > k)
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    return tp / n_pos, fp / n_neg


def brute_force_best(roc, m):
    best_k, best_j = None, -np.inf
    for k, tpr, fpr in zip(roc.thresholds, roc.tpr, roc.fpr):
        j = tpr - m * fpr
        if j > best_j:
            best_k, best_j = k, j
    return best_k, best_j


def one_year_dataset(n_pools, year=2012):
    sites = (make_site("A"), make_site("B", latitude=41.99, longitude=-87.7))
    pools = tuple(
        make_pool("A" if i % 2 else "B", year=year, week=i % 50 + 1, risk=0.0,
                  response=bool(i % 3 == 0))
        for i in range(n_pools)
    )
    return Dataset(sites=sites, pools=pools, cases=())


class TestMakeFolds:
    def test_exact_division(self):
        folds = make_folds(one_year_dataset(100), seed=3)
        sizes = np.bincount(folds.fold_index, minlength=5)
        assert list(sizes) == [20, 20, 20, 20, 20]

    def test_deterministic(self):
        a = make_folds(one_year_dataset(100), seed=3)
        b = make_folds(one_year_dataset(100), seed=3)
        assert a == b
        c = make_folds(one_year_dataset(100), seed=4)
        assert a.fold_index != c.fold_index

    def test_seven_pools_round_robin(self):
        folds = make_folds(one_year_dataset(7), seed=1)
        sizes = sorted(np.bincount(folds.fold_index, minlength=5), reverse=True)
        assert sizes == [2, 2, 1, 1, 1]

    def test_tiny_year_warns(self):
        with pytest.warns(UserWarning, match="uneven"):
            make_folds(one_year_dataset(3), seed=1)

    def test_stratified_by_year(self):
        sites = (make_site("A"), make_site("B", latitude=41.99, longitude=-87.7))
        pools = tuple(
            make_pool("A", year=year, week=i + 1, risk=0.0, response=bool(i % 2))
            for year in (2011, 2012) for i in range(25)
        )
        ds = Dataset(sites, pools, ())
        folds = make_folds(ds, seed=0)
        arr = np.array(folds.fold_index)
        for year, sl in ((2011, slice(0, 25)), (2012, slice(25, 50))):
            sizes = np.bincount(arr[sl], minlength=5)
            assert sizes.max() - sizes.min() <= 1, year


class TestRocCurve:
    def test_four_point_fixture_matches_brute_force(self):
        labels = [True, False, True, False]
        probs = [0.9, 0.8, 0.7, 0.1]
        roc = roc_curve(labels, probs)
        for k, tpr, fpr in zip(roc.thresholds, roc.tpr, roc.fpr):
            bt, bf = brute_force_rates(labels, probs, k)
            assert tpr == pytest.approx(bt) and fpr == pytest.approx(bf)

    def test_endpoints_and_monotonicity(self):
        rng = np.random.default_rng(0)
        labels = rng.random(200) < 0.3
        labels[0], labels[1] = True, False
        probs = rng.uniform(0.01, 0.99, 200)
        roc = roc_curve(labels, probs)
        assert (roc.tpr[0], roc.fpr[0]) == (1.0, 1.0)   # threshold 0
        assert (roc.tpr[-1], roc.fpr[-1]) == (0.0, 0.0)  # threshold 1
        assert np.all(np.diff(roc.tpr) <= 0)
        assert np.all(np.diff(roc.fpr) <= 0)

    def test_perfect_separation_hits_corner(self):
        labels = [True] * 5 + [False] * 5
        probs = [0.9] * 5 + [0.1] * 5
        roc = roc_curve(labels, probs)
        corner = [(f, t) for f, t in zip(roc.fpr, roc.tpr)]
        assert (0.0, 1.0) in corner

    def test_constant_probs_is_chance(self):
        labels = [True, False, True, False]
        roc = roc_curve(labels, [0.4] * 4)
        # only the two corner operating points, AUC 1/2
        points = sorted(set(zip(roc.fpr, roc.tpr)))
        assert points == [(0.0, 0.0), (1.0, 1.0)]
        auc = np.trapz(roc.tpr[::-1], roc.fpr[::-1])
        assert auc == pytest.approx(0.5)

    def test_one_class_rejected(self):
        with pytest.raises(ValueError, match="both classes"):
            roc_curve([True, True], [0.5, 0.6])


class TestOptimalThreshold:
    def test_matches_brute_force_on_fixture(self):
        roc = roc_curve([True, False, True, False], [0.9, 0.8, 0.7, 0.1])
        for m in (1.0, 0.5, 0.1):
            k = optimal_threshold(roc, m)
            bk, bj = brute_force_best(roc, m)
            idx = int(np.where(roc.thresholds == k)[0][0])
            assert roc.tpr[idx] - m * roc.fpr[idx] == pytest.approx(bj)
            assert k <= bk  # tie-break favors the smaller threshold

    def test_perfect_classifier_tie_break(self):
        roc = roc_curve([True] * 5 + [False] * 5, [0.9] * 5 + [0.1] * 5)
        k = optimal_threshold(roc, 1.0)
        idx = int(np.where(roc.thresholds == k)[0][0])
        assert roc.tpr[idx] == 1.0 and roc.fpr[idx] == 0.0
        assert k == 0.1  # the smaller of the tied thresholds

    def test_selected_tpr_monotone_as_m_decreases(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            n = 60
            labels = rng.random(n) < 0.4
            labels[:2] = [True, False]
            probs = np.clip(rng.normal(0.4 + 0.2 * labels, 0.15), 0.001, 0.999)
            roc = roc_curve(labels, probs)
            last = -1.0
            for m in np.arange(1.0, 0.05, -0.1):
                k = optimal_threshold(roc, m)
                idx = int(np.where(roc.thresholds == k)[0][0])
                assert roc.tpr[idx] >= last - 1e-12
                last = roc.tpr[idx]

    def test_m_validated(self):
        roc = roc_curve([True, False], [0.6, 0.4])
        for bad in (0.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                optimal_threshold(roc, bad)


def cv_dataset():
    """Four traps; trap A's pools are always followed by cases and its test
    results are perfectly informative; elsewhere the signal is strong but
    noisy enough to avoid separation."""
    rng = np.random.default_rng(123)
    sites = tuple(
        make_site(t, latitude=41.7 + 0.08 * i, longitude=-88.0 + 0.05 * i)
        for i, t in enumerate("ABCD")
    )
    pools = []
    for year in (2011, 2012):
        for w in range(1, 26):
            pools.append(make_pool("A", year=year, week=w, test_positive=True,
                                   risk=float(rng.uniform(0.05, 0.3)), response=True))
            for t in "BCD":
                positive = rng.random() < 0.3
                if positive:
                    response = rng.random() < 0.8
                else:
                    response = rng.random() < 0.1
                pools.append(make_pool(t, year=year, week=w, test_positive=positive,
                                       risk=float(rng.uniform(0.05, 0.3)) if positive else 0.0,
                                       response=response))
    return Dataset(sites=sites, pools=tuple(pools), cases=())


class TestCrossValidate:
    def test_informative_trap_reaches_full_sensitivity(self):
        ds = cv_dataset()
        result = cross_validate(ds, FitConfig(random_effects=False), m=0.9, seed=5)
        a = result.confusions["A"]
        assert a.avg_sens == 1.0
        assert sum(a.tn) + sum(a.fp) == 0  # trap A has no negative pools at all
        assert a.avg_spec is None

    def test_no_positive_trap_has_undefined_sensitivity(self):
        rng = np.random.default_rng(4)
        sites = tuple(
            make_site(t, latitude=41.7 + 0.08 * i, longitude=-88.0 + 0.05 * i)
            for i, t in enumerate("ABC")
        )
        pools = []
        for year in (2011, 2012):
            for w in range(1, 26):
                for i, t in enumerate("ABC"):
                    positive = rng.random() < 0.4
                    response = False if t == "A" else bool(rng.random() < (0.7 if positive else 0.1))
                    pools.append(make_pool(t, year=year, week=w, test_positive=positive,
                                           risk=float(rng.uniform(0.05, 0.3)) if positive else 0.0,
                                           response=response))
        result = cross_validate(Dataset(sites, tuple(pools), ()),
                                FitConfig(random_effects=False), m=0.9, seed=5)
        a = result.confusions["A"]
        assert a.avg_sens is None
        assert a.avg_spec is not None

    def test_deterministic_across_runs(self):
        ds = cv_dataset()
        r1 = cross_validate(ds, FitConfig(random_effects=False), m=0.9, seed=5)
        r2 = cross_validate(ds, FitConfig(random_effects=False), m=0.9, seed=5)
        assert r1.confusions == r2.confusions
        assert r1.fold_thresholds == r2.fold_thresholds

    def test_per_fold_counts_match_class_totals(self):
        ds = cv_dataset()
        result = cross_validate(ds, FitConfig(random_effects=False), m=0.9, seed=5)
        folds = make_folds(ds, seed=5)
        for trap, c in result.confusions.items():
            for f in range(5):
                pos = sum(1 for p, fi in zip(ds.pools, folds.fold_index)
                          if p.trap_id == trap and fi == f and p.response)
                neg = sum(1 for p, fi in zip(ds.pools, folds.fold_index)
                          if p.trap_id == trap and fi == f and not p.response)
                assert c.tp[f] + c.fn[f] == pos
                assert c.tn[f] + c.fp[f] == neg

    def test_rates_within_unit_interval(self):
        ds = cv_dataset()
        result = cross_validate(ds, FitConfig(random_effects=False), m=0.9, seed=5)
        for c in result.confusions.values():
            if c.avg_sens is not None:
                assert 0.0 <= c.avg_sens <= 1.0
            if c.avg_spec is not None:
                assert 0.0 <= c.avg_spec <= 1.0

    def test_imbalanced_fixture_m_raises_sensitivity(self):
        rng = np.random.default_rng(77)
        n, rate = 20000, 0.016
        labels = rng.random(n) < rate
        probs = np.clip(rng.normal(0.05 + 0.25 * labels, 0.12), 1e-6, 1 - 1e-6)
        roc = roc_curve(labels, probs)

        def sens_at(m):
            k = optimal_threshold(roc, m)
            idx = int(np.where(roc.thresholds == k)[0][0])
            return roc.tpr[idx]

        assert sens_at(0.9) >= sens_at(1.0)

    def test_threshold_split_option(self):
        ds = cv_dataset()
        test_based = cross_validate(ds, FitConfig(random_effects=False), m=0.9, seed=5,
                                    threshold_split="test")
        train_based = cross_validate(ds, FitConfig(random_effects=False), m=0.9, seed=5,
                                     threshold_split="train")
        assert test_based.fold_thresholds != train_based.fold_thresholds
        with pytest.raises(ValueError):
            cross_validate(ds, FitConfig(random_effects=False), m=0.9, seed=5,
                           threshold_split="validation")

    def test_csv_round_trip(self, tmp_path):
        ds = cv_dataset()
        result = cross_validate(ds, FitConfig(random_effects=False), m=0.9, seed=5)
        path = tmp_path / "confusions.csv"
        write_confusion_csv(path, result.confusions)
        back = read_confusion_csv(path)
        assert set(back) == set(result.confusions)
        for trap, summary in back.items():
            orig = result.confusions[trap]
            if orig.avg_sens is None:
                assert summary.avg_sens is None
            else:
                assert summary.avg_sens == pytest.approx(orig.avg_sens)
            assert summary.n_pos == orig.n_pos and summary.n_neg == orig.n_neg
