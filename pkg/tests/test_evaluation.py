import math

import numpy as np
import pytest

import knife.evaluation as ev
from knife.baselines import fit_baseline
from knife.data import Dataset, SimSpec, simulate_linear
from knife.evaluation import (
    METHODS,
    TABLES,
    BenchmarkReport,
    kfold_cv,
    misclassification,
    mse,
    run_benchmark,
    run_noise_sweep,
    select_lambda2_validation,
    validate_knife,
    write_reports,
    write_sweep,
)
from knife.kernels import KernelSpec
from knife.losses import LossSpec
from oracles import ridge_coefficients

LINEAR = KernelSpec("linear")
SE = LossSpec("squared-error")


def _split(X, y, n_train):
    train = Dataset.from_raw(X[:n_train], y[:n_train], "regression")
    valid = Dataset.from_raw(X[n_train:], y[n_train:], "regression", stats=train.stats)
    return train, valid


class TestMetrics:
    def test_mse(self):
        assert mse([1.0, 2.0, 3.0], [1.0, 0.0, 4.0]) == pytest.approx(5 / 3)

    def test_misclassification_zero_is_positive(self):
        y = np.array([1.0, -1.0, -1.0, 1.0])
        f = np.array([0.0, 0.0, -2.0, -0.1])
        assert misclassification(y, f) == 0.5

    def test_argmin_ties(self):
        errs = [0.3, 0.1, 0.2, 0.1, np.nan]
        assert ev._argmin(errs, prefer_last=True) == 3
        assert ev._argmin(errs, prefer_last=False) == 1
        with pytest.raises(RuntimeError, match="every candidate failed"):
            ev._argmin([np.nan, np.nan], prefer_last=True)


class TestValidation:
    def test_single_point_grid(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((80, 3))
        y = X[:, 0] + 0.5 * rng.standard_normal(80)
        train, valid = _split(X, y, 40)
        assert select_lambda2_validation(train, valid, LINEAR, SE, grid=[0.7]) == 0.7

    def test_errors_are_validation_errors(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((90, 3))
        y = X[:, 1] + 0.3 * rng.standard_normal(90)
        train, valid = _split(X, y, 50)
        res = validate_knife(train, valid, LINEAR, SE, grid=[0.0, 0.5, 2.0])
        assert res.errors.shape == (3,)
        assert res.errors[res.index] == res.errors.min()
        f = res.model.decision_standardized(valid.X)
        assert mse(valid.y, f) == pytest.approx(res.errors[res.index], rel=1e-12)

    def test_empty_grid(self):
        train = simulate_linear(20, seed=0)
        with pytest.raises(ValueError, match="empty"):
            validate_knife(train, train, LINEAR, SE, grid=[])

    @pytest.mark.slow
    def test_pure_noise_gives_tiny_support(self):
        small = 0
        for s in range(10):
            rng = np.random.default_rng(500 + s)
            X = rng.standard_normal((1100, 10))
            train, valid = _split(X, rng.standard_normal(1100), 100)
            res = validate_knife(train, valid, LINEAR, SE, seed=s)
            small += np.count_nonzero(res.model.w) <= 1
        assert small >= 8

    @pytest.mark.slow
    def test_strongest_feature_kept(self):
        kept = 0
        for s in range(10):
            train = simulate_linear(100, seed=600 + s)
            v = simulate_linear(1000, seed=700 + s)
            valid = Dataset.from_raw(v.raw(), v.y, "regression", stats=train.stats)
            kept += validate_knife(train, valid, LINEAR, SE, seed=s).model.w[0] > 0
        assert kept >= 9


def _ridge_fit(train, lam):
    return fit_baseline(train, "ridge", lam)


class TestKfold:
    X = np.array([[0.0, 1.0], [1.0, -1.0], [2.0, 0.5], [-1.0, 2.0]])
    Y = np.array([1.0, 0.0, 3.0, -2.0])

    def _data(self):
        return Dataset.from_raw(self.X, self.Y, "regression")

    def _loo_by_hand(self, data, lam):
        errs = []
        for i in range(data.n):
            keep = [j for j in range(data.n) if j != i]
            Xk, yk = data.X[keep], data.y[keep]
            beta = ridge_coefficients(Xk, yk - yk.mean(), lam)
            errs.append((data.y[i] - yk.mean() - data.X[i] @ beta) ** 2)
        return np.mean(errs)

    def test_leave_one_out_matches_enumeration(self):
        data = self._data()
        grid = [0.1, 1.0, 10.0]
        best, params, means = kfold_cv(data, 4, _ridge_fit, grid)
        expected = np.array([self._loo_by_hand(data, lam) for lam in grid])
        np.testing.assert_allclose(means, expected, rtol=1e-8)
        assert best == grid[int(np.argmin(expected))]

    def test_duplicate_grid_entries(self):
        data = self._data()
        _, params, _ = kfold_cv(data, 2, _ridge_fit, [1.0, 0.1, 1.0])
        np.testing.assert_array_equal(params, [0.1, 1.0])

    def test_ties_follow_preference(self):
        def constant(train, param):
            return fit_baseline(train, "ridge", 1e12)

        data = self._data()
        assert kfold_cv(data, 2, constant, [1.0, 2.0])[0] == 2.0
        assert kfold_cv(data, 2, constant, [1.0, 2.0], prefer="smaller")[0] == 1.0

    def test_deterministic_folds(self):
        data = simulate_linear(30, seed=3)
        a = kfold_cv(data, 5, _ridge_fit, [0.1, 10.0], seed=4)
        b = kfold_cv(data, 5, _ridge_fit, [0.1, 10.0], seed=4)
        np.testing.assert_array_equal(a[2], b[2])

    @pytest.mark.parametrize("k", [1, 5])
    def test_bad_fold_count(self, k):
        with pytest.raises(ValueError, match="2 <= k <= n"):
            kfold_cv(self._data(), k, _ridge_fit, [1.0])


class TestReport:
    def test_mean_and_se(self):
        train = np.array([1.0, 2.0, 4.0, np.nan])
        test = np.array([0.5, 0.25, 1.0, np.nan])
        rep = BenchmarkReport("m", train, test, np.zeros(4), failures=1)
        assert rep.n_replicates == 3
        v = test[:3]
        sd = math.sqrt(sum((x - v.mean()) ** 2 for x in v) / 2)
        assert rep.mean_test == pytest.approx(v.mean(), abs=1e-12)
        assert rep.se_test == pytest.approx(sd / math.sqrt(3), abs=1e-12)
        assert rep.mean_train == pytest.approx(7 / 3, abs=1e-12)

    def test_single_replicate_has_no_se(self):
        rep = BenchmarkReport("m", np.array([1.0]), np.array([2.0]), np.array([0.0]))
        assert math.isnan(rep.se_test) and rep.mean_test == 2.0

    def test_csv_bytes(self, tmp_path):
        rep = BenchmarkReport("ridge", np.array([1.0, 3.0]), np.array([0.5, 1.5]),
                              np.array([0.1, 10.0]))
        a, b = tmp_path / "r.csv", tmp_path / "a.csv"
        write_reports([rep], a, b)
        assert a.read_text() == (
            "method,replicate,train_error,test_error,chosen_param\n"
            "ridge,0,1.0,0.5,0.1\n"
            "ridge,1,3.0,1.5,10.0\n"
        )
        se = repr(float(np.std([0.5, 1.5], ddof=1) / math.sqrt(2)))
        se_tr = repr(float(np.std([1.0, 3.0], ddof=1) / math.sqrt(2)))
        assert b.read_text() == (
            "method,mean_train,se_train,mean_test,se_test,n_replicates,n_failed\n"
            f"ridge,2.0,{se_tr},1.0,{se},2,0\n"
        )

    def test_sweep_csv(self, tmp_path):
        rep = BenchmarkReport("svm", np.array([0.1]), np.array([0.2]), np.array([1.0]))
        out = tmp_path / "s.csv"
        write_sweep({3: [rep], 0: [rep]}, out)
        lines = out.read_text().splitlines()
        assert lines[0].startswith("noise_features,method")
        assert [ln.split(",")[0] for ln in lines[1:]] == ["0", "3"]


class TestBenchmark:
    SIM = SimSpec("linear", n=30)

    def test_tables_reference_known_methods(self):
        for names in TABLES.values():
            assert all(n in METHODS for n in names)

    def test_runs_and_is_deterministic(self):
        a = run_benchmark(self.SIM, ["ridge"], 3, seed=1, n_valid=40, n_test=40)
        b = run_benchmark(self.SIM, ["ridge"], 3, seed=1, n_valid=40, n_test=40)
        assert a[0].test_errors.shape == (3,)
        np.testing.assert_array_equal(a[0].test_errors, b[0].test_errors)
        assert a[0].failures == 0 and a[0].settings["simulation"] == "linear"
        assert a[0].mean_test < 5.0

    def test_test_set_never_reaches_fitting(self, monkeypatch):
        seen = []
        real = ev.fit_method

        def spy(spec, train, valid, seed=0):
            seen.append((train.n, valid.n))
            return real(spec, train, valid, seed)

        monkeypatch.setattr(ev, "fit_method", spy)
        run_benchmark(self.SIM, ["ridge"], 2, n_valid=41, n_test=43)
        assert seen == [(30, 41), (30, 41)]

    def test_failures_recorded(self, monkeypatch):
        calls = {"n": 0}
        real = ev.fit_method

        def flaky(spec, train, valid, seed=0):
            calls["n"] += 1
            if calls["n"] == 2:
                raise FloatingPointError("boom")
            return real(spec, train, valid, seed)

        monkeypatch.setattr(ev, "fit_method", flaky)
        rep = run_benchmark(self.SIM, ["ridge"], 3, n_valid=40, n_test=40)[0]
        assert rep.failures == 1 and rep.n_replicates == 2
        assert np.isnan(rep.test_errors[1])
        assert np.isfinite(rep.mean_test)

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="unknown methods"):
            run_benchmark(self.SIM, ["lasso"], 1)

    def test_sweep_keys(self):
        out = run_noise_sweep(["svm"], noise_counts=[0, 2], replicates=1, n=40,
                              n_valid=40, n_test=40)
        assert sorted(out) == [0, 2]
        assert out[2][0].settings["p_noise"] == 2
