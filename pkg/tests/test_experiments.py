import csv
from pathlib import Path

import numpy as np
import pytest
from scipy.special import expit

from frechetnet.config import TrainConfig
from frechetnet.errors import DimensionError, FormatError, ParameterError
from frechetnet.experiments import (
    McResult,
    composition_header,
    exp1_location_scale,
    exp2_edge_weights,
    fit_predict,
    gen_experiment1,
    gen_experiment2,
    gen_mask,
    load_compositions,
    mspe,
    run_cv,
    run_monte_carlo,
    standardization,
)
from frechetnet.numerics import seeded_rng
from frechetnet.spaces import Aitchison, Euclidean, Laplacian, Wasserstein

SAMPLE = Path(__file__).resolve().parents[1] / "docs" / "compositions_sample.csv"
TINY = TrainConfig(hidden_widths=(8, 3), max_epochs=20, burn_in=2, patience=5, learning_rate=0.01)


class TestExperiment1:
    def test_zero_predictors(self):
        mu, theta = exp1_location_scale(np.zeros((1, 10)))
        assert mu[0] == pytest.approx(-4.0)
        assert theta[0] == pytest.approx(0.5 + 3.5 * expit(4.0))

    def test_theta_range(self):
        X, _ = gen_experiment1(2000, seeded_rng(0))
        _, theta = exp1_location_scale(X)
        # open interval in exact arithmetic; expit saturates in double precision
        assert np.all((theta >= 0.5) & (theta <= 4.0))
        assert np.all(np.isfinite(theta))

    def test_predictor_law(self):
        X, _ = gen_experiment1(20000, seeded_rng(1))
        corr = np.corrcoef(X[:, :4].T)
        np.testing.assert_allclose(corr[np.triu_indices(4, 1)], 0.1, atol=0.03)
        np.testing.assert_allclose(X[:, 4:9].mean(axis=0), 1.0, atol=0.05)
        assert set(np.unique(X[:, 9])) == {0.0, 1.0}
        assert X[:, 9].mean() == pytest.approx(0.3, abs=0.02)

    def test_responses_are_sorted_quantiles(self):
        X, Y = gen_experiment1(50, seeded_rng(2))
        assert Y.shape == (50, 100)
        sp = Wasserstein(100)
        assert all(sp.is_valid(y) for y in Y)

    def test_deterministic(self):
        a = gen_experiment1(10, seeded_rng(3))
        b = gen_experiment1(10, seeded_rng(3))
        np.testing.assert_array_equal(a[1], b[1])


class TestExperiment2:
    def test_mask(self):
        A = gen_mask(10, seeded_rng(0))
        np.testing.assert_array_equal(A, A.T)
        assert np.all(np.diag(A) == 0) and set(np.unique(A)) <= {0, 1}

    def test_weight_bounds_noiseless(self):
        q = 10
        A, X, L = gen_experiment2(500, seeded_rng(1), q=q)
        W = -L
        k = np.arange(1, q + 1)
        s = np.sin((k[:, None] + k[None, :]) * np.pi / (2 * q))
        on = (np.triu(A, 1) > 0)
        assert np.all(W[:, on] >= s[on] - 1e-12)
        assert np.all(W[:, on] <= 3 * s[on] + 1e-12)
        off = (np.triu(np.ones((q, q)), 1) > 0) & (A == 0)
        assert np.all(W[:, off] == 0)

    @pytest.mark.parametrize("a", [0.0, 0.1, 1.0])
    def test_responses_valid(self, a):
        _, _, L = gen_experiment2(200, seeded_rng(2), q=6, a=a)
        sp = Laplacian(6)
        assert all(sp.is_valid(x) for x in L)

    def test_noise_clipping(self):
        A = np.ones((3, 3)) - np.eye(3)
        X = np.zeros((2000, 10))
        W = exp2_edge_weights(X, A, a=5.0, rng=seeded_rng(3))
        assert W.min() == 0.0

    def test_too_many_nodes(self):
        with pytest.raises(ParameterError):
            gen_experiment2(5, seeded_rng(0), q=12)


class TestCompositions:
    def _write(self, path, rows):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(composition_header())
            w.writerows(rows)

    def _rows(self, n, rng):
        shares = rng.dirichlet(np.ones(9), n)
        preds = rng.normal(size=(n, 17))
        return [[f"S{i}"] + [repr(float(v)) for v in np.concatenate([shares[i], preds[i]])] for i in range(n)]

    def test_well_formed(self, tmp_path):
        p = tmp_path / "c.csv"
        self._write(p, self._rows(49, seeded_rng(0)))
        X, Y = load_compositions(p)
        assert X.shape == (49, 17) and Y.shape == (49, 9)
        np.testing.assert_allclose(Y.sum(axis=1), 1.0, atol=1e-12)

    def test_zero_share_floored(self, tmp_path):
        rows = self._rows(49, seeded_rng(1))
        rows[0][1:10] = ["0.0"] + ["0.125"] * 8
        p = tmp_path / "c.csv"
        self._write(p, rows)
        _, Y = load_compositions(p)
        assert Y[0, 0] == pytest.approx(1e-8 / (1 + 1e-8), rel=1e-12)

    def test_row_count(self, tmp_path):
        p = tmp_path / "c.csv"
        self._write(p, self._rows(48, seeded_rng(2)))
        with pytest.raises(FormatError):
            load_compositions(p)

    def test_negative_share(self, tmp_path):
        rows = self._rows(49, seeded_rng(3))
        rows[5][1] = "-0.1"
        p = tmp_path / "c.csv"
        self._write(p, rows)
        with pytest.raises(FormatError):
            load_compositions(p)

    def test_column_count(self, tmp_path):
        rows = self._rows(49, seeded_rng(4))
        rows[2] = rows[2][:-1]
        p = tmp_path / "c.csv"
        self._write(p, rows)
        with pytest.raises(FormatError):
            load_compositions(p)

    def test_sample_file(self):
        X, Y, states = load_compositions(SAMPLE, expected_rows=3, return_states=True)
        assert states == ["Alabama", "Alaska", "Arizona"]
        assert X.shape == (3, 17) and np.all(Y > 0)


class TestMspe:
    def test_zero(self):
        Y = np.random.default_rng(0).normal(size=(5, 2))
        assert mspe(Y, Y, Euclidean(2)) == 0.0

    def test_arithmetic(self):
        assert mspe([[0.0], [0.0]], [[1.0], [3.0]], Euclidean(1)) == pytest.approx(5.0)

    def test_permutation(self):
        rng = seeded_rng(1)
        P, T = rng.normal(size=(9, 3)), rng.normal(size=(9, 3))
        perm = rng.permutation(9)
        assert mspe(P, T, Euclidean(3)) == pytest.approx(mspe(P[perm], T[perm], Euclidean(3)), rel=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            mspe(np.zeros((2, 1)), np.zeros((3, 1)), Euclidean(1))

    def test_aitchison_zero_floor(self):
        assert np.isfinite(mspe([[0.0, 1.0]], [[0.5, 0.5]], Aitchison(2)))


class TestHarness:
    def test_standardization(self):
        X = np.column_stack([np.arange(5.0), np.ones(5)])
        shift, scale = standardization(X)
        np.testing.assert_allclose(shift, [2.0, 1.0])
        np.testing.assert_allclose(scale, [np.sqrt(2.0), 1.0])

    def test_gfr_unaffected_by_standardization(self):
        from frechetnet.head import gfr_predict

        rng = seeded_rng(3)
        X = rng.normal(size=(30, 3)) * [1, 10, 100] + 5
        Y = np.sort(rng.normal(size=(30, 5)), axis=1)
        Xq = rng.normal(size=(4, 3))
        a = fit_predict("GFR", X, Y, Xq, Wasserstein(5))
        b = gfr_predict(Xq, X, Y, Wasserstein(5))
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_unknown_method(self):
        with pytest.raises(ParameterError):
            fit_predict("SDR", np.zeros((5, 1)), np.zeros((5, 1)), np.zeros((1, 1)), Euclidean(1))

    def test_mc_single_replicate_wiring(self):
        res = run_monte_carlo(2, 30, 1, ("GFR", "DFNN", "MEAN"), TINY, base_seed=5, q=4)
        assert set(res) == {"GFR", "DFNN", "MEAN"}
        assert all(len(r.values) == 1 and r.failures == 0 for r in res.values())

    def test_mc_deterministic(self):
        a = run_monte_carlo(1, 25, 2, ("GFR", "DFNN"), TINY, base_seed=9)
        b = run_monte_carlo(1, 25, 2, ("GFR", "DFNN"), TINY, base_seed=9)
        assert a["GFR"].values == b["GFR"].values and a["DFNN"].values == b["DFNN"].values

    def test_mc_parallel_matches_serial(self):
        a = run_monte_carlo(2, 25, 2, ("GFR", "DFNN"), TINY, base_seed=1, q=4, jobs=1)
        b = run_monte_carlo(2, 25, 2, ("GFR", "DFNN"), TINY, base_seed=1, q=4, jobs=2)
        assert a["DFNN"].values == b["DFNN"].values

    def test_mc_result_stats(self):
        r = McResult("GFR", [1.0, 2.0, 4.0])
        assert r.mean == pytest.approx(7 / 3)
        assert r.sd == pytest.approx(np.std([1.0, 2.0, 4.0], ddof=1), rel=1e-12)

    def test_mc_needs_replicates(self):
        with pytest.raises(ParameterError):
            run_monte_carlo(1, 20, 0)

    def test_cv_leave_one_out_and_mean_ordering(self):
        rng = seeded_rng(6)
        X = rng.normal(size=(20, 2))
        logits = np.column_stack([X[:, 0], -X[:, 0], X[:, 1], np.zeros(20)])
        Y = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        res = run_cv(X, Y, folds=20, repeats=2, methods=("GFR", "MEAN"))
        assert res["MEAN"].mean >= res["GFR"].mean

    def test_cv_too_few(self):
        with pytest.raises(ParameterError):
            run_cv(np.zeros((5, 2)), np.full((5, 3), 1 / 3), folds=10)
