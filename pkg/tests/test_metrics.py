"""Monte Carlo summary metrics against the loop-coded reference file."""

import math

import numpy as np
import pytest

from npinfer.errors import DataError
from npinfer.metrics import METRICS_CSV_HEADER, compute_metrics, metrics_row

import reference_estimators as bf


def frozen_instance():
    values = np.array([9.0, 11.0, 10.5, 9.5])
    variances = np.array([4.0, 4.0, 1.0, 1.0])
    ci_low = np.array([8.0, 10.5, 9.0, 9.0])
    ci_high = np.array([10.0, 12.0, 11.0, 10.0])
    return values, variances, ci_low, ci_high, 10.0


class TestAgainstReference:
    def test_frozen_four_iteration_instance(self):
        values, variances, ci_low, ci_high, truth = frozen_instance()
        got = compute_metrics(values, variances, ci_low, ci_high, truth)
        # worked by hand: errors (-1, 1, .5, -.5) average to zero, squared
        # average 0.625, one of four intervals misses, lengths average 1.625
        assert got["rbias"] == pytest.approx(0.0, abs=1e-12)
        assert got["rmse"] == pytest.approx(100.0 * math.sqrt(0.625) / 10.0, rel=1e-12)
        assert got["crci"] == pytest.approx(75.0)
        assert got["rlci"] == pytest.approx(16.25, rel=1e-12)
        assert got["rse"] == pytest.approx(1.5 / math.sqrt(2.5 / 3.0), rel=1e-12)
        assert got["k"] == 4

    def test_random_instances_match_loop_reference(self):
        rng = np.random.default_rng(40)
        for _ in range(25):
            k = int(rng.integers(2, 40))
            truth = float(rng.uniform(0.5, 8.0))
            values = truth + rng.normal(0.0, 1.0, size=k)
            variances = rng.uniform(0.2, 3.0, size=k)
            half = rng.uniform(0.1, 2.5, size=k)
            ci_low, ci_high = values - half, values + half
            got = compute_metrics(values, variances, ci_low, ci_high, truth)
            want = bf.metrics(list(values), list(variances), list(ci_low),
                              list(ci_high), truth)
            for key, val in want.items():
                assert got[key] == pytest.approx(val, rel=1e-12), key


class TestKnownAnswers:
    def test_exact_estimates_give_zero_error_and_full_coverage(self):
        values = np.full(6, 3.5)
        got = compute_metrics(values, np.zeros(6), values - 0.1, values + 0.1, 3.5)
        assert got["rbias"] == 0.0
        assert got["rmse"] == 0.0
        assert got["crci"] == 100.0

    def test_symmetric_errors_cancel_in_bias_not_rmse(self):
        truth, delta = 4.0, 0.75
        values = np.array([truth - delta, truth + delta] * 8)
        got = compute_metrics(values, np.ones(16), values - 2, values + 2, truth)
        assert got["rbias"] == pytest.approx(0.0, abs=1e-12)
        assert got["rmse"] == pytest.approx(100.0 * delta / truth, rel=1e-12)

    def test_honest_variances_put_se_ratio_near_one(self):
        # estimates Normal(truth, sigma^2) reported with the exact variance:
        # the mean reported SE and the empirical sd estimate the same sigma
        rng = np.random.default_rng(41)
        truth, sigma, k = 5.0, 0.8, 2000
        values = truth + sigma * rng.standard_normal(k)
        got = compute_metrics(values, np.full(k, sigma ** 2),
                              values - 1, values + 1, truth)
        assert abs(got["rse"] - 1.0) <= 0.05


class TestInvariants:
    def test_rmse_decomposes_into_bias_and_spread(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            k = int(rng.integers(2, 60))
            truth = float(rng.uniform(0.5, 6.0))
            values = truth + rng.normal(0.3, 1.2, size=k)
            got = compute_metrics(values, np.ones(k), values - 1, values + 1, truth)
            sd = float(values.std(ddof=1))
            want = got["rbias"] ** 2 + (100.0 * sd / truth) ** 2 * (k - 1) / k
            assert got["rmse"] ** 2 == pytest.approx(want, rel=1e-9)

    def test_coverage_is_affine_invariant(self):
        values, variances, ci_low, ci_high, truth = frozen_instance()
        base = compute_metrics(values, variances, ci_low, ci_high, truth)
        a, b = 2.5, 3.0
        shifted = compute_metrics(a + b * values, variances,
                                  a + b * ci_low, a + b * ci_high, a + b * truth)
        assert shifted["crci"] == base["crci"]


class TestEdgeCases:
    def test_single_iteration_leaves_se_ratio_undefined(self):
        got = compute_metrics(np.array([4.0]), np.array([1.0]),
                              np.array([3.0]), np.array([5.0]), 4.0)
        assert math.isnan(got["rse"])
        assert got["k"] == 1

    def test_degenerate_spread_reports_infinite_ratio(self):
        values = np.full(5, 2.0)
        got = compute_metrics(values, np.ones(5), values - 1, values + 1, 2.0)
        assert math.isinf(got["rse"])

    def test_no_iterations_rejected(self):
        with pytest.raises(DataError):
            compute_metrics(np.array([]), np.array([]), np.array([]),
                            np.array([]), 1.0)

    def test_zero_truth_rejected(self):
        with pytest.raises(DataError):
            compute_metrics(np.array([1.0, 2.0]), np.ones(2),
                            np.zeros(2), np.ones(2), 0.0)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            compute_metrics(np.array([1.0, 2.0]), np.ones(3),
                            np.zeros(2), np.ones(2), 1.0)


def test_row_carries_cell_labels_through():
    summary = {"rbias": 1.0, "rmse": 2.0, "crci": 95.0, "rlci": 10.0,
               "rse": 1.05, "k": 30}
    row = metrics_row("GPPP", "LIN", "true", "false", 0.3, "continuous", summary)
    assert row.method == "GPPP"
    assert row.pm_spec == "false"
    assert row.rse == 1.05
    assert row.k == 30
    assert set(METRICS_CSV_HEADER) >= {"method", "rbias", "rse", "k"}
