import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decision_sea.core import LabeledDataset, LabelSpace, softmax
from decision_sea.errors import ConfigError, DataError, InputError, ParameterError
from decision_sea.metrics import decision_calibration_error
from decision_sea.scenarios import SyntheticGeneratorSpec, generate_dataset, uav_scenario
from decision_sea.sea import (
    BinningModel,
    ConformalModel,
    OodThresholdModel,
    SigmoidScalingModel,
    TemperatureModel,
    apply_decision_calibration,
    apply_histogram_binning,
    apply_temperature,
    conformal_set,
    conformal_threshold,
    fit_conformal,
    fit_decision_calibration,
    fit_histogram_binning,
    fit_temperature_nll,
    msp_ood,
    search_conformal_alpha,
    sigmoid_scale,
)


def dataset_from_probs(probs, labels):
    probs = np.asarray(probs, float)
    k = probs.shape[1]
    with np.errstate(divide="ignore"):
        logits = np.log(np.maximum(probs, 1e-300))
    return LabeledDataset(LabelSpace([f"c{i}" for i in range(k)]), [str(i) for i in range(len(probs))],
                          logits, np.asarray(labels), ["calibration"] * len(probs))


def synthetic(k=3, n=5000, T=1.0, seed=0, separation=2.0):
    return generate_dataset(SyntheticGeneratorSpec(k=k, n=n, true_temperature=T, seed=seed,
                                                   separation=separation))


def grid_nll_oracle(logits, labels, grid):
    """Dense-grid NLL minimizer written without the library's log-softmax path."""
    best_t, best = None, math.inf
    rows = np.arange(len(labels))
    for t in grid:
        s = logits / t
        shift = s.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(s - shift).sum(axis=1)) + shift[:, 0]
        nll = np.mean(log_norm - s[rows, labels])
        if nll < best:
            best_t, best = t, nll
    return best_t


class TestTemperature:
    @pytest.mark.parametrize("T_true, lo, hi", [(2.5, 2.4, 2.6), (1.0, 0.95, 1.05)])
    def test_recovers_generating_temperature(self, T_true, lo, hi):
        ds = synthetic(n=50_000, T=T_true, seed=11)
        fitted = fit_temperature_nll(ds).T
        oracle = grid_nll_oracle(ds.logits, ds.labels, np.arange(lo - 0.2, hi + 0.2, 0.0005))
        assert lo <= fitted <= hi
        assert abs(fitted - oracle) <= 1e-3

    def test_never_worse_than_identity(self):
        from decision_sea.sea import mean_nll

        ds = synthetic(n=300, T=0.7, seed=4)
        T = fit_temperature_nll(ds).T
        assert mean_nll(ds.logits, ds.labels, T) <= mean_nll(ds.logits, ds.labels, 1.0)

    def test_too_few_examples(self):
        with pytest.raises(DataError):
            fit_temperature_nll(synthetic(n=3))

    def test_unlabeled(self):
        ds = synthetic(n=20)
        ds.labels[0] = -1
        with pytest.raises(DataError):
            fit_temperature_nll(ds)

    def test_apply(self):
        z = np.array([1.0, -0.5, 2.0])
        np.testing.assert_array_equal(apply_temperature(TemperatureModel(1.0), z).probs, softmax(z))
        np.testing.assert_allclose(apply_temperature(TemperatureModel(1000.0), [3.0, 0, 0]).probs,
                                   [1 / 3] * 3, atol=1e-3)
        e = math.e
        np.testing.assert_allclose(apply_temperature(TemperatureModel(2.0), [2.0, 0.0]).probs,
                                   [e / (e + 1), 1 / (e + 1)], rtol=0, atol=1e-15)

    @settings(max_examples=100)
    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=6), st.floats(0.05, 20))
    def test_prediction_unchanged(self, z, T):
        z = np.array(z)
        preds, out = TemperatureModel(T).assess(z)
        assert preds == np.argmax(z)
        assert out.probs[np.argmax(z)] == out.probs.max()


class TestHistogramBinning:
    def test_all_correct_high_confidence(self):
        ds = dataset_from_probs(np.tile([0.95, 0.05], (8, 1)), [0] * 8)
        model = fit_histogram_binning(ds, 10)
        assert model.bin_values[9] == 1.0
        assert float(apply_histogram_binning(model, np.log([0.95, 0.05])).value) == 1.0

    def test_counted_bin_and_empty_midpoint(self):
        probs = np.tile([0.65, 0.35], (5, 1))
        labels = [0, 0, 0, 1, 1]
        model = fit_histogram_binning(dataset_from_probs(probs, labels), 10)
        recount = sum(1 for y in labels if y == 0) / len(labels)
        assert recount == 0.6
        assert model.bin_values[6] == pytest.approx(0.6)
        assert model.bin_values[0] == pytest.approx(0.05)

    def test_edges_and_clamp(self):
        edges = np.linspace(0, 1, 11)
        model = BinningModel(edges, np.arange(10) / 10)
        assert model.lookup(edges[5]) == model.bin_values[5]
        assert model.lookup(edges[3]) == model.bin_values[3]
        assert model.lookup(1.0) == model.bin_values[9]
        # max-prob 0.5 for two equal logits lands on the 0.5 edge -> upper bin
        assert float(apply_histogram_binning(model, [0.0, 0.0]).value) == model.bin_values[5]
        assert float(apply_histogram_binning(model, [200.0, -200.0]).value) == model.bin_values[9]

    def test_bad_bins(self):
        with pytest.raises(ParameterError):
            fit_histogram_binning(synthetic(n=20), 0)
        with pytest.raises(ParameterError):
            BinningModel([0.0, 0.6, 0.5, 1.0], [0.1, 0.2, 0.3])

    def test_fixed_point(self):
        ds = synthetic(n=4000, T=2.0, seed=5)
        model = fit_histogram_binning(ds, 12)
        p = softmax(ds.logits)
        original_bin = np.clip(np.searchsorted(model.bin_edges, p.max(axis=1), side="right") - 1, 0, 11)
        rebinned = model.lookup(p.max(axis=1))
        correct = np.argmax(p, axis=1) == ds.labels
        for b in np.unique(original_bin):
            members = original_bin == b
            assert abs(correct[members].mean() - rebinned[members].mean()) <= 1e-12


class TestConformal:
    def test_quantile_rule(self):
        scores = np.arange(1, 10) / 10
        assert conformal_threshold(scores, 0.1) == 0.9
        assert conformal_threshold(scores, 0.05) == math.inf
        assert conformal_threshold([0.3], 0.5) == 0.3

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
    def test_alpha_domain(self, alpha):
        with pytest.raises(ParameterError):
            fit_conformal(synthetic(n=10), alpha)

    def test_fit_uses_true_label_scores(self):
        probs = np.array([[1 - s, s] for s in np.arange(1, 10) / 10])
        model = fit_conformal(dataset_from_probs(probs, [0] * 9), 0.1)
        assert model.tau == pytest.approx(0.9) and model.n_cal == 9

    def test_sets(self):
        z = np.log([0.7, 0.2, 0.1])
        assert conformal_set(ConformalModel(0.1, 0.35, 10), z).members == {0}
        assert conformal_set(ConformalModel(0.1, math.inf, 10), z).members == {0, 1, 2}
        assert conformal_set(ConformalModel(0.1, 0.0, 10), z).members == frozenset()

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.98), st.floats(0.01, 0.98))
    def test_monotone_in_alpha(self, seed, a1, a2):
        lo, hi = sorted([a1, a2])
        cal = synthetic(n=200, seed=seed % 1000)
        test = synthetic(n=200, seed=seed % 1000 + 1)
        big = conformal_set(fit_conformal(cal, lo), test.logits).mask
        small = conformal_set(fit_conformal(cal, hi), test.logits).mask
        assert np.all(small <= big)

    def test_marginal_coverage(self):
        cov = []
        for seed in range(10):
            cal, test = synthetic(n=1000, seed=2 * seed), synthetic(n=10_000, seed=2 * seed + 1)
            mask = conformal_set(fit_conformal(cal, 0.1), test.logits).mask
            cov.append(mask[np.arange(len(test)), test.labels].mean())
        assert 0.88 <= np.mean(cov) <= 0.92

    def test_permutation_keeps_quantile(self):
        cal = synthetic(n=301, seed=9)
        perm = cal.subset(np.random.default_rng(0).permutation(len(cal)))
        assert fit_conformal(cal, 0.1).tau == fit_conformal(perm, 0.1).tau


def simulate_decision_error(cal, confusion, alpha, rng, reps=200):
    """Monte-Carlo oracle: draw the decision-maker's choice instead of integrating it."""
    cut = (len(cal) + 1) // 2
    scores = np.sort(1 - softmax(cal.logits[:cut])[np.arange(cut), cal.labels[:cut]])
    rank = math.ceil((cut + 1) * (1 - alpha) - 1e-9)
    tau = math.inf if rank > cut else scores[rank - 1]
    held_p = softmax(cal.logits[cut:])
    held_y = cal.labels[cut:]
    k = cal.k
    errors = 0
    for p, y in zip(held_p, held_y):
        members = [j for j in range(k) if 1 - p[j] <= tau]
        if not members:
            options, weights = list(range(k)), np.ones(k)
        elif y in members and confusion[y, members].sum() > 0:
            options, weights = members, confusion[y, members]
        else:
            options, weights = members, np.ones(len(members))
        picks = rng.choice(options, size=reps, p=weights / weights.sum())
        errors += np.sum(picks != y)
    return errors / (reps * len(held_y))


class TestConformalAlphaSearch:
    GRID = [0.02, 0.05, 0.1, 0.2, 0.3]

    def test_identity_confusion_error_is_miscoverage(self):
        cal = synthetic(n=2000, seed=21, separation=3.0)
        alpha, err = search_conformal_alpha(cal, np.eye(3), self.GRID)
        cut = 1000
        model = fit_conformal(cal.subset(slice(0, cut)), alpha)
        mask = conformal_set(model, cal.logits[cut:]).mask
        y = cal.labels[cut:]
        miscoverage = 1 - mask[np.arange(len(y)), y].mean()
        empty = (mask.sum(axis=1) == 0).mean()
        assert err == pytest.approx(miscoverage - empty / 3, abs=1e-12)
        assert alpha == self.GRID[0]
        mc = simulate_decision_error(cal, np.eye(3), alpha, np.random.default_rng(0))
        assert abs(mc - err) < 0.01

    def test_uniform_confusion_monte_carlo(self):
        cal = synthetic(n=1000, seed=22)
        conf = np.full((3, 3), 1 / 3)
        alpha, err = search_conformal_alpha(cal, conf, self.GRID)
        assert alpha in self.GRID
        mc = simulate_decision_error(cal, conf, alpha, np.random.default_rng(1))
        assert abs(mc - err) < 0.015

    def test_singleton_grid(self):
        assert search_conformal_alpha(synthetic(n=100), np.eye(3), [0.1])[0] == 0.1

    def test_rejects_non_stochastic(self):
        with pytest.raises(InputError):
            search_conformal_alpha(synthetic(n=100), np.full((3, 3), 0.5), [0.1])


class TestDecisionCalibration:
    COST = uav_scenario().cost

    def skewed(self):
        probs = np.tile([0.9, 0.05, 0.05], (20, 1))
        return dataset_from_probs(probs, [0] * 10 + [1] * 8 + [2] * 2)

    def test_first_iteration_hand_computed(self):
        ds = self.skewed()
        model = fit_decision_calibration(ds, self.COST, epsilon=1e-9, max_iter=1)
        # straight-line recomputation: every member induces Scan (cost 5 < 48.75)
        g = np.array([0.9, 0.05, 0.05])
        assert g @ self.COST.costs[:, 1] < g @ self.COST.costs[:, 0]
        freq = np.array([10, 8, 2]) / 20
        np.testing.assert_allclose(freq - g, [-0.4, 0.35, 0.05], atol=1e-12)
        np.testing.assert_allclose(model.corrections[0, 1], [-0.4, 0.35, 0.05], atol=1e-12)
        np.testing.assert_array_equal(model.corrections[0, 0], 0.0)
        out = apply_decision_calibration(model, np.log(g)).probs
        np.testing.assert_allclose(out, [0.5, 0.4, 0.1], atol=1e-12)

    def test_fixed_point(self):
        probs = np.tile([0.5, 0.4, 0.1], (10, 1))
        ds = dataset_from_probs(probs, [0] * 5 + [1] * 4 + [2])
        model = fit_decision_calibration(ds, self.COST, epsilon=1e-6)
        assert model.iterations_used == 0
        np.testing.assert_array_equal(model.cumulative_corrections, 0.0)

    def test_loose_epsilon(self):
        ds = self.skewed()
        dce = decision_calibration_error(softmax(ds.logits), ds.labels, self.COST)
        model = fit_decision_calibration(ds, self.COST, epsilon=dce + 1)
        assert model.iterations_used == 0
        z = np.log([0.9, 0.05, 0.05])
        np.testing.assert_allclose(apply_decision_calibration(model, z).probs, softmax(z))

    def test_projection_keeps_simplex(self):
        from decision_sea.sea import DecisionCalibrationModel

        model = DecisionCalibrationModel(self.COST, np.array([[[0.0, 0.0, 0.0], [-0.5, 0.4, 0.1]]]), 0.1)
        out = apply_decision_calibration(model, np.log([0.2, 0.1, 0.7])).probs
        assert np.all(out >= 0) and out.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(out, np.array([0.0, 0.5, 0.8]) / 1.3)

    def test_trace_non_increasing(self):
        ds = synthetic(n=3000, T=3.0, seed=8)
        model = fit_decision_calibration(ds, self.COST, epsilon=1e-4, max_iter=30)
        assert all(b <= a for a, b in zip(model.dce_trace, model.dce_trace[1:]))
        np.testing.assert_allclose(
            decision_calibration_error(model.assess(ds.logits)[1].probs, ds.labels, self.COST),
            model.dce_trace[-1], atol=1e-12,
        )

    def test_errors(self):
        with pytest.raises(DataError):
            fit_decision_calibration(dataset_from_probs(np.zeros((0, 3)), []), self.COST, 0.5)
        model = fit_decision_calibration(self.skewed(), self.COST, 0.5)
        with pytest.raises(ConfigError):
            apply_decision_calibration(model, [0.0, 1.0])


class TestScalarMaps:
    def test_sigmoid(self):
        m = SigmoidScalingModel(1.0, 0.0)
        assert float(sigmoid_scale(0.0, SigmoidScalingModel(3.0, 2.0)).value) == 0.5
        assert float(sigmoid_scale(1e6, SigmoidScalingModel(0.5, 0.0)).value) == 1.0
        assert float(sigmoid_scale(1.0, m).value) == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-15)
        assert float(sigmoid_scale(1.0, m).value) == pytest.approx(0.7311, abs=1e-4)
        with pytest.raises(ParameterError):
            SigmoidScalingModel(-1.0, 0.0)

    @given(st.floats(0.01, 10), st.floats(0, 10), st.floats(-50, 50), st.floats(-50, 50))
    def test_sigmoid_monotone(self, a, b, x1, x2):
        m = SigmoidScalingModel(a, b)
        lo, hi = sorted([x1, x2])
        assert float(sigmoid_scale(lo, m).value) <= float(sigmoid_scale(hi, m).value)

    def test_msp(self):
        v = msp_ood(np.zeros(4), OodThresholdModel(0.5))
        assert float(v.score) == 0.25 and bool(v.is_ood)
        assert not bool(msp_ood(np.log([0.9, 0.1]), OodThresholdModel(0.5)).is_ood)
        assert not bool(msp_ood([0.0, 0.0], OodThresholdModel(0.5)).is_ood)
        with pytest.raises(ParameterError):
            OodThresholdModel(1.5)
