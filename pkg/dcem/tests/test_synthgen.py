import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from dcem.exceptions import CalibrationError, InfeasibleConfig
from dcem.synthgen import (
    TARGET_PREVALENCE, Dataset, LabeledExample, SimConfig, SimParams, _bisect, boundary_scores,
    empirical_rates, generate, outcome_score, simulated_rates, solve_sim_params,
)

from .utils import QUICK_SAMPLES, small_splits


class SimConfigTests(SimpleTestCase):
    def test_targets_average_to_overall_rates(self):
        cfg = SimConfig(q_t=2, q_y=0.5, k=1)
        p0, p1 = cfg.prevalence_targets
        self.assertAlmostEqual((p0 + p1) / 2, TARGET_PREVALENCE)
        self.assertAlmostEqual(p0 / p1, 0.5)
        t0, t1 = cfg.testing_targets
        self.assertAlmostEqual((t0 + t1) / 2, cfg.k * TARGET_PREVALENCE)
        self.assertAlmostEqual(t0 / t1, 2)

    def test_testing_rate_above_one_is_infeasible(self):
        with self.assertRaisesMessage(InfeasibleConfig, 'infeasible testing rates'):
            SimConfig(q_t=2, k=4)

    def test_rejects_out_of_range_values(self):
        for kwargs in ({'q_y': 1.5}, {'q_t': 0}, {'k': -1}, {'n': 0}, {'overlap_scale': math.inf}):
            with self.subTest(kwargs=kwargs), self.assertRaises(InfeasibleConfig):
                SimConfig(**kwargs)


class CalibrationTests(SimpleTestCase):
    def test_monte_carlo_reproduces_targets(self):
        for q_t, q_y, k in ((2, 0.5, 1), (1, 1, 2), (0.5, 0.5, 0.5)):
            with self.subTest(q_t=q_t, q_y=q_y, k=k):
                cfg = SimConfig(q_t=q_t, q_y=q_y, k=k)
                params = solve_sim_params(cfg)
                rates = simulated_rates(cfg, params)
                p_y0, p_y1 = cfg.prevalence_targets
                p_t0, p_t1 = cfg.testing_targets
                self.assertAlmostEqual(rates['p_y0'], p_y0, delta=0.005)
                self.assertAlmostEqual(rates['p_y1'], p_y1, delta=0.005)
                self.assertAlmostEqual(rates['p_t0'], p_t0, delta=0.005)
                self.assertAlmostEqual(rates['p_t1'], p_t1, delta=0.005)

    def test_equal_disparities_give_identical_groups(self):
        params = solve_sim_params(SimConfig(q_t=1, q_y=1, k=1), QUICK_SAMPLES)
        self.assertEqual(params.mu_0, params.mu_1)
        self.assertEqual(params.tau_0, params.tau_1)

    def test_testing_threshold_tracks_group_mean(self):
        params = solve_sim_params(SimConfig(q_t=2, q_y=0.5, k=1), QUICK_SAMPLES)
        # the less-tested group sits further below its threshold
        self.assertGreater(params.tau_1 - 2 * params.mu_1, params.tau_0 - 2 * params.mu_0)

    def test_target_outside_bracket_reports_bracket(self):
        with self.assertRaises(CalibrationError) as ctx:
            _bisect(lambda v: 0.5, 0.9, (-1.0, 1.0), 'constant')
        self.assertEqual(ctx.exception.bracket, (-1.0, 1.0))


class GenerateTests(SimpleTestCase):
    def test_splits_have_requested_size_and_proxy_labels(self):
        train, val, test = small_splits(n=500)
        for split, name in zip((train, val, test), ('train', 'validation', 'test')):
            self.assertEqual(len(split), 500)
            self.assertEqual(split.split, name)
            self.assertEqual(split.x.shape, (500, 2))
            np.testing.assert_array_equal(split.y_obs, split.y * split.t)

    def test_same_seed_same_data(self):
        first, second = small_splits(seed=11), small_splits(seed=11)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.x, b.x)
            np.testing.assert_array_equal(a.y_obs, b.y_obs)

    def test_different_seed_different_data(self):
        first, second = small_splits(seed=11)[0], small_splits(seed=12)[0]
        self.assertFalse(np.array_equal(first.x, second.x))

    def test_splits_are_independent(self):
        train, val, _ = small_splits()
        self.assertFalse(np.array_equal(train.x, val.x))

    def test_empirical_rates_near_targets(self):
        cfg = SimConfig(n=20000, seed=5)
        train = generate(cfg, solve_sim_params(cfg, QUICK_SAMPLES))[0]
        rates = empirical_rates(train)
        for got, want in zip((rates['p_y0'], rates['p_y1']), cfg.prevalence_targets):
            self.assertAlmostEqual(got, want, delta=0.025)
        for got, want in zip((rates['p_t0'], rates['p_t1']), cfg.testing_targets):
            self.assertAlmostEqual(got, want, delta=0.025)

    def test_group_and_testing_shares_at_unit_multiple(self):
        cfg = SimConfig(k=1, n=20000, seed=6)
        train = generate(cfg, solve_sim_params(cfg, QUICK_SAMPLES))[0]
        self.assertAlmostEqual(np.mean(train.a == 0), 0.5, delta=4 * math.sqrt(0.25 / 20000))
        self.assertAlmostEqual(train.t.mean(), 0.25, delta=0.02)

    def test_equal_disparities_are_group_symmetric(self):
        cfg = SimConfig(q_t=1, q_y=1, k=1, n=20000, seed=8)
        params = solve_sim_params(cfg, QUICK_SAMPLES)
        first = generate(cfg, params)[0]
        second = generate(SimConfig(q_t=1, q_y=1, k=1, n=20000, seed=9), params)[0]
        swapped = Dataset(x=first.x, a=1 - first.a, t=first.t, y=first.y, y_obs=first.y_obs)
        mirrored, fresh = empirical_rates(swapped), empirical_rates(second)
        for key in ('p_y0', 'p_y1', 'p_t0', 'p_t1'):
            with self.subTest(rate=key):
                self.assertAlmostEqual(mirrored[key], fresh[key], delta=0.03)

    def test_every_untested_positive_is_hidden(self):
        train = small_splits(n=2000)[0]
        hidden = (train.y == 1) & (train.t == 0)
        self.assertTrue(hidden.any())
        self.assertTrue(np.all(train.y_obs[hidden] == 0))


class BoundaryTests(SimpleTestCase):
    def test_psi_shifts_outcome_boundary(self):
        x = np.array([[0.1, 0.2], [-0.3, 0.4]])
        self.assertFalse(np.allclose(outcome_score(x, 0.0), outcome_score(x, math.pi / 2)))
        np.testing.assert_allclose(outcome_score(x, 0.0), outcome_score(x, 2 * math.pi), atol=1e-12)

    def test_origin_scores(self):
        params = SimParams(mu_0=0.0, mu_1=0.0, tau_0=0.0, tau_1=1.0, c_y=0.0)
        s_y, s_t = boundary_scores(np.zeros(2), 0, params, 0.0)
        self.assertEqual(float(s_t), 0.0)
        # the origin maps to (0.5, 0.5) before the sine boundary
        self.assertAlmostEqual(float(s_y), 0.5)
        self.assertAlmostEqual(float(boundary_scores(np.zeros(2), 0, params, math.pi / 2)[0]), 0.25)

    def test_testing_score_vanishes_on_the_threshold(self):
        params = SimParams(mu_0=0.0, mu_1=0.0, tau_0=0.0, tau_1=1.0, c_y=0.0)
        self.assertAlmostEqual(float(boundary_scores([0.3, 0.7], 1, params, 0.0)[1]), 0.0)

    def test_rejects_non_planar_covariates(self):
        params = solve_sim_params(SimConfig(), QUICK_SAMPLES)
        with self.assertRaises(ValueError):
            boundary_scores(np.zeros((3, 3)), np.zeros(3), params, 0.0)


class DatasetTests(SimpleTestCase):
    def test_rejects_inconsistent_proxy_label(self):
        with self.assertRaisesMessage(ValueError, 'y_obs must equal y * t'):
            Dataset(x=[[0.0, 0.0]], a=[0], t=[0], y=[1], y_obs=[1])

    def test_from_examples_checks_dimensions(self):
        examples = [
            LabeledExample(x=np.zeros(2), a=0, t=1, y=1, y_obs=1),
            LabeledExample(x=np.zeros(3), a=1, t=0, y=0, y_obs=0),
        ]
        with self.assertRaises(ValueError):
            Dataset.from_examples(examples)

    def test_indexing_yields_labeled_examples(self):
        train = small_splits(n=50)[0]
        example = train[3]
        self.assertEqual(example.y_obs, example.y * example.t)
        self.assertEqual(len(train.examples), 50)
        rebuilt = Dataset.from_examples(train.examples)
        np.testing.assert_array_equal(rebuilt.x, train.x)

    def test_subset_and_group_features(self):
        train = small_splits(n=200)[0]
        tested = train.subset(train.tested)
        self.assertTrue(np.all(tested.t == 1))
        features = train.features(with_group=True)
        self.assertEqual(features.shape, (200, 3))
        np.testing.assert_array_equal(features[:, 2], train.a)

    def test_csv_round_trip_is_exact(self):
        train = small_splits(n=100)[0]
        with tempfile.TemporaryDirectory() as tmp:
            path = train.to_csv(Path(tmp) / 'nested' / 'train.csv')
            loaded = Dataset.from_csv(path)
        np.testing.assert_array_equal(loaded.x, train.x)
        np.testing.assert_array_equal(loaded.y_obs, train.y_obs)
        np.testing.assert_array_equal(loaded.a, train.a)
