from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from dcem.baselines import (
    DCEM, IPW_CLIP, METHOD_TAGS, ROWS_READ, FitOutcome, Method, fit_baseline, fit_method, ipw_weight,
)
from dcem.em import CausalReg, EMConfig, fit_dcem
from dcem.exceptions import DegenerateLabels
from dcem.metrics import auc
from dcem.nnet import Network
from dcem.synthgen import Dataset, outcome_score

from .utils import TINY_EM, slow, small_splits


class IPWWeightTests(SimpleTestCase):
    def test_clipped_inverse(self):
        self.assertAlmostEqual(ipw_weight(1, 0.5), 2.0)
        self.assertAlmostEqual(ipw_weight(1, 0.01), 1 / IPW_CLIP)
        np.testing.assert_allclose(ipw_weight([1, 1], [0.25, 0.001]), [4.0, 20.0])

    def test_untested_examples_have_no_weight(self):
        with self.assertRaises(ValueError):
            ipw_weight([1, 0], [0.5, 0.5])

    def test_clip_range(self):
        for clip in (0, 0.5, 0.7):
            with self.subTest(clip=clip), self.assertRaises(ValueError):
                ipw_weight(1, 0.3, clip=clip)


class MethodTests(SimpleTestCase):
    def test_tags(self):
        self.assertEqual(len(METHOD_TAGS), 11)
        self.assertEqual(METHOD_TAGS[0], DCEM)
        self.assertTrue(Method.TESTED_ONLY_GROUP.uses_group)
        self.assertFalse(Method.TESTED_ONLY.uses_group)

    def test_unknown_tag(self):
        train, val, _ = small_splits(n=200)
        with self.assertRaises(ValueError):
            fit_method('logistic', train, val, TINY_EM)


class FitMethodTests(SimpleTestCase):
    def setUp(self):
        self.train, self.val, self.test = small_splits(n=600)
        ROWS_READ.clear()

    def test_every_method_returns_a_network(self):
        for tag in METHOD_TAGS:
            with self.subTest(method=tag):
                outcome = fit_method(tag, self.train, self.val, TINY_EM)
                self.assertIsInstance(outcome, FitOutcome)
                self.assertEqual(outcome.network.input_dim, 3 if outcome.uses_group else 2)
                scores = outcome.network.predict_proba(self.test.features(outcome.uses_group))
                self.assertEqual(scores.shape, (len(self.test),))

    def test_em_methods_report_iterations(self):
        for tag in (DCEM, Method.NO_CAUSAL_REG.value, Method.HARD_T.value):
            with self.subTest(method=tag):
                self.assertGreaterEqual(fit_method(tag, self.train, self.val, TINY_EM).n_em_iters, 1)
        self.assertEqual(fit_method(Method.IMPUTATION_ONLY.value, self.train, self.val, TINY_EM).n_em_iters, 1)
        self.assertEqual(fit_method(Method.ORACLE.value, self.train, self.val, TINY_EM).n_em_iters, 0)

    def test_tested_only_reads_tested_rows(self):
        fit_method(Method.TESTED_ONLY.value, self.train, self.val, TINY_EM)
        read = ROWS_READ[('tested_only', 0)] + ROWS_READ[('tested_only', 1)]
        self.assertEqual(read, int(self.train.tested.sum()))

    def test_group_only_reads_one_group(self):
        fit_method(Method.GROUP_ONLY_1.value, self.train, self.val, TINY_EM)
        self.assertEqual(ROWS_READ[('group_only_1', 0)], 0)
        self.assertEqual(ROWS_READ[('group_only_1', 1)], int((self.train.a == 1).sum()))

    def test_fit_baseline_returns_network(self):
        net = fit_baseline(Method.Y_OBS, self.train, self.val, TINY_EM)
        self.assertIsInstance(net, Network)

    def test_oracle_needs_both_outcome_classes(self):
        negatives = self.train.subset(self.train.y == 0)
        with self.assertRaises(DegenerateLabels):
            fit_method(Method.ORACLE.value, negatives, None, TINY_EM)

    def test_deterministic_given_seed(self):
        first = fit_method(Method.Y_OBS.value, self.train, self.val, TINY_EM).network
        second = fit_method(Method.Y_OBS.value, self.train, self.val, TINY_EM).network
        np.testing.assert_array_equal(first.predict_proba(self.test.x), second.predict_proba(self.test.x))


def _all_tested(data):
    return Dataset(x=data.x, a=data.a, t=np.ones(len(data)), y=data.y, y_obs=data.y, split=data.split)


class AllTestedTests(SimpleTestCase):
    def setUp(self):
        train, val, self.test = small_splits(n=400)
        self.train, self.val = _all_tested(train), _all_tested(val)

    def test_tested_only_matches_oracle(self):
        tested_only = fit_method(Method.TESTED_ONLY.value, self.train, self.val, TINY_EM).network
        oracle = fit_method(Method.ORACLE.value, self.train, self.val, TINY_EM).network
        for p, q in zip(tested_only.params, oracle.params):
            np.testing.assert_array_equal(p, q)

    def test_ipw_needs_no_propensity_model(self):
        ipw = fit_method(Method.IPW_TESTED.value, self.train, self.val, TINY_EM).network
        tested_only = fit_method(Method.TESTED_ONLY.value, self.train, self.val, TINY_EM).network
        np.testing.assert_allclose(ipw.predict_proba(self.test.x), tested_only.predict_proba(self.test.x))


class EMAblationTests(SimpleTestCase):
    def test_no_causal_reg_shares_the_first_e_step(self):
        train, val, _ = small_splits(n=600)
        first = {}

        def capture(name):
            def on_iteration(state):
                first.setdefault(name, state.q_values.copy())
            return on_iteration

        fit_dcem(train, val, TINY_EM, on_iteration=capture('dcem'))
        fit_dcem(train, val, replace(TINY_EM, causal_reg=CausalReg.NONE), on_iteration=capture('no_causal_reg'))
        np.testing.assert_array_equal(first['dcem'], first['no_causal_reg'])


def _noiseless(n, seed, split):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(n, 2))
    y = (outcome_score(x, 0.0) > 0).astype(int)
    return Dataset(x=x, a=rng.integers(0, 2, n), t=np.ones(n), y=y, y_obs=y, split=split)


@slow
class OracleTests(SimpleTestCase):
    def test_learns_a_noiseless_boundary(self):
        train, val, test = (_noiseless(20000, i, split) for i, split in enumerate(('train', 'validation', 'test')))
        network = fit_method(Method.ORACLE.value, train, val, EMConfig()).network
        self.assertGreater(auc(network.predict_proba(test.x), test.y), 0.95)
