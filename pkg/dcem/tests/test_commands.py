import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from dcem.jobs import RESULT_COLUMNS

from .utils import TINY_SWEEP_INI


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)
        self.ini = self.tmp / 'tiny.ini'
        self.ini.write_text(TINY_SWEEP_INI)

    def call(self, *args, **options):
        out = StringIO()
        call_command(*args, stdout=out, **options)
        return out.getvalue()


class VerifyCommandTests(CommandTestCase):
    def test_all_checks_pass(self):
        output = self.call('verify', resolution=1e-4, out=str(self.tmp / 'contour.csv'))
        self.assertIn('closed_form_vs_grid', output)
        self.assertIn('checks passed', output)
        self.assertNotIn('FAIL', output)
        contour = pd.read_csv(self.tmp / 'contour.csv')
        self.assertEqual(list(contour.columns), ['q', 't_hat', 'y_opt', 'r'])

    def test_coarse_resolution_rejected(self):
        with self.assertRaises(CommandError):
            self.call('verify', resolution=0.1)


class SimulateCommandTests(CommandTestCase):
    def test_writes_three_splits(self):
        output = self.call('simulate', n=200, out=str(self.tmp / 'data'))
        for split in ('train', 'validation', 'test'):
            frame = pd.read_csv(self.tmp / 'data' / f"{split}.csv")
            self.assertEqual(len(frame), 200)
        self.assertIn('mu=(', output)

    def test_infeasible_setting(self):
        with self.assertRaises(CommandError):
            self.call('simulate', k=4.0, n=200, out=str(self.tmp / 'data'))


class FitCommandTests(CommandTestCase):
    def test_tested_only(self):
        output = self.call('fit', method='tested_only', config=str(self.ini), out=str(self.tmp / 'fit'))
        self.assertIn('tested_only on', output)
        self.assertIn('AUC', output)
        self.assertTrue((self.tmp / 'fit' / 'tested_only.network.txt').exists())
        self.assertFalse((self.tmp / 'fit' / 'tested_only.propensity_calibration.csv').exists())

    def test_dcem_writes_propensity_calibration(self):
        self.call('fit', method='dcem', config=str(self.ini), out=str(self.tmp / 'fit'), calibration_bins=5)
        bins = pd.read_csv(self.tmp / 'fit' / 'dcem.propensity_calibration.csv')
        self.assertEqual(list(bins.columns), ['mean_predicted', 'testing_rate', 'count'])
        self.assertLessEqual(len(bins), 5)
        self.assertEqual(bins['count'].sum(), 300)

    def test_infeasible_setting(self):
        with self.assertRaises(CommandError):
            self.call('fit', config=str(self.ini), k=4.0)


class SweepAndReportCommandTests(CommandTestCase):
    def test_sweep_then_report(self):
        results = self.tmp / 'results.csv'
        output = self.call('sweep', config=str(self.ini), out=str(results), workers=1)
        self.assertIn('1 rows from 1/1 settings', output)
        frame = pd.read_csv(results)
        self.assertEqual(list(frame.columns), list(RESULT_COLUMNS))

        output = self.call('report', str(results), out=str(self.tmp / 'report'))
        self.assertIn('oracle', output)
        self.assertIn('ROC gap by AUC band', output)
        aggregates = pd.read_csv(self.tmp / 'report' / 'aggregates.csv')
        self.assertEqual(aggregates['method'].tolist(), ['oracle'])
        self.assertTrue((self.tmp / 'report' / 'tradeoff.csv').exists())

    def test_bad_config(self):
        bad = self.tmp / 'bad.ini'
        bad.write_text(TINY_SWEEP_INI.replace('methods = oracle', 'methods = logistic'))
        with self.assertRaisesMessage(CommandError, 'sweep.methods'):
            self.call('sweep', config=str(bad), out=str(self.tmp / 'x.csv'))

    def test_report_missing_file(self):
        with self.assertRaises(CommandError):
            self.call('report', str(self.tmp / 'missing.csv'))
