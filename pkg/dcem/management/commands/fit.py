from dataclasses import replace
from pathlib import Path

import pandas as pd
from django.core.management.base import CommandError

from ...baselines import DCEM, METHOD_TAGS, Method
from ...em import fit_propensity
from ...jobs import execute, model_seed
from ...management.base import DCEMCommand, add_setting_arguments, single_setting
from ...metrics import calibration_bins
from ...sweep import plan_jobs


class Command(DCEMCommand):
    help = 'Fit one method on one simulated setting and report test AUC and ROC gap'

    def add_arguments(self, parser):
        add_setting_arguments(parser)
        parser.add_argument('--method', default=DCEM, choices=METHOD_TAGS)
        parser.add_argument('--out', help='Directory for the network checkpoint and calibration bins')
        parser.add_argument('--calibration-bins', type=int, default=10,
                            help='Bins for the propensity calibration table (DCEM and ipw_tested)')

    def run(self, **options):
        config, setting = single_setting(options)
        config = config.override(master_seed=self.master_seed(options, config))
        config = replace(config, methods=(options['method'],))
        jobs, skipped = plan_jobs(config)
        if skipped:
            raise CommandError(f"Infeasible setting {tuple(setting)}: {skipped[0][1]}")

        job = jobs[0]
        output = execute(job)
        row = output.row
        gap = 'invalid' if row.roc_gap is None else f"{row.roc_gap:.6f}"
        self.stdout.write(
            f"{row.method} on {tuple(setting)}: AUC {row.auc:.6f}, ROC gap {gap}, "
            f"EM iterations {row.n_em_iters}, {row.wall_ms} ms"
        )

        if not options.get('out'):
            return
        out = Path(options['out'])
        path = output.outcome.network.save(out / f"{row.method}.network.txt")
        self.stdout.write(f"checkpoint -> {path}")

        if row.method in (DCEM, Method.IPW_TESTED.value):
            train, val, test = output.splits
            em = job.em.with_seed(model_seed(job.master_seed, job.setting, job.method, job.seed_index))
            propensity = fit_propensity(train, val, em.propensity, em.temperature, em.hidden)
            bins = calibration_bins(propensity(test), test.t, n_bins=options['calibration_bins'])
            frame = pd.DataFrame(bins, columns=['mean_predicted', 'testing_rate', 'count'])
            path = out / f"{row.method}.propensity_calibration.csv"
            frame.to_csv(path, index=False, float_format='%.6f')
            self.stdout.write(f"propensity calibration -> {path}")
        self.stdout.write(self.style.SUCCESS('Done'))
