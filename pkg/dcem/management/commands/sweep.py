from django.conf import settings

from ...management.base import DCEMCommand
from ...sweep import load_sweep, run_sweep


class Command(DCEMCommand):
    help = 'Run a (setting x method x seed) sweep from an INI file and write one CSV row per run'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Sweep file (see configs/)')
        parser.add_argument('--out', help='Results CSV (overrides [sweep] out)')
        parser.add_argument('--workers', type=int, help='Worker processes (default: DCEM_WORKERS)')
        parser.add_argument('--seed', type=int, help='Master seed (default: DCEM_MASTER_SEED)')

    def run(self, **options):
        config = load_sweep(options['config'])
        config = config.override(
            out=options.get('out'), workers=options.get('workers'),
            master_seed=self.master_seed(options, config),
        )
        if config.workers is None:
            config = config.override(workers=settings.DCEM['WORKERS'])
        if config.out is None:
            config = config.override(out=settings.DCEM['RESULTS_DIR'] / 'sweep.csv')

        def progress(row):
            gap = 'invalid' if row.roc_gap is None else f"{row.roc_gap:.4f}"
            self.stdout.write(
                f"  q_t={row.q_t:g} q_y={row.q_y:g} k={row.k:g} psi={row.psi:.4f} "
                f"{row.method:<18} seed {row.seed}: AUC {row.auc:.4f} gap {gap}"
            )

        summary = run_sweep(config, progress=progress)
        if summary.failed:
            self.stdout.write(self.style.WARNING(f"{summary.failed} job(s) failed; see the log for details"))
        if summary.skipped:
            self.stdout.write(self.style.WARNING(f"{summary.skipped} infeasible setting(s) skipped"))
        self.stdout.write(self.style.SUCCESS(
            f"{summary.rows} rows from {summary.produced}/{summary.requested} settings -> {summary.path}"
        ))
