from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from ...management.base import DCEMCommand
from ...theory import GridSpec, contour_table, lemma_suite


class Command(DCEMCommand):
    help = 'Check the closed-form M-step optimum against a brute-force grid and its analytic properties'

    def add_arguments(self, parser):
        parser.add_argument('--resolution', type=float,
                            help='Grid-oracle step (default: DCEM_GRID_RESOLUTION)')
        parser.add_argument('--out', help='CSV of (q, t_hat, y_opt, r) for contour plots')

    def run(self, **options):
        resolution = options.get('resolution') or settings.DCEM['GRID_RESOLUTION']
        try:
            spec = GridSpec(resolution=resolution)
            report = lemma_suite(spec)
        except ValueError as exc:
            raise CommandError(str(exc)) from exc

        width = max(len(c.name) for c in report.checks)
        for check in report.checks:
            status = self.style.SUCCESS('PASS') if check.passed else self.style.ERROR('FAIL')
            self.stdout.write(f"{check.name:<{width}}  {status}  {check.detail}")

        if options.get('out'):
            path = Path(options['out'])
            path.parent.mkdir(parents=True, exist_ok=True)
            contour_table().to_csv(path, index=False, float_format='%.10g')
            self.stdout.write(f"contour data -> {path}")

        report.raise_for_failures()
        self.stdout.write(self.style.SUCCESS(f"All {len(report.checks)} checks passed"))
