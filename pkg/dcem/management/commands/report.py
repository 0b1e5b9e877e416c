import pandas as pd

from ...management.base import DCEMCommand
from ...sweep import report, write_report


class Command(DCEMCommand):
    help = 'Aggregate a sweep CSV: median/min/max/range of AUC and ROC gap per method'

    def add_arguments(self, parser):
        parser.add_argument('csv_path', help='Results CSV written by the sweep command')
        parser.add_argument('--out', help='Directory for aggregates.csv and tradeoff.csv')
        parser.add_argument('--by-setting', action='store_true',
                            help='One line per (q_t, q_y, k, overlap_scale, method) instead of per method')

    def run(self, **options):
        result = report(options['csv_path'], by_setting=options['by_setting'])
        with pd.option_context('display.width', 200, 'display.max_columns', None,
                               'display.float_format', '{:.4f}'.format):
            self.stdout.write(result.aggregates.to_string(index=False))
            self.stdout.write('')
            self.stdout.write('ROC gap by AUC band:')
            self.stdout.write(result.tradeoff.to_string(index=False))
        if options.get('out'):
            paths = write_report(result, options['out'])
            self.stdout.write(self.style.SUCCESS(f"Wrote {paths[0]} and {paths[1]}"))
