import argparse
from dataclasses import replace

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from ..exceptions import DCEMError
from ..jobs import Setting
from ..serializers import parse_number
from ..sweep import SweepConfig, load_sweep


def number(text):
    try:
        return parse_number(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


class DCEMCommand(BaseCommand):
    """Base for the dcem commands: library errors become ``CommandError``."""

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except DCEMError as exc:
            raise CommandError(str(exc)) from exc

    def run(self, **options):
        raise NotImplementedError

    def master_seed(self, options, config=None):
        if options.get('seed') is not None:
            return options['seed']
        if config is not None and config.master_seed is not None:
            return config.master_seed
        return settings.DCEM['MASTER_SEED']


def add_setting_arguments(parser):
    """One simulated setting; each flag overrides the first value of a ``--config`` list."""
    parser.add_argument('--config', help='Sweep file supplying defaults for the setting and training')
    parser.add_argument('--q-t', type=number, help='Testing disparity P(T|A=0)/P(T|A=1)')
    parser.add_argument('--q-y', type=number, help='Prevalence disparity P(Y|A=0)/P(Y|A=1)')
    parser.add_argument('--k', type=number, help='Testing multiple P(T=1)/P(Y=1)')
    parser.add_argument('--psi', type=number, help='Phase of the outcome boundary, e.g. 2pi/3')
    parser.add_argument('--overlap-scale', type=number, help='Multiplier on the testing-score coefficient')
    parser.add_argument('--n', type=int, help='Examples per split')
    parser.add_argument('--seed', type=int, help='Master seed (default: DCEM_MASTER_SEED)')
    parser.add_argument('--seed-index', type=int, default=0, help='Replicate index within the setting')


def single_setting(options):
    """(SweepConfig, Setting) from ``--config`` and the per-setting flags."""
    config = load_sweep(options['config']) if options.get('config') else SweepConfig(
        q_t=(2.0,), q_y=(0.5,), k=(1.0,), psi=(0.0,), methods=('dcem',),
    )

    def pick(flag, values):
        return options[flag] if options.get(flag) is not None else values[0]

    setting = Setting(
        q_t=pick('q_t', config.q_t), q_y=pick('q_y', config.q_y), k=pick('k', config.k),
        psi=pick('psi', config.psi), overlap_scale=pick('overlap_scale', config.overlap_scale),
    )
    config = replace(
        config,
        q_t=(setting.q_t,), q_y=(setting.q_y,), k=(setting.k,), psi=(setting.psi,),
        overlap_scale=(setting.overlap_scale,), seeds=(options.get('seed_index') or 0,),
        n=options['n'] if options.get('n') is not None else config.n,
    )
    return config, setting
