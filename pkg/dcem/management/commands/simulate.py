from pathlib import Path

from django.conf import settings

from ...jobs import data_seed
from ...management.base import DCEMCommand, add_setting_arguments, single_setting
from ...synthgen import SimConfig, empirical_rates, generate, solve_sim_params


class Command(DCEMCommand):
    help = 'Calibrate one simulated setting and write its train/validation/test splits as CSV'

    def add_arguments(self, parser):
        add_setting_arguments(parser)
        parser.add_argument('--out', help='Output directory (default: DCEM_RESULTS_DIR/data)')

    def run(self, **options):
        config, setting = single_setting(options)
        master = self.master_seed(options, config)
        seed = data_seed(master, setting.q_t, setting.q_y, setting.k, setting.overlap_scale, config.seeds[0])
        sim = SimConfig(
            q_t=setting.q_t, q_y=setting.q_y, k=setting.k, psi=setting.psi,
            n=config.n, overlap_scale=setting.overlap_scale, seed=seed,
        )
        params = solve_sim_params(sim)
        self.stdout.write(
            f"mu=({params.mu_0:.6f}, {params.mu_1:.6f}) tau=({params.tau_0:.6f}, {params.tau_1:.6f}) "
            f"c_y={params.c_y:.6f}"
        )

        out = Path(options['out']) if options.get('out') else settings.DCEM['RESULTS_DIR'] / 'data'
        for split in generate(sim, params):
            path = split.to_csv(out / f"{split.split}.csv")
            rates = empirical_rates(split)
            self.stdout.write(
                f"{split.split}: {len(split)} rows -> {path} "
                f"(P(Y|A)={rates['p_y0']:.3f}/{rates['p_y1']:.3f}, P(T|A)={rates['p_t0']:.3f}/{rates['p_t1']:.3f})"
            )
        self.stdout.write(self.style.SUCCESS(f"Wrote 3 splits to {out}"))
