import os
import unittest

from dcem.em import EMConfig
from dcem.nnet import TrainConfig
from dcem.synthgen import SimConfig, generate, solve_sim_params

slow = unittest.skipUnless(os.environ.get('DCEM_RUN_SLOW') == '1', 'set DCEM_RUN_SLOW=1 to run')

QUICK_SAMPLES = 100_000

TINY_EM = EMConfig(
    max_iters=3,
    patience=1,
    hidden=(8,),
    outcome=TrainConfig(learning_rate=1e-2, epochs=25, seed=3),
    propensity=TrainConfig(learning_rate=1e-2, epochs=25, patience=5, seed=4),
)


def small_splits(n=600, seed=7, **overrides):
    cfg = SimConfig(n=n, seed=seed, **overrides)
    return generate(cfg, solve_sim_params(cfg, QUICK_SAMPLES))


TINY_SWEEP_INI = """\
[sweep]
q_t = 2
q_y = 0.5
k = 1
psi = 0
methods = oracle
seeds = 0
n = 300
record_timing = false

[em]
max_iters = 2
patience = 1

[train]
epochs = 5
propensity_epochs = 5
hidden = 4
learning_rate = 1/100
"""
