"""One (setting, method, seed) unit of sweep work.

Kept free of Django imports so jobs can run in worker processes.
"""
import hashlib
import logging
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .baselines import FitOutcome, fit_method
from .em import EMConfig
from .metrics import evaluate
from .synthgen import SimConfig, SimParams, generate

logger = logging.getLogger(__name__)

INVALID = 'invalid'

RESULT_COLUMNS = (
    'q_t', 'q_y', 'k', 'psi', 'overlap_scale', 'method', 'seed',
    'auc', 'roc_gap', 'n_em_iters', 'wall_ms',
)


def derive_seed(*parts):
    """Stable 63-bit seed from a tuple of ints, floats and strings."""
    digest = hashlib.sha256(repr(tuple(parts)).encode()).digest()
    return int.from_bytes(digest[:8], 'big') >> 1


def data_seed(master, q_t, q_y, k, overlap_scale, seed_index):
    return derive_seed('data', int(master), float(q_t), float(q_y), float(k), float(overlap_scale), int(seed_index))


def model_seed(master, setting, method, seed_index):
    return derive_seed('model', int(master), *(float(v) for v in setting), str(method), int(seed_index))


class Setting(NamedTuple):
    q_t: float
    q_y: float
    k: float
    psi: float
    overlap_scale: float = 1.0


@dataclass(frozen=True)
class Job:
    setting: Setting
    method: str
    seed_index: int
    sim: SimConfig
    params: SimParams
    em: EMConfig
    master_seed: int = 42
    timed: bool = True


@dataclass(frozen=True)
class ResultRow:
    q_t: float
    q_y: float
    k: float
    psi: float
    overlap_scale: float
    method: str
    seed: int
    auc: float
    roc_gap: Optional[float]
    n_em_iters: int
    wall_ms: int

    @property
    def sort_key(self):
        return (self.q_t, self.q_y, self.k, self.psi, self.overlap_scale, self.method, self.seed)

    def as_record(self):
        """Row for the results CSV: metrics to 6 decimals, ROC gap ``invalid`` when undefined."""
        return {
            'q_t': repr(float(self.q_t)),
            'q_y': repr(float(self.q_y)),
            'k': repr(float(self.k)),
            'psi': repr(float(self.psi)),
            'overlap_scale': repr(float(self.overlap_scale)),
            'method': self.method,
            'seed': int(self.seed),
            'auc': f"{self.auc:.6f}",
            'roc_gap': INVALID if self.roc_gap is None else f"{self.roc_gap:.6f}",
            'n_em_iters': int(self.n_em_iters),
            'wall_ms': int(self.wall_ms),
        }


class JobOutput(NamedTuple):
    row: ResultRow
    outcome: FitOutcome
    splits: tuple


def execute(job):
    """Generate the setting's data, fit ``job.method`` and score it on the test split."""
    started = time.perf_counter()
    splits = train, val, test = generate(job.sim, job.params)
    seed = model_seed(job.master_seed, job.setting, job.method, job.seed_index)
    outcome = fit_method(job.method, train, val, job.em.with_seed(seed))
    scores = outcome.network.predict_proba(test.features(outcome.uses_group))
    report = evaluate(scores, test.y, test.a)
    if not report.valid:
        logger.warning("ROC gap undefined for %s %s seed %d: a test group has one class",
                       job.method, tuple(job.setting), job.seed_index)
    wall_ms = round((time.perf_counter() - started) * 1000) if job.timed else 0
    row = ResultRow(
        *job.setting, method=job.method, seed=job.seed_index,
        auc=report.auc, roc_gap=report.roc_gap,
        n_em_iters=outcome.n_em_iters, wall_ms=wall_ms,
    )
    return JobOutput(row, outcome, splits)


def run_job(job):
    return execute(job).row
