"""Sweep files, the sweep runner and the aggregate report.

A sweep file is an INI document::

    [sweep]
    q_t = 2
    q_y = 0.5
    k = 1
    psi = 0, pi/3, 2pi/3, pi
    methods = dcem, y_obs, tested_only
    seeds = 0
    n = 20000
    out = results/desk.csv

    [em]
    max_iters = 50
    temperature = 1

    [train]
    epochs = 1000
    hidden = 64, 64

Lists are comma separated. Numbers accept decimals, fractions (``1/4``) and
multiples of pi (``2pi/3`` or ``2*pi/3``). Every key outside ``[sweep]``
has a default.
"""
import configparser
import itertools
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from .em import EMConfig
from .exceptions import CalibrationError, ConfigError, DCEMError, InfeasibleConfig
from .jobs import RESULT_COLUMNS, Job, Setting, data_seed, run_job
from .metrics import AUC_BAND_EDGES, aggregate
from .nnet import TrainConfig
from .serializers import ResultRowSerializer, SweepConfigSerializer
from .synthgen import SimConfig, solve_sim_params

logger = logging.getLogger(__name__)

SECTIONS = ('sweep', 'em', 'train')
DEFAULT_MASTER_SEED = 42


@dataclass(frozen=True)
class SweepConfig:
    q_t: Tuple[float, ...]
    q_y: Tuple[float, ...]
    k: Tuple[float, ...]
    psi: Tuple[float, ...]
    methods: Tuple[str, ...]
    seeds: Tuple[int, ...] = (0,)
    overlap_scale: Tuple[float, ...] = (1.0,)
    n: int = 20000
    em: EMConfig = EMConfig()
    out: Optional[Path] = None
    master_seed: Optional[int] = None
    workers: Optional[int] = None
    record_timing: bool = True

    def override(self, out=None, workers=None, master_seed=None):
        """Command-line values win over the file."""
        changes = {}
        if out is not None:
            changes['out'] = Path(out)
        if workers is not None:
            changes['workers'] = int(workers)
        if master_seed is not None:
            changes['master_seed'] = int(master_seed)
        return replace(self, **changes)

    @property
    def settings(self):
        """Every requested setting, in canonical order."""
        return [
            Setting(q_t, q_y, k, psi, scale)
            for q_t, q_y, k, psi, scale in itertools.product(
                self.q_t, self.q_y, self.k, self.psi, self.overlap_scale,
            )
        ]


def _format_errors(errors, prefix=''):
    lines = []
    for field_name, messages in errors.items():
        path = f"{prefix}{field_name}"
        if isinstance(messages, dict):
            lines.extend(_format_errors(messages, f"{path}."))
        elif isinstance(messages, list) and messages and isinstance(messages[0], dict):
            for i, item in enumerate(messages):
                lines.extend(_format_errors(item, f"{path}[{i}]."))
        else:
            for message in messages if isinstance(messages, list) else [messages]:
                lines.append(f"{path}: {message}")
    return lines


def _read_ini(path):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read sweep file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(parser.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {', '.join(sorted(unknown))}")
    if not parser.has_section('sweep'):
        raise ConfigError(f"{path}: missing [sweep] section")
    return {section: dict(parser[section]) if parser.has_section(section) else {} for section in SECTIONS}


def parse_sweep(data, source='<sweep>'):
    """Validate a {section: {key: value}} mapping and build a ``SweepConfig``."""
    serializer = SweepConfigSerializer(data=data)
    for section in SECTIONS:
        known = set(serializer.fields[section].fields)
        unknown = set(data.get(section, {})) - known
        if unknown:
            raise ConfigError(f"{source}: unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    if not serializer.is_valid():
        raise ConfigError(f"{source}: " + '; '.join(_format_errors(serializer.errors)))

    sweep, em, train = (serializer.validated_data[s] for s in SECTIONS)
    outcome = TrainConfig(
        learning_rate=train['learning_rate'], weight_decay=train['weight_decay'], epochs=train['epochs'],
    )
    propensity = replace(outcome, epochs=train['propensity_epochs'], patience=train['propensity_patience'])
    em_cfg = EMConfig(
        max_iters=em['max_iters'], patience=em['patience'], warm_start=em['warm_start'],
        temperature=em['temperature'], init=em['init'], causal_reg=em['causal_reg'],
        hidden=tuple(train['hidden']), outcome=outcome, propensity=propensity,
    )
    return SweepConfig(
        q_t=tuple(sweep['q_t']), q_y=tuple(sweep['q_y']), k=tuple(sweep['k']), psi=tuple(sweep['psi']),
        methods=tuple(sweep['methods']), seeds=tuple(sweep['seeds']),
        overlap_scale=tuple(sweep['overlap_scale']), n=sweep['n'], em=em_cfg,
        out=Path(sweep['out']) if sweep.get('out') else None,
        master_seed=sweep.get('master_seed'), workers=sweep.get('workers'),
        record_timing=sweep['record_timing'],
    )


def load_sweep(path):
    return parse_sweep(_read_ini(path), source=str(path))


class SweepSummary(NamedTuple):
    requested: int
    produced: int
    skipped: int
    rows: int
    path: Optional[Path]
    failed: int = 0


class JobFailure(NamedTuple):
    setting: Setting
    method: str
    seed_index: int
    error: str


def _sim_configs(config, setting, master_seed):
    """Calibrated (seed index, SimConfig, SimParams) per seed, or raise on infeasibility."""
    prepared = []
    for seed_index in config.seeds:
        seed = data_seed(master_seed, setting.q_t, setting.q_y, setting.k, setting.overlap_scale, seed_index)
        sim = SimConfig(
            q_t=setting.q_t, q_y=setting.q_y, k=setting.k, psi=setting.psi,
            n=config.n, overlap_scale=setting.overlap_scale, seed=seed,
        )
        prepared.append((seed_index, sim, solve_sim_params(sim)))
    return prepared


def plan_jobs(config):
    """(jobs, skipped settings) for a resolved config."""
    master_seed = DEFAULT_MASTER_SEED if config.master_seed is None else config.master_seed
    jobs, skipped = [], []
    for setting in config.settings:
        try:
            prepared = _sim_configs(config, setting, master_seed)
        except (InfeasibleConfig, CalibrationError) as exc:
            logger.info("skipping setting %s: %s", tuple(setting), exc)
            skipped.append((setting, str(exc)))
            continue
        for method in config.methods:
            for seed_index, sim, params in prepared:
                jobs.append(Job(
                    setting=setting, method=method, seed_index=seed_index, sim=sim, params=params,
                    em=config.em, master_seed=master_seed, timed=config.record_timing,
                ))
    return jobs, skipped


def write_rows(rows, path):
    """Write rows in canonical order; the file appears complete or not at all."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.as_record() for r in sorted(rows, key=lambda r: r.sort_key)],
                         columns=list(RESULT_COLUMNS))
    tmp = path.with_name(f".{path.name}.tmp")
    frame.to_csv(tmp, index=False)
    os.replace(tmp, path)
    return path


def _attempt(job):
    """``run_job``, with library errors returned as a ``JobFailure`` instead of raised."""
    try:
        return run_job(job)
    except DCEMError as exc:
        return JobFailure(job.setting, job.method, job.seed_index, f"{type(exc).__name__}: {exc}")


def run_sweep(config, progress=None):
    """Run every (setting, method, seed) job of ``config`` and write the results CSV.

    A job that raises a ``DCEMError`` is logged and counted in ``failed``; the
    other jobs still produce rows. Rows finished before an unexpected error are
    written before the error propagates.
    """
    if config.out is None:
        raise ConfigError("no output path: set [sweep] out or pass --out")
    jobs, skipped = plan_jobs(config)
    workers = config.workers or 1
    logger.info("sweep: %d jobs over %d settings (%d skipped), %d worker(s)",
                len(jobs), len(config.settings) - len(skipped), len(skipped), workers)

    rows, failures = [], []

    def collect(result):
        if isinstance(result, JobFailure):
            logger.warning("job failed: %s %s seed %d: %s",
                           result.method, tuple(result.setting), result.seed_index, result.error)
            failures.append(result)
            return
        rows.append(result)
        if progress is not None:
            progress(result)

    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                for result in executor.map(_attempt, jobs):
                    collect(result)
        else:
            for job in jobs:
                collect(_attempt(job))
    finally:
        path = write_rows(rows, config.out)

    requested = len(config.settings)
    return SweepSummary(requested, requested - len(skipped), len(skipped), len(rows), path, len(failures))


def read_results(csv_path):
    """Validated result rows as a DataFrame; ``roc_gap`` is NaN where it was ``invalid``."""
    try:
        raw = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ConfigError(f"cannot read results {csv_path}: {exc}") from exc
    missing = set(RESULT_COLUMNS) - {'overlap_scale'} - set(raw.columns)
    if missing:
        raise ConfigError(f"{csv_path}: missing column(s) {', '.join(sorted(missing))}")

    records, problems = [], []
    for index, record in enumerate(raw.to_dict(orient='records')):
        serializer = ResultRowSerializer(data=record)
        if serializer.is_valid():
            records.append(dict(serializer.validated_data))
        else:
            # +2: header line and 1-based numbering
            problems.append(f"line {index + 2}: " + '; '.join(_format_errors(serializer.errors)))
    if problems:
        raise ConfigError(f"{csv_path}: " + ' | '.join(problems[:5]))
    if not records:
        raise ConfigError(f"{csv_path}: no result rows")
    frame = pd.DataFrame(records, columns=list(RESULT_COLUMNS))
    frame['roc_gap'] = frame['roc_gap'].astype(float)
    return frame


def _summarize(values, prefix):
    values = values.dropna()
    if values.empty:
        return {f"{prefix}_{stat}": np.nan for stat in ('median', 'min', 'max', 'range')}
    return {f"{prefix}_{stat}": value for stat, value in aggregate(values)._asdict().items()}


class Report(NamedTuple):
    aggregates: pd.DataFrame
    tradeoff: pd.DataFrame


def report(csv_path, by_setting=False):
    """Per-method median/min/max/range of AUC and ROC gap, plus ROC gaps by AUC band."""
    frame = read_results(csv_path)
    keys = ['q_t', 'q_y', 'k', 'overlap_scale', 'method'] if by_setting else ['method']

    lines = []
    for key, group in frame.groupby(keys, sort=True):
        key = key if isinstance(key, tuple) else (key,)
        line = dict(zip(keys, key))
        line['n_rows'] = len(group)
        line['n_invalid'] = int(group['roc_gap'].isna().sum())
        line.update(_summarize(group['auc'], 'auc'))
        line.update(_summarize(group['roc_gap'], 'roc_gap'))
        lines.append(line)
    aggregates = pd.DataFrame(lines)

    frame['auc_band'] = pd.cut(frame['auc'], bins=list(AUC_BAND_EDGES), right=True)
    valid = frame.dropna(subset=['roc_gap'])
    tradeoff = (
        valid.groupby(['method', 'auc_band'], observed=True)['roc_gap']
        .agg(['count', 'median', 'min', 'max'])
        .reset_index()
    )
    tradeoff['auc_band'] = tradeoff['auc_band'].astype(str)
    return Report(aggregates, tradeoff)


def write_report(result, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = (directory / 'aggregates.csv', directory / 'tradeoff.csv')
    result.aggregates.to_csv(paths[0], index=False, float_format='%.6f')
    result.tradeoff.to_csv(paths[1], index=False, float_format='%.6f')
    return paths
