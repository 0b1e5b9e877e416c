"""Reference learners that share the ``nnet`` engine with DCEM."""
import enum
import logging
from collections import Counter
from dataclasses import replace
from typing import NamedTuple

import numpy as np

from .em import (
    INIT_TESTED_ONLY, CausalReg, EMConfig, fit_dcem, fit_propensity, require_both_classes,
)
from .exceptions import TrainingError
from .nnet import BinaryCrossEntropy, Holdout, Network, optimize

logger = logging.getLogger(__name__)

IPW_CLIP = 0.05

DCEM = 'dcem'

# (method tag, group) -> number of training rows handed to the optimizer
ROWS_READ = Counter()


class Method(str, enum.Enum):
    Y_OBS = 'y_obs'
    TESTED_ONLY = 'tested_only'
    TESTED_ONLY_GROUP = 'tested_only_group'
    GROUP_ONLY_0 = 'group_only_0'
    GROUP_ONLY_1 = 'group_only_1'
    ORACLE = 'oracle'
    IMPUTATION_ONLY = 'imputation_only'
    NO_CAUSAL_REG = 'no_causal_reg'
    HARD_T = 'hard_t'
    IPW_TESTED = 'ipw_tested'

    @property
    def uses_group(self):
        return self is Method.TESTED_ONLY_GROUP


METHOD_TAGS = (DCEM, *(m.value for m in Method))


class FitOutcome(NamedTuple):
    network: Network
    uses_group: bool = False
    n_em_iters: int = 0


def ipw_weight(t, t_hat, clip=IPW_CLIP):
    """1 / max(t_hat, clip) for tested examples."""
    if not 0 < clip < 0.5:
        raise ValueError(f"clip must lie in (0, 0.5), got {clip!r}")
    t = np.asarray(t)
    if np.any(t != 1):
        raise ValueError("inverse propensity weights are defined on tested examples only")
    weights = 1.0 / np.maximum(np.asarray(t_hat, dtype=float), clip)
    return float(weights) if weights.ndim == 0 else weights


def _record(tag, data):
    for g, count in zip(*np.unique(data.a, return_counts=True)):
        ROWS_READ[(tag, int(g))] += int(count)


def _supervised(tag, train, val, targets_of, cfg, with_group=False, weights=None):
    """Plain (weighted) BCE fit of ``targets_of(split)`` on the given rows."""
    if len(train) == 0:
        raise TrainingError(f"{tag}: no training examples")
    targets = targets_of(train)
    require_both_classes(targets, f"{tag} targets")
    _record(tag, train)
    net = Network.initialize(train.features(with_group).shape[1], cfg.hidden, seed=cfg.outcome.seed)
    holdout = None
    if val is not None and len(val):
        holdout = Holdout(val.features(with_group), BinaryCrossEntropy(targets_of(val)))
    result = optimize(net, train.features(with_group), BinaryCrossEntropy(targets, weights), cfg.outcome, holdout)
    return FitOutcome(result.network, with_group)


def _observed(data):
    return data.y_obs


def _truth(data):
    return data.y


def _em_variant(method, train, val, cfg, **overrides):
    _record(method.value, train)
    result = fit_dcem(train, val, replace(cfg, **overrides))
    return FitOutcome(result.network, False, result.state.iteration)


def _imputation_only(train, val, cfg):
    """Pre-train on tested, impute once, fit plain BCE on everything."""
    _record(Method.IMPUTATION_ONLY.value, train)
    result = fit_dcem(train, val, replace(cfg, causal_reg=CausalReg.NONE, max_iters=1, init=INIT_TESTED_ONLY))
    return FitOutcome(result.network, False, 1)


def _ipw_tested(train, val, cfg):
    tested = train.subset(train.tested)
    if len(tested) == len(train):
        weights = np.ones(len(tested))
    else:
        propensity = fit_propensity(train, val, cfg.propensity, cfg.temperature, cfg.hidden)
        weights = ipw_weight(tested.t, propensity(tested))
    val_tested = val.subset(val.tested) if val is not None else None
    return _supervised(Method.IPW_TESTED.value, tested, val_tested, _observed, cfg, weights=np.atleast_1d(weights))


def fit_method(tag, train, val, cfg=EMConfig()):
    """Fit DCEM or any baseline by tag."""
    if tag == DCEM:
        result = fit_dcem(train, val, cfg)
        return FitOutcome(result.network, False, result.state.iteration)

    method = Method(tag)
    logger.info("fitting %s on %d examples", method.value, len(train))
    if method is Method.Y_OBS:
        return _supervised(method.value, train, val, _observed, cfg)
    if method is Method.ORACLE:
        return _supervised(method.value, train, val, _truth, cfg)
    if method in (Method.TESTED_ONLY, Method.TESTED_ONLY_GROUP):
        return _supervised(
            method.value, train.subset(train.tested),
            val.subset(val.tested) if val is not None else None,
            _observed, cfg, with_group=method.uses_group,
        )
    if method in (Method.GROUP_ONLY_0, Method.GROUP_ONLY_1):
        group = int(method.value[-1])
        return _supervised(
            method.value, train.subset(train.a == group),
            val.subset(val.a == group) if val is not None else None,
            _observed, cfg,
        )
    if method is Method.IMPUTATION_ONLY:
        return _imputation_only(train, val, cfg)
    if method is Method.NO_CAUSAL_REG:
        return _em_variant(method, train, val, cfg, causal_reg=CausalReg.NONE)
    if method is Method.HARD_T:
        return _em_variant(method, train, val, cfg, causal_reg=CausalReg.HARD)
    return _ipw_tested(train, val, cfg)


def fit_baseline(method, train, val, cfg=EMConfig()):
    return fit_method(Method(method).value, train, val, cfg).network
