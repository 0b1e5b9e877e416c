"""Disparate censorship expectation-maximization.

Outline of ``fit_dcem``:

1. fit and freeze a propensity model g(x, a) -> t_hat,
2. pre-train the outcome model f(x) on tested examples (or start from random weights),
3. repeat: E-step Q = y_obs if tested else f(x); M-step minimizes
   BCE(Q, y_hat) + Q * BCE(y_obs, y_hat * t_hat) over all examples,
   until the validation M-step loss stops improving.
"""
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from scipy.special import expit

from .exceptions import DegenerateLabels, EStepViolation, TrainingError
from .nnet import (
    DEFAULT_HIDDEN, BinaryCrossEntropy, Holdout, Network, TrainConfig,
    bce, clamp, mean_loss, optimize, soft_targets,
)

logger = logging.getLogger(__name__)

INIT_TESTED_ONLY = 'tested_only'
INIT_RANDOM = 'random'
INIT_CHOICES = (INIT_TESTED_ONLY, INIT_RANDOM)

PROPENSITY_PATIENCE = 100


class CausalReg(str, enum.Enum):
    """How the M-step treats the y_obs ~ y_hat * t_hat term."""
    SOFT = 'soft'   # estimated propensities
    HARD = 'hard'   # t_hat replaced by the observed t
    NONE = 'none'   # term dropped


@dataclass(frozen=True)
class EMConfig:
    max_iters: int = 50
    patience: int = 3
    warm_start: bool = True
    temperature: float = 1.0
    init: str = INIT_TESTED_ONLY
    causal_reg: CausalReg = CausalReg.SOFT
    hidden: tuple = DEFAULT_HIDDEN
    outcome: TrainConfig = TrainConfig()
    propensity: TrainConfig = TrainConfig(patience=PROPENSITY_PATIENCE)

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters!r}")
        if self.patience < 1:
            raise ValueError(f"patience must be at least 1, got {self.patience!r}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature!r}")
        if self.init not in INIT_CHOICES:
            raise ValueError(f"init must be one of {INIT_CHOICES}, got {self.init!r}")
        object.__setattr__(self, 'causal_reg', CausalReg(self.causal_reg))
        object.__setattr__(self, 'hidden', tuple(self.hidden))

    def with_seed(self, seed):
        """Same config with both inner trainers reseeded."""
        return replace(
            self,
            outcome=replace(self.outcome, seed=seed),
            propensity=replace(self.propensity, seed=seed + 1),
        )


@dataclass
class EMState:
    f_theta: Network
    g_zeta: Optional['Propensity']
    q_values: np.ndarray
    t_hat: np.ndarray
    iteration: int = 0
    val_loss_history: List[float] = field(default_factory=list)
    estep_violations: int = 0


class EMResult(NamedTuple):
    network: Network
    state: EMState
    best_iteration: int


@dataclass(frozen=True)
class Propensity:
    """Frozen g(x, a) with temperature-scaled output: t_hat = sigmoid(z / temperature)."""
    network: Network
    temperature: float = 1.0

    def logits(self, data):
        return self.network.logits(propensity_features(data))

    def __call__(self, data):
        return clamp(expit(self.logits(data) / self.temperature))


def propensity_features(data):
    return data.features(with_group=True)


def require_both_classes(values, what):
    values = np.asarray(values)
    if values.size == 0 or values.min() == values.max():
        raise DegenerateLabels(f"{what} contains a single class")


def fit_propensity(train, val=None, cfg=TrainConfig(patience=PROPENSITY_PATIENCE),
                   temperature=1.0, hidden=DEFAULT_HIDDEN):
    """Fit g on the train split, early-stopped on ``val`` when given."""
    require_both_classes(train.t, 'test indicator t')
    net = Network.initialize(train.dim + 1, hidden, seed=cfg.seed)
    holdout = None
    if val is not None:
        holdout = Holdout(propensity_features(val), BinaryCrossEntropy(val.t))
    result = optimize(net, propensity_features(train), BinaryCrossEntropy(train.t), cfg, holdout)
    logger.info("propensity model: %d epochs, best epoch %d", len(result.history), result.best_epoch)
    return Propensity(result.network, temperature)


def e_step(f_theta, example):
    """Posterior pseudo-label for one example."""
    if example.t == 1:
        return float(example.y_obs)
    return float(f_theta.predict_proba(example.x))


def impute(f_theta, data):
    """Vectorized E-step; tested examples take y_obs without a forward pass."""
    q = data.y_obs.astype(float)
    untested = ~data.tested
    if untested.any():
        q[untested] = f_theta.predict_proba(data.x[untested])
    return q


def m_step_loss(q, y_obs, y_hat, t_hat):
    """BCE(Q, y_hat) + Q * BCE(y_obs, y_hat * t_hat), elementwise."""
    q = np.asarray(q, dtype=float)
    product = clamp(np.asarray(y_hat, dtype=float) * np.asarray(t_hat, dtype=float))
    return bce(q, y_hat) + q * bce(y_obs, product)


class CausalRegularizedLoss:
    """M-step objective over logits of f; ``regularize=False`` keeps only BCE(Q, y_hat)."""

    def __init__(self, q, y_obs, t_hat, regularize=True):
        self.q = soft_targets(q)
        self.y_obs = np.asarray(y_obs, dtype=float)
        self.t_hat = np.asarray(t_hat, dtype=float)
        self.regularize = regularize

    def __len__(self):
        return self.q.shape[0]

    def evaluate(self, logits):
        p = expit(logits)
        losses = bce(self.q, p)
        grad = p - self.q
        if self.regularize:
            product = clamp(p * self.t_hat)
            losses = losses + self.q * bce(self.y_obs, product)
            # d/dz of -y_obs*log(p*t) - (1-y_obs)*log(1-p*t)
            grad = grad + self.q * (
                -self.y_obs * (1 - p)
                + (1 - self.y_obs) * self.t_hat * p * (1 - p) / (1 - product)
            )
        return losses, grad


def _m_step_objective(q, data, t_hat, cfg):
    return CausalRegularizedLoss(q, data.y_obs, t_hat, regularize=cfg.causal_reg is not CausalReg.NONE)


def pretrain_outcome(train, val, cfg):
    """f fitted on tested examples only (y_obs equals y there)."""
    tested = train.subset(train.tested)
    if len(tested) == 0:
        raise TrainingError("no tested examples to pre-train the outcome model")
    require_both_classes(tested.y_obs, 'tested labels')
    net = Network.initialize(train.dim, cfg.hidden, seed=cfg.outcome.seed)
    holdout = None
    if val is not None and val.tested.any():
        val_tested = val.subset(val.tested)
        holdout = Holdout(val_tested.x, BinaryCrossEntropy(val_tested.y_obs))
    return optimize(net, tested.x, BinaryCrossEntropy(tested.y_obs), cfg.outcome, holdout).network


def _testing_weights(data, cfg, propensity):
    if cfg.causal_reg is CausalReg.HARD:
        return data.t.astype(float)
    if cfg.causal_reg is CausalReg.NONE:
        return np.zeros(len(data))
    if propensity is None:
        # everyone in the training split was tested
        return np.ones(len(data))
    return propensity(data)


def fit_dcem(train, val, cfg=EMConfig(), on_iteration: Optional[Callable[[EMState], None]] = None):
    """Run DCEM and return the outcome model with the lowest validation M-step loss."""
    if not train.tested.any():
        raise TrainingError("DCEM needs tested examples in the training split")

    propensity = None
    if cfg.causal_reg is CausalReg.SOFT:
        if train.tested.all():
            logger.info("every training example is tested; using t_hat = 1 without a propensity model")
        else:
            propensity = fit_propensity(train, val, cfg.propensity, cfg.temperature, cfg.hidden)
    t_hat_train = _testing_weights(train, cfg, propensity)
    t_hat_val = _testing_weights(val, cfg, propensity)

    if cfg.init == INIT_TESTED_ONLY:
        f_theta = pretrain_outcome(train, val, cfg)
    else:
        f_theta = Network.initialize(train.dim, cfg.hidden, seed=cfg.outcome.seed)

    state = EMState(f_theta=f_theta, g_zeta=propensity, q_values=impute(f_theta, train), t_hat=t_hat_train)
    best_loss, best_net, best_iteration, stale = math.inf, f_theta, 0, 0
    tested = train.tested

    for iteration in range(1, cfg.max_iters + 1):
        q = impute(f_theta, train)
        violations = int(np.count_nonzero(q[tested] != train.y_obs[tested]))
        if violations:
            state.estep_violations += violations
            logger.error("E-step exactness violated on %d tested examples", violations)
            raise EStepViolation(f"iteration {iteration}: {violations} tested pseudo-labels differ from y_obs")
        q_val = impute(f_theta, val)
        state.q_values, state.iteration = q, iteration
        if on_iteration is not None:
            on_iteration(state)

        start = f_theta if cfg.warm_start else Network.initialize(train.dim, cfg.hidden, seed=cfg.outcome.seed)
        f_theta = optimize(start, train.x, _m_step_objective(q, train, t_hat_train, cfg), cfg.outcome).network
        state.f_theta = f_theta

        val_loss = mean_loss(f_theta, val.x, _m_step_objective(q_val, val, t_hat_val, cfg))
        state.val_loss_history.append(val_loss)
        logger.info("EM iteration %d: validation M-step loss %.6f", iteration, val_loss)
        if val_loss < best_loss:
            best_loss, best_net, best_iteration, stale = val_loss, f_theta, iteration, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info("EM stopped after %d iterations (best %d)", iteration, best_iteration)
                break

    return EMResult(best_net, state, best_iteration)


