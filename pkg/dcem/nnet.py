"""Feedforward binary classifier with hand-written backprop and full-batch Adam.

Every model in the experiments is one of these: input -> (64, 64) ReLU -> logistic.
``hidden=()`` gives a single logistic unit.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Protocol, Tuple

import numpy as np
from scipy.special import expit

from .exceptions import DimensionMismatch, TrainingError

logger = logging.getLogger(__name__)

EPSILON = 1e-7
DEFAULT_HIDDEN = (64, 64)

_CHECKPOINT_MAGIC = 'dcem-network'


def clamp(p):
    return np.clip(p, EPSILON, 1 - EPSILON)


def soft_targets(values):
    """Validate soft labels in [0, 1] and return them as a float array."""
    values = np.asarray(values, dtype=float)
    if values.size and (values.min() < 0 or values.max() > 1 or not np.all(np.isfinite(values))):
        raise ValueError("soft targets must lie in [0, 1]")
    return values


def bce(target, pred, weight=1.0):
    """Weighted binary cross-entropy on clamped predictions."""
    pred = clamp(np.asarray(pred, dtype=float))
    target = np.asarray(target, dtype=float)
    return weight * -(target * np.log(pred) + (1 - target) * np.log(1 - pred))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 1000
    patience: Optional[int] = None
    seed: int = 42
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay!r}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs!r}")
        if self.patience is not None and self.patience < 1:
            raise ValueError(f"patience must be positive, got {self.patience!r}")


class Network:
    """Immutable weights of an input -> hidden... -> 1 network.

    ``weights[i]`` has shape (fan_in, fan_out); the last layer has fan_out 1.
    """

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        self.weights = tuple(self._frozen(w, 2) for w in weights)
        self.biases = tuple(self._frozen(b, 1) for b in biases)
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have a single unit")
        for w, w_next in zip(self.weights, self.weights[1:]):
            if w.shape[1] != w_next.shape[0]:
                raise ValueError(f"layer shapes do not chain: {w.shape} -> {w_next.shape}")

    @staticmethod
    def _frozen(array, ndim):
        array = np.array(array, dtype=float, ndmin=ndim)
        array.setflags(write=False)
        return array

    @classmethod
    def initialize(cls, input_dim, hidden=DEFAULT_HIDDEN, seed=0):
        """Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), from ``seed``."""
        rng = np.random.default_rng(seed)
        sizes = [input_dim, *hidden, 1]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = 1 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases)

    @property
    def input_dim(self):
        return self.weights[0].shape[0]

    @property
    def hidden(self):
        return tuple(w.shape[1] for w in self.weights[:-1])

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    @property
    def params(self):
        return [*self.weights, *self.biases]

    def replace_params(self, params):
        n = len(self.weights)
        return Network(params[:n], params[n:])

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} input features, got {x.shape[1]}")
        return x, squeeze

    def forward_cache(self, x):
        """Pre-activations and activations needed by ``backward``."""
        activations, pre = [x], []
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = activations[-1] @ w + b
            pre.append(h)
            activations.append(np.maximum(h, 0.0))
        logits = (activations[-1] @ self.weights[-1] + self.biases[-1])[:, 0]
        return logits, (activations, pre)

    def backward(self, cache, dlogits):
        """Gradients of sum_i dlogits[i] * logit_i with respect to every parameter."""
        activations, pre = cache
        delta = np.asarray(dlogits, dtype=float)[:, None]
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = activations[layer].T @ delta
            grad_b[layer] = delta.sum(axis=0)
            if layer:
                delta = (delta @ self.weights[layer].T) * (pre[layer - 1] > 0)
        return [*grad_w, *grad_b]

    def logits(self, x):
        x, squeeze = self._check(x)
        z = self.forward_cache(x)[0]
        return z[0] if squeeze else z

    def predict_proba(self, x):
        return clamp(expit(self.logits(x)))

    def save(self, path):
        """Flat checkpoint: one architecture header line, then one float per line."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        flat = np.concatenate([p.ravel() for p in self.params])
        header = f"{_CHECKPOINT_MAGIC} input_dim={self.input_dim} hidden={','.join(map(str, self.hidden))}"
        np.savetxt(path, flat, fmt='%.17g', header=header)
        return path

    @classmethod
    def load(cls, path):
        with open(path) as handle:
            header = handle.readline().lstrip('#').split()
        if not header or header[0] != _CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a network checkpoint")
        fields = dict(item.split('=', 1) for item in header[1:])
        hidden = tuple(int(h) for h in fields['hidden'].split(',') if h)
        template = cls.initialize(int(fields['input_dim']), hidden)
        flat = np.atleast_1d(np.loadtxt(path))
        if flat.size != template.n_params:
            raise ValueError(f"{path}: expected {template.n_params} values, found {flat.size}")
        params, offset = [], 0
        for p in template.params:
            params.append(flat[offset:offset + p.size].reshape(p.shape))
            offset += p.size
        return template.replace_params(params)


def forward(net, x):
    """P(label = 1 | x) for one input vector or a batch, clamped to (eps, 1 - eps)."""
    return net.predict_proba(x)


class Objective(Protocol):
    def evaluate(self, logits) -> Tuple[np.ndarray, np.ndarray]:
        """Per-example losses and their derivatives with respect to the logits."""


class BinaryCrossEntropy:
    """Weighted BCE against (soft) targets."""

    def __init__(self, targets, weights=None):
        self.targets = soft_targets(targets)
        self.weights = np.ones_like(self.targets) if weights is None else np.asarray(weights, dtype=float)
        if self.weights.shape != self.targets.shape:
            raise ValueError("targets and weights differ in length")

    def __len__(self):
        return self.targets.shape[0]

    def evaluate(self, logits):
        p = expit(logits)
        losses = bce(self.targets, p, self.weights)
        return losses, self.weights * (p - self.targets)


class Holdout(NamedTuple):
    inputs: np.ndarray
    objective: Objective


class TrainResult(NamedTuple):
    network: Network
    history: list
    val_history: list
    best_epoch: int


def mean_loss(net, inputs, objective):
    return float(np.mean(objective.evaluate(net.logits(inputs))[0]))


def optimize(net, inputs, objective, cfg=TrainConfig(), holdout=None):
    """Minimize the mean of ``objective`` over ``inputs`` with full-batch Adam.

    With a holdout and ``cfg.patience``, training stops once the holdout loss has
    not improved for ``patience`` consecutive epochs and the best-holdout
    parameters are returned.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    n = inputs.shape[0]
    if n == 0:
        raise TrainingError("empty training set")
    if inputs.shape[1] != net.input_dim:
        raise DimensionMismatch(f"expected {net.input_dim} input features, got {inputs.shape[1]}")
    if len(objective) != n:
        raise ValueError(f"{n} inputs but {len(objective)} targets")
    monitor = holdout is not None and cfg.patience is not None

    params = [p.copy() for p in net.params]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    history, val_history = [], []
    best_loss, best_params, best_epoch, stale = math.inf, None, 0, 0

    for epoch in range(1, cfg.epochs + 1):
        current = net.replace_params(params)
        logits, cache = current.forward_cache(inputs)
        losses, dlogits = objective.evaluate(logits)
        loss = float(np.mean(losses))
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite training loss at epoch {epoch} (lr={cfg.learning_rate})")
        history.append(loss)

        grads = current.backward(cache, dlogits / n)
        for i, (p, g) in enumerate(zip(params, grads)):
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g
            m_hat = m[i] / (1 - cfg.beta1 ** epoch)
            v_hat = v[i] / (1 - cfg.beta2 ** epoch)
            params[i] = p - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)

        if monitor:
            val_loss = mean_loss(net.replace_params(params), holdout.inputs, holdout.objective)
            val_history.append(val_loss)
            if val_loss < best_loss:
                best_loss, best_params, best_epoch, stale = val_loss, [p.copy() for p in params], epoch, 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    logger.debug("early stop at epoch %d (best %d, loss %.6f)", epoch, best_epoch, best_loss)
                    break

    if best_params is None:
        best_params, best_epoch = params, len(history)
    return TrainResult(net.replace_params(best_params), history, val_history, best_epoch)


def train(net, inputs, targets, weights=None, cfg=TrainConfig(), val=None):
    """BCE training on (soft) targets. ``val`` is ``(inputs, targets)`` or ``(inputs, targets, weights)``."""
    holdout = None
    if val is not None:
        holdout = Holdout(val[0], BinaryCrossEntropy(*val[1:]))
    return optimize(net, inputs, BinaryCrossEntropy(targets, weights), cfg, holdout)
