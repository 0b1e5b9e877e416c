"""Synthetic disparate-censorship data.

Sampling process (one example):

    a ~ Ber(0.5)
    x ~ N(mu_a * 1_2, 0.03^2 I)
    t ~ Ber(sigmoid(30 * overlap_scale * s_T(x, a)))
    y ~ Ber(sigmoid(10 * s_Y(x) - c_y))
    y_obs = y * t

The unobserved confounder is the group itself (u = a). ``solve_sim_params``
finds mu_a, tau_a and c_y that give the requested prevalence and testing
disparities.
"""
import functools
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import optimize
from scipy.special import expit

from .exceptions import CalibrationError, InfeasibleConfig

logger = logging.getLogger(__name__)

SPLITS = ('train', 'validation', 'test')

TESTING_COEF = 30.0
OUTCOME_COEF = 10.0
COVARIATE_SD = 0.03
TARGET_PREVALENCE = 0.25

BISECTION_TOL = 1e-4
BISECTION_MAX_ITER = 200
MC_SAMPLES = 1_000_000

MU_BRACKET = (-2.0, 2.0)
C_Y_BRACKET = (-20.0, 20.0)

# spawn keys after the three split streams
_CALIBRATION_STREAM = len(SPLITS)

_ROTATION = np.array([
    [math.cos(math.pi / 6), -math.sin(math.pi / 6)],
    [math.sin(math.pi / 6), math.cos(math.pi / 6)],
])


@dataclass(frozen=True)
class SimConfig:
    """Disparity targets for one simulated setting."""
    q_t: float = 2.0
    q_y: float = 0.5
    k: float = 1.0
    psi: float = 0.0
    n: int = 20000
    overlap_scale: float = 1.0
    seed: int = 42

    def __post_init__(self):
        for name in ('q_t', 'q_y', 'k', 'overlap_scale'):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InfeasibleConfig(f"{name} must be a positive real, got {value!r}")
        if self.q_y > 1:
            raise InfeasibleConfig(f"q_y must lie in (0, 1], got {self.q_y!r}")
        if int(self.n) != self.n or self.n < 1:
            raise InfeasibleConfig(f"n must be a positive integer, got {self.n!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InfeasibleConfig(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        rates = self.testing_targets
        if not all(0 < r < 1 for r in rates):
            raise InfeasibleConfig(
                "infeasible testing rates: P(T=1|A=0)=%.4f, P(T=1|A=1)=%.4f" % rates
            )

    @property
    def prevalence_targets(self):
        """(P(Y=1|A=0), P(Y=1|A=1)) implied by q_y and P(Y=1) = 1/4."""
        return (self.q_y / (2 * (self.q_y + 1)), 1 / (2 * (self.q_y + 1)))

    @property
    def testing_targets(self):
        """(P(T=1|A=0), P(T=1|A=1)) implied by q_t and P(T=1) = k/4."""
        return (self.q_t * self.k / (2 * (self.q_t + 1)), self.k / (2 * (self.q_t + 1)))

    @property
    def testing_coef(self):
        return TESTING_COEF * self.overlap_scale


@dataclass(frozen=True)
class SimParams:
    mu_0: float
    mu_1: float
    tau_0: float
    tau_1: float
    c_y: float

    def mu(self, a):
        return np.where(np.asarray(a) == 1, self.mu_1, self.mu_0)

    def tau(self, a):
        return np.where(np.asarray(a) == 1, self.tau_1, self.tau_0)


@dataclass(frozen=True)
class LabeledExample:
    x: np.ndarray
    a: int
    t: int
    y: int
    y_obs: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented split: features ``x`` of shape (n, d) and per-example labels."""
    x: np.ndarray
    a: np.ndarray
    t: np.ndarray
    y: np.ndarray
    y_obs: np.ndarray
    split: str = 'train'

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        object.__setattr__(self, 'x', x)
        n = x.shape[0]
        for name in ('a', 't', 'y', 'y_obs'):
            column = np.asarray(getattr(self, name)).astype(np.int8).ravel()
            if column.shape[0] != n:
                raise ValueError(f"column {name} has {column.shape[0]} rows, expected {n}")
            object.__setattr__(self, name, column)
        if np.any(self.y_obs != self.y * self.t):
            raise ValueError("y_obs must equal y * t for every example")

    def __len__(self):
        return self.x.shape[0]

    def __getitem__(self, i):
        return LabeledExample(
            x=self.x[i], a=int(self.a[i]), t=int(self.t[i]),
            y=int(self.y[i]), y_obs=int(self.y_obs[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def examples(self):
        return list(self)

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def tested(self):
        return self.t == 1

    def subset(self, mask):
        mask = np.asarray(mask)
        return Dataset(
            x=self.x[mask], a=self.a[mask], t=self.t[mask], y=self.y[mask],
            y_obs=self.y_obs[mask], split=self.split,
        )

    def features(self, with_group=False):
        """Model inputs; the group is appended as one binary column when requested."""
        if with_group:
            return np.column_stack([self.x, self.a.astype(float)])
        return self.x

    @classmethod
    def from_examples(cls, examples, split='train'):
        examples = list(examples)
        dims = {np.asarray(e.x).shape for e in examples}
        if len(dims) > 1:
            raise ValueError(f"feature vectors disagree in dimension: {sorted(dims)}")
        return cls(
            x=np.array([e.x for e in examples], dtype=float),
            a=[e.a for e in examples], t=[e.t for e in examples],
            y=[e.y for e in examples], y_obs=[e.y_obs for e in examples],
            split=split,
        )

    def to_frame(self):
        frame = pd.DataFrame(self.x, columns=[f"x{j}" for j in range(self.dim)])
        for name in ('a', 't', 'y', 'y_obs'):
            frame[name] = getattr(self, name).astype(int)
        return frame

    def to_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format='%.17g')
        return path

    @classmethod
    def from_csv(cls, path, split='train'):
        frame = pd.read_csv(path, float_precision='round_trip')
        x_cols = [c for c in frame.columns if c.startswith('x')]
        missing = {'a', 't', 'y', 'y_obs'} - set(frame.columns)
        if not x_cols or missing:
            raise ValueError(f"{path}: expected columns x0..,a,t,y,y_obs (missing {sorted(missing)})")
        return cls(
            x=frame[x_cols].to_numpy(dtype=float), a=frame['a'].to_numpy(),
            t=frame['t'].to_numpy(), y=frame['y'].to_numpy(),
            y_obs=frame['y_obs'].to_numpy(), split=split,
        )


def outcome_score(x, psi):
    """s_Y: rotate by pi/6, shift by 0.5, then measure distance to a sine boundary."""
    z = np.asarray(x, dtype=float) @ _ROTATION.T + 0.5
    return z[..., 1] - 0.25 * np.sin(8 * np.pi * z[..., 0] + psi)


def testing_score(x, a, params):
    """s_T: linear testing boundary with a group-specific threshold."""
    return np.asarray(x, dtype=float).sum(axis=-1) - params.tau(a)


def boundary_scores(x, a, params, psi):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError(f"synthetic covariates are 2-dimensional, got {x.shape[-1]}")
    return outcome_score(x, psi), testing_score(x, a, params)


def _bisect(rate, target, bracket, label, tol=BISECTION_TOL, max_iter=BISECTION_MAX_ITER):
    """Solve rate(v) = target on bracket; rate must change sign relative to target."""
    lo, hi = bracket

    def residual(v):
        return rate(v) - target

    f_lo, f_hi = residual(lo), residual(hi)
    if f_lo * f_hi > 0:
        raise CalibrationError(
            f"{label}: target {target:.4f} outside bracket [{lo}, {hi}] "
            f"(rates {f_lo + target:.4f}, {f_hi + target:.4f})",
            bracket=(lo, hi),
        )
    try:
        root, info = optimize.bisect(
            residual, lo, hi, xtol=1e-12, maxiter=max_iter, full_output=True, disp=False,
        )
    except RuntimeError as exc:
        raise CalibrationError(f"{label}: {exc}", bracket=(lo, hi)) from exc
    if not info.converged or abs(residual(root)) > tol:
        raise CalibrationError(
            f"{label}: bisection stopped after {info.iterations} iterations "
            f"with residual {residual(root):.2e}",
            bracket=(lo, hi),
        )
    logger.debug("%s = %.6f (%d iterations, bracket [%g, %g])", label, root, info.iterations, lo, hi)
    return root


@functools.lru_cache(maxsize=64)
def solve_sim_params(cfg, samples=MC_SAMPLES):
    """Calibrate (mu_a, tau_a, c_y) for ``cfg`` by bisection on a fixed Monte Carlo sample.

    Order: mu_a with c_y held at 0, then c_y for P(Y=1) = 0.25, then tau_a.
    The same covariate noise is reused at every bisection step so each rate
    is a smooth deterministic function of the parameter being solved.
    """
    seq = np.random.SeedSequence(int(cfg.seed), spawn_key=(_CALIBRATION_STREAM,))
    noise = COVARIATE_SD * np.random.default_rng(seq).standard_normal((samples, 2))

    def prevalence(mu, c_y):
        s_y = outcome_score(mu + noise, cfg.psi)
        return float(np.mean(expit(OUTCOME_COEF * s_y - c_y)))

    mu = [
        _bisect(lambda m: prevalence(m, 0.0), target, MU_BRACKET, f"mu_{a}")
        for a, target in enumerate(cfg.prevalence_targets)
    ]
    c_y = _bisect(
        lambda c: 0.5 * (prevalence(mu[0], c) + prevalence(mu[1], c)),
        TARGET_PREVALENCE, C_Y_BRACKET, 'c_y',
    )

    half_width = 0.5 + 40.0 / cfg.testing_coef
    sums = noise.sum(axis=-1)

    def testing_rate(tau, a):
        return float(np.mean(expit(cfg.testing_coef * (2 * mu[a] + sums - tau))))

    tau = [
        _bisect(
            lambda v, a=a: testing_rate(v, a), target,
            (2 * mu[a] - half_width, 2 * mu[a] + half_width), f"tau_{a}",
        )
        for a, target in enumerate(cfg.testing_targets)
    ]
    params = SimParams(mu_0=mu[0], mu_1=mu[1], tau_0=tau[0], tau_1=tau[1], c_y=c_y)
    logger.info("calibrated %s -> %s", cfg, params)
    return params


def _sample(cfg, params, n, rng, split):
    a = rng.binomial(1, 0.5, size=n)
    x = params.mu(a)[:, None] + COVARIATE_SD * rng.standard_normal((n, 2))
    s_y, s_t = boundary_scores(x, a, params, cfg.psi)
    t = rng.binomial(1, expit(cfg.testing_coef * s_t))
    y = rng.binomial(1, expit(OUTCOME_COEF * s_y - params.c_y))
    return Dataset(x=x, a=a, t=t, y=y, y_obs=y * t, split=split)


def split_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(index,)))


def generate(cfg, params):
    """Three independent splits of ``cfg.n`` examples, reproducible from ``cfg.seed``."""
    return tuple(
        _sample(cfg, params, cfg.n, split_rng(cfg.seed, i), split)
        for i, split in enumerate(SPLITS)
    )


def empirical_rates(data):
    """Group-wise prevalence and testing rates of a dataset (or of ``_sample`` output)."""
    rates = {}
    for g in (0, 1):
        in_group = data.a == g
        rates[f"p_y{g}"] = float(data.y[in_group].mean())
        rates[f"p_t{g}"] = float(data.t[in_group].mean())
    rates['p_y'] = float(data.y.mean())
    rates['p_t'] = float(data.t.mean())
    return rates


def simulated_rates(cfg, params, samples=MC_SAMPLES, seed=None):
    """Monte Carlo check of a calibration: ``samples`` draws per group, independent of the bisection sample."""
    rng = np.random.default_rng(np.random.SeedSequence(
        int(cfg.seed if seed is None else seed), spawn_key=(_CALIBRATION_STREAM + 1,),
    ))
    rates = {}
    for g in (0, 1):
        a = np.full(samples, g)
        x = params.mu(a)[:, None] + COVARIATE_SD * rng.standard_normal((samples, 2))
        s_y, s_t = boundary_scores(x, a, params, cfg.psi)
        rates[f"p_y{g}"] = float(rng.binomial(1, expit(OUTCOME_COEF * s_y - params.c_y)).mean())
        rates[f"p_t{g}"] = float(rng.binomial(1, expit(cfg.testing_coef * s_t)).mean())
    rates['p_y'] = 0.5 * (rates['p_y0'] + rates['p_y1'])
    rates['p_t'] = 0.5 * (rates['p_t0'] + rates['p_t1'])
    return rates
