"""Closed-form M-step optimum for untested examples and the checks behind it.

For an untested example with pseudo-label q and propensity t_hat, the M-step
per-example objective is

    BCE(q, y) - q * log(1 - y * t_hat)

whose first-order condition is a quadratic in y with discriminant
D = (2 q t + 1)^2 - 4 q t (q + 1) = 4 q^2 t^2 - 4 q^2 t + 1.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np
import pandas as pd

from .exceptions import TheoryCheckFailed
from .nnet import EPSILON

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 1e-5
ROUNDOFF = 1e-12
MONOTONE_TOL = 1e-10
# Bound on |d y_opt / d t_hat| checked over the default grid
SLOPE_BOUND = 4.0
IPW_DEMO_T_HAT = (0.1, 0.01, 0.001)
LIMIT_T_HAT = 1e-6


class OptPoint(NamedTuple):
    q: float
    t_hat: float
    y_opt: float
    r: float


def discriminant(q, t_hat):
    b = 2 * q * t_hat + 1
    return b * b - 4 * q * t_hat * (q + 1)


def _branches(q, t_hat):
    """(minus, plus) roots of the first-order condition."""
    d = np.sqrt(np.maximum(discriminant(q, t_hat), 0.0))
    b = 2 * q * t_hat + 1
    denom = 2 * t_hat * (1 + q)
    return (b - d) / denom, (b + d) / denom


def y_opt_closed_form(q, t_hat):
    """Minimizer of BCE(q, y) - q log(1 - y t_hat) over y in [0, 1]; q when t_hat is 0."""
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q!r}")
    if not 0 <= t_hat <= 1:
        raise ValueError(f"t_hat must lie in [0, 1], got {t_hat!r}")
    if t_hat == 0:
        return float(q)
    return float(min(max(_branches(q, t_hat)[0], 0.0), 1.0))


def causal_reg_strength(q, t_hat):
    return q - y_opt_closed_form(q, t_hat)


def opt_point(q, t_hat):
    y_opt = y_opt_closed_form(q, t_hat)
    return OptPoint(q, t_hat, y_opt, q - y_opt)


def untested_objective(q, y_hat, t_hat):
    y_hat = np.asarray(y_hat, dtype=float)
    return (
        -(q * np.log(np.maximum(y_hat, 1e-300)) + (1 - q) * np.log(np.maximum(1 - y_hat, 1e-300)))
        - q * np.log(np.maximum(1 - y_hat * t_hat, 1e-300))
    )


def tested_objective(y, y_hat, t_hat):
    """BCE(y, y_hat) + y * BCE(y, y_hat * t_hat) for a tested example (y_obs = y)."""
    y_hat = np.asarray(y_hat, dtype=float)
    product = y_hat * t_hat

    def _bce(p):
        return -(y * np.log(np.maximum(p, 1e-300)) + (1 - y) * np.log(np.maximum(1 - p, 1e-300)))

    return _bce(y_hat) + y * _bce(product)


def _grid(resolution):
    if not 0 < resolution <= 1e-4:
        raise ValueError(f"resolution must lie in (0, 1e-4], got {resolution!r}")
    return np.append(np.arange(0.0, 1.0, resolution), 1 - EPSILON)


def grid_oracle(q, t_hat, resolution=DEFAULT_RESOLUTION):
    """Brute-force argmin of the untested objective on {0, res, 2 res, ..., 1 - eps}."""
    grid = _grid(resolution)
    return float(grid[np.argmin(untested_objective(q, grid, t_hat))])


def grid_oracle_tested(y, t_hat, resolution=DEFAULT_RESOLUTION):
    grid = _grid(resolution)
    return float(grid[np.argmin(tested_objective(y, grid, t_hat))])


def ipw_slope(y, t, t_hat):
    """d/dt_hat of the inverse propensity term y t / t_hat."""
    return -y * t / (t_hat * t_hat)


@dataclass
class LemmaCheck:
    name: str
    passed: bool
    detail: str = ''


@dataclass
class LemmaReport:
    checks: List[LemmaCheck] = field(default_factory=list)

    def add(self, name, passed, detail=''):
        self.checks.append(LemmaCheck(name, bool(passed), detail))
        log = logger.info if passed else logger.warning
        log("%s: %s %s", name, 'ok' if passed else 'FAILED', detail)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def raise_for_failures(self):
        if self.failures:
            first = self.failures[0]
            raise TheoryCheckFailed(first.name, first.detail)

    def to_frame(self):
        return pd.DataFrame([(c.name, c.passed, c.detail) for c in self.checks],
                            columns=['check', 'passed', 'detail'])


@dataclass(frozen=True)
class GridSpec:
    """Points of the (q, t_hat) grid the suite scans."""
    q_values: tuple = tuple(np.round(np.arange(0, 20) * 0.05, 10))
    t_values: tuple = tuple(np.round(np.arange(1, 21) * 0.05, 10))
    dense: int = 200
    resolution: float = DEFAULT_RESOLUTION
    fd_step: float = 1e-6


def _check_oracle(report, spec):
    worst, where = 0.0, None
    for q in spec.q_values:
        for t in spec.t_values:
            err = abs(y_opt_closed_form(q, t) - grid_oracle(q, t, spec.resolution))
            if err > worst:
                worst, where = err, (q, t)
    report.add('closed_form_vs_grid', worst <= 2 * spec.resolution,
               f"max error {worst:.3g} at {where}")


def _check_discriminant(report, spec):
    q = np.linspace(0, 1, spec.dense)
    t = np.linspace(1 / spec.dense, 1, spec.dense)
    qq, tt = np.meshgrid(q, t)
    d = discriminant(qq, tt)
    report.add('discriminant_nonnegative', d.min() >= -ROUNDOFF, f"min D {d.min():.3g}")
    touch = discriminant(1.0, 0.5)
    report.add('discriminant_touches_zero', abs(touch) <= ROUNDOFF, f"D(1, 1/2) = {touch:.3g}")

    minus, plus = _branches(qq, tt)
    report.add('plus_branch_at_least_one', plus.min() >= 1 - ROUNDOFF, f"min {plus.min():.6g}")
    report.add('minus_branch_in_unit_interval',
               minus.min() >= -ROUNDOFF and minus.max() <= 1 + ROUNDOFF,
               f"range [{minus.min():.6g}, {minus.max():.6g}]")


def _check_derivative_sign(report, spec):
    h = spec.fd_step
    mismatches, worst_slope = [], 0.0
    for q in spec.q_values:
        for t in spec.t_values:
            lo, hi = max(t - h, h), min(t + h, 1.0)
            slope = (y_opt_closed_form(q, hi) - y_opt_closed_form(q, lo)) / (hi - lo)
            worst_slope = max(worst_slope, abs(slope))
            d = discriminant(q, t)
            if d < 1e-9:
                continue
            expr = 1 - 2 * t * q * q - math.sqrt(d)
            expected = 0 if abs(expr) < ROUNDOFF else np.sign(expr)
            observed = 0 if abs(slope) < 1e-7 else np.sign(slope)
            if expected != observed:
                mismatches.append((q, t))
    report.add('derivative_sign', not mismatches,
               f"{len(mismatches)} mismatches" + (f", first at {mismatches[0]}" if mismatches else ''))
    report.add('bounded_slope', worst_slope <= SLOPE_BOUND,
               f"max |dy_opt/dt_hat| {worst_slope:.4g} (bound {SLOPE_BOUND})")

    ipw = [abs(ipw_slope(1, 1, t)) for t in IPW_DEMO_T_HAT]
    growing = all(b > a for a, b in zip(ipw, ipw[1:])) and ipw[-1] > 100 * worst_slope
    report.add('ipw_slope_diverges', growing,
               ', '.join(f"t_hat={t:g}: {s:.4g}" for t, s in zip(IPW_DEMO_T_HAT, ipw)))


def _check_monotonicity(report, spec):
    violations = []
    for q in spec.q_values:
        if q >= 1:
            continue
        r = [causal_reg_strength(q, t) for t in spec.t_values]
        if q > 0:
            violations += [(q, t) for t, a, b in zip(spec.t_values[1:], r, r[1:]) if b - a <= MONOTONE_TOL]
        elif any(abs(v) > ROUNDOFF for v in r):
            violations.append((q, None))
    report.add('strength_increases_in_t_hat', not violations,
               f"{len(violations)} violations" + (f", first at {violations[0]}" if violations else ''))

    r_one = [causal_reg_strength(1.0, t) for t in spec.t_values]
    report.add('strength_nondecreasing_at_q_one',
               all(b >= a - ROUNDOFF for a, b in zip(r_one, r_one[1:])))


def _check_limits(report, spec):
    worst = max(abs(y_opt_closed_form(q, LIMIT_T_HAT) - q) for q in spec.q_values)
    report.add('vanishing_propensity_limit', worst <= 1e-3, f"max |y_opt - q| {worst:.3g}")
    worked = y_opt_closed_form(0.5, 1.0)
    report.add('worked_value', abs(worked - 1 / 3) <= ROUNDOFF, f"y_opt(0.5, 1) = {worked!r}")


def _check_tested(report, spec):
    misses = []
    for y in (0, 1):
        for t in (0.25, 0.5, 1.0):
            y_min = grid_oracle_tested(y, t, spec.resolution)
            if abs(y_min - y) > spec.resolution:
                misses.append((y, t, y_min))
    report.add('tested_solution_is_label', not misses, f"misses {misses}" if misses else '')


def _check_contour(report, spec):
    table = np.array([[y_opt_closed_form(q, t) for t in spec.t_values] for q in spec.q_values])
    across_t = np.all(np.diff(table, axis=1) <= ROUNDOFF)
    across_q = np.all(np.diff(table, axis=0) >= -ROUNDOFF)
    report.add('contour_monotone', across_t and across_q,
               f"non-increasing in t_hat: {bool(across_t)}, non-decreasing in q: {bool(across_q)}")


def lemma_suite(spec=GridSpec()):
    """Run every check over ``spec`` and return a ``LemmaReport``."""
    report = LemmaReport()
    for check in (_check_limits, _check_discriminant, _check_monotonicity,
                  _check_derivative_sign, _check_contour, _check_tested, _check_oracle):
        check(report, spec)
    return report


def contour_table(q_values=None, t_values=None):
    """(q, t_hat, y_opt, r) rows for contour plots."""
    q_values = np.linspace(0, 1, 101) if q_values is None else q_values
    t_values = np.linspace(0.01, 1, 100) if t_values is None else t_values
    rows = [opt_point(float(q), float(t)) for q in q_values for t in t_values]
    return pd.DataFrame(rows, columns=OptPoint._fields)
