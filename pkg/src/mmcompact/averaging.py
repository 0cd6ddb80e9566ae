"""The ball-average operator ``A_r`` and the inequalities it satisfies.

``A_r f(x)`` is the ``mu``-weighted mean of ``f`` over the closed ball
``B(x, r)``.  It is evaluated as

    A_r f(x) = f(x) + sum_{y in B(x,r)} (f(y) - f(x)) w(y) / mu(B(x, r))

with the sum accumulated nearest-first.  Written this way a singleton ball
returns ``f(x)`` bit-exactly and a constant function is reproduced exactly,
which the plain ratio of sums does not guarantee.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .lp import FunctionFamily, LpConfig, LpFunction, as_config, lp_norm, values_norm
from .space import MetricMeasureSpace, ball_sizes


def _check_radius(r: float) -> None:
    if not r > 0:
        raise PreconditionError(f"radius must be > 0, got {r!r}")


def deviation_prefix(space: MetricMeasureSpace, values: np.ndarray) -> np.ndarray:
    order = space.neighbor_order
    terms = (values[order] - values[:, None]) * space.weight[order]
    return np.cumsum(terms, axis=1)


def averages_from_prefix(space: MetricMeasureSpace, values: np.ndarray, prefix: np.ndarray,
                         radii: Sequence[float]) -> np.ndarray:
    """Averages at several radii from a precomputed deviation prefix."""
    rows = np.arange(space.n_points)
    out = np.empty((len(radii), space.n_points))
    for k, r in enumerate(radii):
        last = ball_sizes(space, r) - 1
        out[k] = values + prefix[rows, last] / space.cum_weight[rows, last]
    return out


def average_values(space: MetricMeasureSpace, values: np.ndarray,
                   radii: Sequence[float]) -> np.ndarray:
    """Averages of one value vector at several radii, shape ``(len(radii), N)``."""
    values = np.asarray(values, dtype=float)
    for r in radii:
        _check_radius(r)
    return averages_from_prefix(space, values, deviation_prefix(space, values), radii)


def average(f: LpFunction, r: float) -> LpFunction:
    """``A_r f`` as a new function."""
    _check_radius(r)
    return LpFunction(f.space, average_values(f.space, f.values, [r])[0])


def average_at(f: LpFunction, x: int, r: float) -> float:
    """``A_r f(x)`` at a single point (same arithmetic as :func:`average`)."""
    _check_radius(r)
    space = f.space
    order = space.neighbor_order[x]
    size = int(np.count_nonzero(space.sorted_dist[x] <= r))
    terms = (f.values[order[:size]] - f.values[x]) * space.weight[order[:size]]
    return float(f.values[x] + np.cumsum(terms)[-1] / space.cum_weight[x, size - 1])


def family_averages(family: FunctionFamily, r: float) -> np.ndarray:
    """``A_r f`` for every member, shape ``(members, N)``."""
    _check_radius(r)
    if len(family) == 0:
        return np.zeros((0, family.space.n_points))
    return np.vstack([average_values(family.space, f.values, [r])[0] for f in family])


@dataclass(frozen=True)
class PointwiseBoundReport:
    min_slack: float
    witness: int
    slacks: np.ndarray


def pointwise_slack_table(f: LpFunction, radii: Sequence[float],
                          cfg: LpConfig | float = 2.0) -> np.ndarray:
    """Slack in ``|A_r f(x)| <= ||f chi_B(x,r)||_p mu(B(x,r))^(-1/p)``, shape ``(R, N)``."""
    for r in radii:
        _check_radius(r)
    p = as_config(cfg).p
    space = f.space
    rows = np.arange(space.n_points)
    power = np.cumsum(np.abs(f.values[space.neighbor_order]) ** p
                      * space.weight[space.neighbor_order], axis=1)
    averages = average_values(space, f.values, radii)
    out = np.empty((len(radii), space.n_points))
    for k, r in enumerate(radii):
        last = ball_sizes(space, r) - 1
        bound = (power[rows, last] / space.cum_weight[rows, last]) ** (1.0 / p)
        out[k] = bound - np.abs(averages[k])
    return out


def pointwise_bound_check(f: LpFunction, r: float,
                          cfg: LpConfig | float = 2.0) -> PointwiseBoundReport:
    """Worst pointwise slack at radius ``r`` and the point where it occurs."""
    slacks = pointwise_slack_table(f, [r], cfg)[0]
    k = int(np.argmin(slacks))
    return PointwiseBoundReport(float(slacks[k]), k, slacks)


def norm_bound_slacks(f: LpFunction, radii: Sequence[float], cfg: LpConfig | float,
                      gamma: float) -> np.ndarray:
    """``gamma^(1/p) ||f||_p - ||A_r f||_p`` for each radius."""
    for r in radii:
        _check_radius(r)
    p = as_config(cfg).p
    bound = gamma ** (1.0 / p) * lp_norm(f, p)
    table = average_values(f.space, f.values, radii)
    return np.array([bound - values_norm(f.space, row, p) for row in table])


def norm_bound_check(f: LpFunction, r: float, cfg: LpConfig | float, gamma: float) -> float:
    """``gamma^(1/p) ||f||_p - ||A_r f||_p``; non-negative for the true doubling constant."""
    return float(norm_bound_slacks(f, [r], cfg, gamma)[0])


@dataclass(frozen=True)
class AverageProfile:
    """``deviations[k, i] = ||A_{radii[k]} f_i - f_i||_p``."""

    radii: tuple[float, ...]
    deviations: np.ndarray

    @property
    def max_deviation(self) -> np.ndarray:
        """Worst member per radius."""
        if self.deviations.shape[1] == 0:
            return np.zeros(len(self.radii))
        return self.deviations.max(axis=1)

    def monotone_members(self) -> list[bool]:
        """Whether each member's deviation is non-decreasing in ``r`` (diagnostic only)."""
        d = self.deviations
        return [bool(np.all(np.diff(d[:, i]) >= 0)) for i in range(d.shape[1])]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["radius", "member_index", "deviation"])
        for k, r in enumerate(self.radii):
            for i in range(self.deviations.shape[1]):
                w.writerow([repr(float(r)), i, repr(float(self.deviations[k, i]))])
        return buf.getvalue()


def member_deviations(space: MetricMeasureSpace, values: np.ndarray, radii: Sequence[float],
                      cfg: LpConfig | float) -> np.ndarray:
    """``||A_r f - f||_p`` for one member over all radii."""
    table = average_values(space, values, radii)
    return np.array([values_norm(space, row - values, cfg) for row in table])


def differentiation_profile(family: FunctionFamily, radii: Sequence[float],
                            cfg: LpConfig | float = 2.0, *, executor=None) -> AverageProfile:
    """Table of ``||A_r f - f||_p`` over radii and members.

    ``executor`` (a ``concurrent.futures`` executor) spreads members over
    workers; results are joined in member order so output does not depend on
    the worker count.
    """
    radii = tuple(sorted({float(r) for r in radii}))
    for r in radii:
        _check_radius(r)
    space = family.space
    if executor is None:
        cols = [member_deviations(space, f.values, radii, cfg) for f in family]
    else:
        futures = [executor.submit(member_deviations, space, f.values, radii, cfg)
                   for f in family]
        cols = [fut.result() for fut in futures]
    dev = np.column_stack(cols) if cols else np.zeros((len(radii), 0))
    return AverageProfile(radii, dev)


def equicontinuity_modulus(family: FunctionFamily, r: float, x: int, y: int) -> float:
    """``max_f |A_r f(x) - A_r f(y)|`` over the family."""
    if len(family) == 0:
        raise PreconditionError("family is empty")
    _check_radius(r)
    if x == y:
        return 0.0
    return max(abs(average_at(f, x, r) - average_at(f, y, r)) for f in family)


def equicontinuity_chain_bound(f: LpFunction, r: float, x: int, y: int,
                               cfg: LpConfig | float = 2.0) -> float:
    """Hoelder-chain upper bound on ``|A_r f(x) - A_r f(y)|``.

    ``||f chi_{Bx^By}||_p mu(Bx^By)^(1/q) / mu(Bx)
      + |1/mu(Bx) - 1/mu(By)| ||f chi_By||_p mu(By)^(1/q)``
    with ``mu(.)^(1/q) = 1`` when ``p = 1``.
    """
    _check_radius(r)
    cfg = as_config(cfg)
    space = f.space
    bx = space.dist[x] <= r
    by = space.dist[y] <= r
    sym = bx ^ by
    w = space.weight
    mx = math.fsum(w[bx].tolist())
    my = math.fsum(w[by].tolist())
    ms = math.fsum(w[sym].tolist())
    inv_q = 0.0 if cfg.q == math.inf else 1.0 / cfg.q
    f_sym = values_norm(space, np.where(sym, f.values, 0.0), cfg)
    f_by = values_norm(space, np.where(by, f.values, 0.0), cfg)
    return f_sym * ms ** inv_q / mx + abs(1.0 / mx - 1.0 / my) * f_by * my ** inv_q
