"""Relative compactness of function families via ball averages.

A bounded family ``F`` in ``Lp(X)`` is certified precompact at scale ``eps``
when

1. some ``delta`` makes ``||A_r f - f||_p < eps/2`` for all ``f`` and grid
   radii ``r < delta``, and
2. some bounded ``E`` makes ``||f chi_{X\\E}||_p < eps/2`` for all ``f``.

Given both, :func:`construct_epsilon_net` builds a finite set of simple
functions within ``eps`` of every ``(A_r f) chi_E``, so every member lies
within ``2 eps`` of the net.

On a finite space every finite family is precompact.  A failed condition
therefore means "not certified on the searched grid of radii / sets", which is
how escaping mass and oscillation show up under truncation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .averaging import AverageProfile, differentiation_profile, family_averages
from .errors import NotShiftableError, PreconditionError
from .lp import (FunctionFamily, LpConfig, as_config, family_bound, lp_norm, translate,
                 values_norm)
from .space import (MetricMeasureSpace, as_mask, dyadic_radii, min_ball_measure, point_list,
                    set_measure)

CERTIFIED = "certified-precompact"
CONDITION1_FAILED = "condition1-failed"
CONDITION2_FAILED = "condition2-failed"


@dataclass(frozen=True)
class Witness:
    member: int
    radius: float
    value: float

    def to_dict(self) -> dict:
        return {"member": self.member, "radius": self.radius, "value": self.value}


# ---------------------------------------------------------------- grids


def default_radius_grid(space: MetricMeasureSpace, floor: float | None = None) -> list[float]:
    """Dyadic radii, ascending.

    Without ``floor``: ``diam * 2**-j`` down to the first radius below the
    minimum separation (where every ball is a singleton).  With ``floor``:
    ``floor * 2**j`` up to the diameter.
    """
    top = space.diameter if space.diameter > 0 else 1.0
    if floor is None:
        return sorted(dyadic_radii(top, space.min_separation))
    if not floor > 0:
        raise PreconditionError("radius floor must be > 0")
    out = [float(floor)]
    while out[-1] * 2 <= top:
        out.append(out[-1] * 2)
    return out


def default_candidate_radii(space: MetricMeasureSpace, x0: int = 0,
                            max_radius: float | None = None) -> list[float]:
    """Radii ``2**k`` from about the minimum separation up to covering ``X`` from ``x0``."""
    ecc = float(space.dist[x0].max())
    if ecc == 0:
        radii = [1.0]
    else:
        k_lo = math.floor(math.log2(space.min_separation))
        k_hi = math.ceil(math.log2(ecc))
        radii = [2.0 ** k for k in range(k_lo, k_hi + 1)]
    if max_radius is not None:
        radii = [r for r in radii if r <= max_radius]
        if not radii:
            raise PreconditionError(f"no candidate radius 2**k is <= {max_radius!r}")
    return radii


# ---------------------------------------------------------------- condition (1)


@dataclass(frozen=True)
class AverageCondition:
    """Outcome of the ball-average condition on a radius grid.

    ``delta`` is the first failing grid radius (or the largest grid radius if
    none fails); every grid radius below it passes.  ``net_radius`` is the
    largest passing grid radius.
    """

    passed: bool
    epsilon: float
    delta: float | None
    net_radius: float | None
    profile: AverageProfile
    witness: Witness | None

    def profile_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["radius", "max_deviation"])
        for r, v in zip(self.profile.radii, self.profile.max_deviation):
            w.writerow([repr(float(r)), repr(float(v))])
        return buf.getvalue()


def check_condition_avg(family: FunctionFamily, epsilon: float,
                        radius_grid: Sequence[float] | None = None,
                        cfg: LpConfig | float = 2.0, *, executor=None) -> AverageCondition:
    if len(family) == 0:
        raise PreconditionError("family is empty")
    if not epsilon > 0:
        raise PreconditionError("epsilon must be > 0")
    if radius_grid is None:
        radius_grid = default_radius_grid(family.space)
    if len(radius_grid) == 0:
        raise PreconditionError("radius grid is empty")
    profile = differentiation_profile(family, radius_grid, cfg, executor=executor)
    worst = profile.max_deviation
    failing = np.flatnonzero(worst >= epsilon)
    radii = profile.radii
    if failing.size == 0:
        return AverageCondition(True, epsilon, radii[-1], radii[-1], profile, None)
    k = int(failing[0])
    member = int(np.argmax(profile.deviations[k]))
    witness = Witness(member, radii[k], float(profile.deviations[k, member]))
    if k == 0:
        return AverageCondition(False, epsilon, None, None, profile, witness)
    return AverageCondition(True, epsilon, radii[k], radii[k - 1], profile, witness)


# ---------------------------------------------------------------- condition (2)


@dataclass(frozen=True)
class TailCondition:
    passed: bool
    epsilon: float
    tail_set: np.ndarray | None
    tail_radius: float | None
    candidate_radii: tuple[float, ...]
    max_tails: tuple[float, ...]
    witness: Witness | None

    def profile_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["candidate_radius", "max_tail"])
        for r, v in zip(self.candidate_radii, self.max_tails):
            w.writerow([repr(float(r)), repr(float(v))])
        return buf.getvalue()


def check_condition_tail(family: FunctionFamily, epsilon: float,
                         candidates: Sequence[tuple[float, np.ndarray]] | None = None,
                         cfg: LpConfig | float = 2.0, *, x0: int = 0,
                         max_radius: float | None = None) -> TailCondition:
    """Smallest candidate ``E`` with ``max_f ||f chi_{X\\E}||_p < epsilon``.

    ``candidates`` is a sequence of ``(label_radius, mask)`` pairs; by default
    the balls ``B(x0, 2**k)``, optionally capped at ``max_radius``.
    """
    if len(family) == 0:
        raise PreconditionError("family is empty")
    if not epsilon > 0:
        raise PreconditionError("epsilon must be > 0")
    space = family.space
    if candidates is None:
        candidates = [(r, space.dist[x0] <= r)
                      for r in default_candidate_radii(space, x0, max_radius)]
    candidates = sorted(((float(r), as_mask(space, m)) for r, m in candidates),
                        key=lambda c: c[0])
    if not candidates:
        raise PreconditionError("no candidate sets")
    p = as_config(cfg).p
    radii, tails = [], []
    hit = None
    worst_member = 0
    for r, m in candidates:
        per_member = [values_norm(space, np.where(m, 0.0, f.values), p) for f in family]
        worst_member = int(np.argmax(per_member))
        radii.append(r)
        tails.append(per_member[worst_member])
        if hit is None and tails[-1] < epsilon:
            hit = (r, m)
    if hit is not None:
        return TailCondition(True, epsilon, hit[1], hit[0], tuple(radii), tuple(tails), None)
    witness = Witness(worst_member, radii[-1], tails[-1])
    return TailCondition(False, epsilon, None, None, tuple(radii), tuple(tails), witness)


# ---------------------------------------------------------------- Vitali selection


@dataclass(frozen=True)
class VitaliSelection:
    centers: tuple[int, ...]
    radii: tuple[float, ...]
    residual: np.ndarray
    residual_measure: float
    target: float

    def ball_masks(self, space: MetricMeasureSpace) -> list[np.ndarray]:
        return [space.dist[x] <= r for x, r in zip(self.centers, self.radii)]


def _as_delta_array(space: MetricMeasureSpace, delta_fn) -> np.ndarray:
    if callable(delta_fn):
        return np.array([float(delta_fn(x)) for x in range(space.n_points)])
    arr = np.asarray(delta_fn, dtype=float)
    if arr.ndim == 0:
        return np.full(space.n_points, float(arr))
    return arr


def vitali_selection(space: MetricMeasureSpace, subset,
                     delta_fn: Callable[[int], float] | np.ndarray | float,
                     residual_target: float) -> VitaliSelection:
    """Greedy pairwise-disjoint balls centred in ``E`` with ``r_i < delta(x_i)``.

    Each uncovered point starts from the largest distance in its own ladder
    below ``delta(x)``; on overlap with an accepted ball the radius halves, down
    to a radius below the minimum separation, where the ball is ``{x}``.
    Points are visited by decreasing starting radius, ties by index.  Since a
    singleton around an uncovered point is always disjoint from accepted
    balls, one pass covers ``E`` entirely, so the residual target is always
    reached.
    """
    if not residual_target > 0:
        raise PreconditionError("residual target must be > 0")
    E = as_mask(space, subset)
    delta = _as_delta_array(space, delta_fn)
    if np.any(delta[E] <= 0):
        raise PreconditionError("delta must be positive on E")
    floor = space.min_separation / 2 if math.isfinite(space.min_separation) else 1.0
    covered = np.zeros(space.n_points, dtype=bool)
    w = space.weight
    residual = math.fsum(w[E].tolist())
    centers: list[int] = []
    radii: list[float] = []

    def start_radius(x: int) -> tuple[float, float]:
        sd = space.sorted_dist[x]
        lo = min(floor, delta[x] / 2)
        ladder = sd[(sd > 0) & (sd < delta[x])]
        return (float(ladder.max()) if ladder.size else lo), lo

    while residual >= residual_target:
        pending = [int(x) for x in np.flatnonzero(E & ~covered)]
        if not pending:
            break
        starts = {x: start_radius(x) for x in pending}
        pending.sort(key=lambda x: (-starts[x][0], x))
        for x in pending:
            if covered[x]:
                continue
            r, lo = starts[x]
            while True:
                size = int(np.count_nonzero(space.sorted_dist[x] <= r))
                members = space.neighbor_order[x, :size]
                if not covered[members].any() or r <= lo:
                    break
                r = max(r / 2, lo)
            covered[members] = True
            centers.append(x)
            radii.append(r)
            residual = math.fsum(w[E & ~covered].tolist())
            if residual < residual_target:
                break
    return VitaliSelection(tuple(centers), tuple(radii), E & ~covered, residual,
                           float(residual_target))


# ---------------------------------------------------------------- epsilon nets


@dataclass
class EpsilonNet:
    """Simple functions ``sum_i a_i chi_{B(x_i, r_i) & E}`` covering ``{(A_r f) chi_E}``.

    ``levels[i]`` is the full quantisation grid at centre ``i`` and each
    element is a tuple of level indices, one per centre.  ``nearest[k]`` and
    ``distances[k]`` certify member ``k``.
    """

    epsilon: float
    radius: float
    p: float
    subset: np.ndarray
    selection: VitaliSelection | None
    levels: list[np.ndarray]
    elements: list[tuple[int, ...]]
    nearest: list[int]
    distances: list[float]
    threshold: float
    family_bound: float
    min_ball: float
    space: MetricMeasureSpace = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.elements)

    @property
    def certified(self) -> bool:
        return all(d < self.epsilon for d in self.distances)

    def element_pairs(self, k: int) -> list[tuple[int, float]]:
        """Element ``k`` as ``(centre point, level)`` pairs."""
        if self.selection is None:
            return []
        return [(int(x), float(self.levels[i][j]))
                for i, (x, j) in enumerate(zip(self.selection.centers, self.elements[k]))]

    def element_values(self, k: int) -> np.ndarray:
        phi = np.zeros(self.space.n_points)
        if self.selection is None:
            return phi
        for (x, level), r in zip(self.element_pairs(k), self.selection.radii):
            phi[(self.space.dist[x] <= r) & self.subset] = level
        return phi

    def to_dict(self) -> dict:
        sel = self.selection
        return {
            "epsilon": self.epsilon,
            "radius": self.radius,
            "p": self.p,
            "subset": point_list(self.subset),
            "centers": list(sel.centers) if sel else [],
            "ball_radii": list(sel.radii) if sel else [],
            "residual_measure": sel.residual_measure if sel else 0.0,
            "residual_target": sel.target if sel else None,
            "threshold": self.threshold,
            "family_bound": self.family_bound,
            "min_ball_measure": self.min_ball,
            "levels": [lv.tolist() for lv in self.levels],
            "elements": [[[x, a] for x, a in self.element_pairs(k)] for k in range(self.size)],
            "certification": [{"member": i, "element": e, "distance": d}
                              for i, (e, d) in enumerate(zip(self.nearest, self.distances))],
            "certified": self.certified,
        }


def equicontinuity_radii(space: MetricMeasureSpace, averages: np.ndarray, subset,
                         threshold: float) -> np.ndarray:
    """``delta(x)`` for ``x`` in ``E``: the distance to the nearest ``y`` with
    ``max_f |A_r f(x) - A_r f(y)| >= threshold`` (``inf`` if there is none).
    """
    E = as_mask(space, subset)
    delta = np.full(space.n_points, np.inf)
    for x in np.flatnonzero(E):
        order = space.neighbor_order[x]
        gap = np.abs(averages[:, order] - averages[:, x, None]).max(axis=0)
        bad = np.flatnonzero(gap[1:] >= threshold)
        if bad.size:
            delta[x] = space.sorted_dist[x, bad[0] + 1]
    return delta


def construct_epsilon_net(family: FunctionFamily, epsilon: float, r: float, subset=None,
                          cfg: LpConfig | float = 2.0) -> EpsilonNet:
    """Finite net for ``{(A_r f) chi_E : f in F}`` following the averaging argument.

    Steps: family bound ``c`` and minimal ball measure ``a`` on ``E``; radii
    ``delta(x)`` where the averages move by less than ``eps mu(E)^(-1/p) / 4``;
    disjoint balls leaving residual measure below ``a eps^p / (2c)^p``;
    per-centre quantisation of ``A_r f(x_i)`` with spacing
    ``eps mu(E)^(-1/p) / 2``.  Only level combinations realised by members
    are kept.
    """
    if not r > 0:
        raise PreconditionError(f"radius must be > 0, got {r!r}")
    if not epsilon > 0:
        raise PreconditionError("epsilon must be > 0")
    space = family.space
    E = as_mask(space, subset)
    if not E.any():
        raise PreconditionError("E must be non-empty")
    p = as_config(cfg).p
    c = family_bound(family, p)
    mu_e = set_measure(space, E)
    threshold = epsilon * mu_e ** (-1.0 / p) / 4
    a = min_ball_measure(space, E, r)

    if c == 0:
        n = len(family)
        return EpsilonNet(epsilon, r, p, E, None, [], [()], [0] * n, [0.0] * n,
                          threshold, 0.0, a, space)

    averages = family_averages(family, r)
    delta = equicontinuity_radii(space, averages, E, threshold)
    selection = vitali_selection(space, E, delta, a * epsilon ** p / (2 * c) ** p)

    spacing = 2 * threshold
    levels: list[np.ndarray] = []
    choice = np.empty((len(family), len(selection.centers)), dtype=np.int64)
    for i, x in enumerate(selection.centers):
        v = averages[:, x]
        lo = float(v.min())
        top = int(math.floor((float(v.max()) - lo) / spacing + 0.5))
        grid = lo + np.arange(top + 1) * spacing
        j = np.clip(np.floor((v - lo) / spacing + 0.5).astype(np.int64), 0, top)
        levels.append(grid)
        choice[:, i] = j

    elements: list[tuple[int, ...]] = []
    index: dict[tuple[int, ...], int] = {}
    for row in choice:
        key = tuple(int(j) for j in row)
        if key not in index:
            index[key] = len(elements)
            elements.append(key)

    net = EpsilonNet(epsilon, r, p, E, selection, levels, elements, [], [], threshold, c, a,
                     space)
    phis = [net.element_values(k) for k in range(net.size)]
    targets = np.where(E[None, :], averages, 0.0)
    for t in targets:
        dists = [values_norm(space, t - phi, p) for phi in phis]
        k = int(np.argmin(dists))
        net.nearest.append(k)
        net.distances.append(float(dists[k]))
    return net


@dataclass(frozen=True)
class MemberNet:
    """Net whose elements are family members (farthest-point greedy)."""

    epsilon: float
    centers: tuple[int, ...]
    assignment: tuple[int, ...]
    distances: tuple[float, ...]

    @property
    def size(self) -> int:
        return len(self.centers)

    @property
    def max_distance(self) -> float:
        return max(self.distances) if self.distances else 0.0


def greedy_net_oracle(family: FunctionFamily, epsilon: float,
                      cfg: LpConfig | float = 2.0) -> MemberNet:
    """Farthest-point greedy net: add the member farthest from the net until all are within ``epsilon``."""
    if len(family) == 0:
        raise PreconditionError("family is empty")
    if not epsilon > 0:
        raise PreconditionError("epsilon must be > 0")
    p = as_config(cfg).p
    space = family.space
    vals = family.matrix
    centers = [0]
    nearest = np.array([values_norm(space, v - vals[0], p) for v in vals])
    assign = np.zeros(len(family), dtype=int)
    while nearest.max() >= epsilon:
        k = int(np.argmax(nearest))
        centers.append(k)
        d = np.array([values_norm(space, v - vals[k], p) for v in vals])
        closer = d < nearest
        assign[closer] = len(centers) - 1
        nearest = np.minimum(nearest, d)
    return MemberNet(epsilon, tuple(centers), tuple(int(a) for a in assign),
                     tuple(float(d) for d in nearest))


# ---------------------------------------------------------------- classical check


@dataclass(frozen=True)
class TranslationCondition:
    """Classical shift condition on a periodic grid.

    ``delta = j * h`` with ``j`` the first failing step (or ``max_steps``);
    every shift with ``|j'| * h < delta`` passes.  ``passed`` requires all
    shifts up to ``min_steps`` to pass.
    """

    passed: bool
    epsilon: float
    delta: float
    step: float
    first_failing_step: int | None
    witness: Witness | None
    profile: tuple[tuple[float, float], ...]


def kr_translation_condition(family: FunctionFamily, epsilon: float, max_steps: int,
                             cfg: LpConfig | float = 2.0, *,
                             min_steps: int = 1) -> TranslationCondition:
    space = family.space
    h = space.periodic_shift_step
    if h is None:
        raise NotShiftableError("translation condition needs a periodic grid")
    if not epsilon > 0:
        raise PreconditionError("epsilon must be > 0")
    if len(family) == 0:
        raise PreconditionError("family is empty")
    p = as_config(cfg).p
    max_steps = max(1, min(int(max_steps), space.n_points - 1)) if space.n_points > 1 else 1
    profile = []
    fail = None
    witness = None
    for j in range(1, max_steps + 1):
        vals = [max(lp_norm(translate(f, j) - f, p), lp_norm(translate(f, -j) - f, p))
                for f in family]
        k = int(np.argmax(vals))
        profile.append((j * h, float(vals[k])))
        if vals[k] >= epsilon:
            fail = j
            witness = Witness(k, j * h, float(vals[k]))
            break
    steps = fail if fail is not None else max_steps
    passed = fail is None or fail > min_steps
    return TranslationCondition(passed, epsilon, steps * h, h, fail,
                                None if passed else witness, tuple(profile))


# ---------------------------------------------------------------- full criterion


@dataclass
class CompactnessReport:
    verdict: str
    epsilon: float
    delta: float | None
    tail_radius: float | None
    net: EpsilonNet | None
    certified_radius: float | None
    member_distances: list[float] | None
    witness: Witness | None
    average_condition: AverageCondition
    tail_condition: TailCondition

    @property
    def achieved_radius(self) -> float | None:
        return max(self.member_distances) if self.member_distances else None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "tail_radius": self.tail_radius,
            "net_size": self.net.size if self.net is not None else None,
            "certified_radius": self.certified_radius,
            "witness": self.witness.to_dict() if self.witness else None,
        }


def is_relatively_compact(family: FunctionFamily, epsilon: float,
                          cfg: LpConfig | float = 2.0, *,
                          radius_grid: Sequence[float] | None = None,
                          candidates: Sequence[tuple[float, np.ndarray]] | None = None,
                          x0: int = 0, max_candidate_radius: float | None = None,
                          executor=None) -> CompactnessReport:
    """Check both conditions at budget ``eps/2`` and, if they hold, build the net.

    The certified radius is ``2 eps``: ``||f - (A_r f) chi_E||_p < eps`` from
    the two conditions plus ``< eps`` from the net.  Each member's actual
    distance to its nearest net element is measured and returned as well.
    """
    if not epsilon > 0:
        raise PreconditionError("epsilon must be > 0")
    p = as_config(cfg).p
    tail = check_condition_tail(family, epsilon / 2, candidates, p, x0=x0,
                                max_radius=max_candidate_radius)
    avg = check_condition_avg(family, epsilon / 2, radius_grid, p, executor=executor)
    if not tail.passed:
        return CompactnessReport(CONDITION2_FAILED, epsilon, avg.delta, None, None, None, None,
                                 tail.witness, avg, tail)
    if not avg.passed:
        return CompactnessReport(CONDITION1_FAILED, epsilon, None, tail.tail_radius, None, None,
                                 None, avg.witness, avg, tail)
    net = construct_epsilon_net(family, epsilon, avg.net_radius, tail.tail_set, p)
    phis = [net.element_values(k) for k in range(net.size)]
    distances = []
    for f in family:
        distances.append(min(values_norm(family.space, f.values - phi, p) for phi in phis))
    radius = 2 * epsilon
    if max(distances) >= radius:
        raise RuntimeError(
            f"net certification broke: member distance {max(distances)!r} >= {radius!r}"
        )
    return CompactnessReport(CERTIFIED, epsilon, avg.delta, tail.tail_radius, net, radius,
                             distances, None, avg, tail)
