"""Finite metric measure spaces and closed-ball geometry.

A space is a finite point set ``0..N-1`` with a symmetric distance table and
strictly positive point weights.  Every measure is a finite sum of weights, so
all ball quantities below are exact up to floating-point rounding.

Subsets of a space (``PointSet`` in the docs) are boolean numpy masks of
length ``N``; helpers accept index lists too and normalise via :func:`as_mask`.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import PreconditionError, SpaceError

# Triangle-inequality validation is O(N^3); above this size it is opt-in.
VALIDATE_MAX_POINTS = 512


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """A finite metric measure space.

    Parameters
    ----------
    dist : (N, N) array
        Symmetric distance table with zero diagonal.
    weight : (N,) array
        Strictly positive point masses.
    coords : (N, d) array, optional
        Euclidean coordinates, set by the grid/cloud builders.  For circle
        grids this is the arc parameter in ``[0, 1)``.
    periodic_shift_step : float, optional
        Grid step ``h`` of a periodic grid; enables :func:`mmcompact.lp.translate`.
    validate : bool, optional
        Check the triangle inequality.  ``None`` means "only when N <= 512".
    """

    dist: np.ndarray
    weight: np.ndarray
    coords: np.ndarray | None = None
    periodic_shift_step: float | None = None
    name: str | None = None
    validate: bool | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        dist = np.array(self.dist, dtype=np.float64)
        weight = np.array(self.weight, dtype=np.float64).reshape(-1)
        n = weight.shape[0]
        if n == 0:
            raise SpaceError("space must contain at least one point")
        if dist.shape != (n, n):
            raise SpaceError(f"distance table has shape {dist.shape}, expected ({n}, {n})")
        if not np.all(np.isfinite(dist)) or not np.all(np.isfinite(weight)):
            raise SpaceError("distances and weights must be finite")
        if np.any(weight <= 0):
            i = int(np.flatnonzero(weight <= 0)[0])
            raise SpaceError(f"weight of point {i} is {weight[i]!r}; weights must be > 0")
        if np.any(np.diag(dist) != 0):
            raise SpaceError("distance table must have a zero diagonal")
        if np.any(dist < 0):
            raise SpaceError("distances must be non-negative")
        diameter = float(dist.max())
        tol = 1e-12 * diameter
        if not np.array_equal(dist, dist.T):
            if np.max(np.abs(dist - dist.T)) > tol:
                raise SpaceError("distance table is not symmetric")
            dist = 0.5 * (dist + dist.T)
        off = dist + np.eye(n) * (diameter + 1.0)
        if n > 1 and off.min() <= 0:
            i, j = np.unravel_index(int(np.argmin(off)), off.shape)
            raise SpaceError(f"points {i} and {j} coincide (distance 0)")
        check = self.validate if self.validate is not None else n <= VALIDATE_MAX_POINTS
        if check:
            for k in range(n):
                bad = dist > dist[:, k, None] + dist[None, k, :] + tol
                if bad.any():
                    i, j = np.argwhere(bad)[0]
                    raise SpaceError(
                        f"triangle inequality violated: d({i},{j})={dist[i, j]!r} > "
                        f"d({i},{k})+d({k},{j})={dist[i, k] + dist[k, j]!r}"
                    )
        object.__setattr__(self, "dist", _readonly(dist))
        object.__setattr__(self, "weight", _readonly(weight))
        if self.coords is not None:
            coords = np.array(self.coords, dtype=np.float64)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != n:
                raise SpaceError("coords must have one row per point")
            object.__setattr__(self, "coords", _readonly(coords))

    def __len__(self) -> int:
        return self.weight.shape[0]

    @property
    def n_points(self) -> int:
        return self.weight.shape[0]

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())

    @cached_property
    def min_separation(self) -> float:
        """Smallest positive pairwise distance (``inf`` for a single point)."""
        if self.n_points == 1:
            return math.inf
        pos = self.dist[self.dist > 0]
        return float(pos.min())

    @cached_property
    def total_measure(self) -> float:
        return math.fsum(self.weight.tolist())

    @cached_property
    def neighbor_order(self) -> np.ndarray:
        """Row ``x`` lists all points sorted by distance from ``x`` (``x`` first)."""
        return _readonly(np.argsort(self.dist, axis=1, kind="stable"))

    @cached_property
    def sorted_dist(self) -> np.ndarray:
        return _readonly(np.take_along_axis(self.dist, self.neighbor_order, axis=1))

    @cached_property
    def cum_weight(self) -> np.ndarray:
        """``cum_weight[x, k]`` is the measure of the ``k+1`` nearest points to ``x``."""
        return _readonly(np.cumsum(self.weight[self.neighbor_order], axis=1))

    @cached_property
    def hash(self) -> str:
        h = hashlib.sha256(b"mmcompact-space-v1")
        h.update(np.ascontiguousarray(self.dist, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.weight, dtype="<f8").tobytes())
        return h.hexdigest()

    def __repr__(self) -> str:
        label = self.name or "space"
        return f"MetricMeasureSpace({label!r}, N={self.n_points})"


@dataclass(frozen=True)
class DoublingReport:
    gamma: float
    witness_point: int
    witness_radius: float
    critical_radii: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "witness_point": self.witness_point,
            "witness_radius": self.witness_radius,
            "critical_radii": list(self.critical_radii),
        }


# ---------------------------------------------------------------- builders


def from_distance_matrix(dist, weights, *, name=None, validate=None) -> MetricMeasureSpace:
    return MetricMeasureSpace(np.asarray(dist, dtype=float), np.asarray(weights, dtype=float),
                              name=name, validate=validate)


def from_coords(coords, weights=None, *, name=None, validate=None) -> MetricMeasureSpace:
    """Euclidean point set; unit weights unless given."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    if coords.shape[0] == 0:
        raise SpaceError("space must contain at least one point")
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if weights is None:
        weights = np.ones(coords.shape[0])
    return MetricMeasureSpace(dist, np.asarray(weights, dtype=float), coords=coords,
                              name=name, validate=validate)


def circle_grid(n: int) -> MetricMeasureSpace:
    """Unit-circumference circle sampled at ``i/n`` with arc-length metric.

    Weights are ``1/n`` (total measure 1) and the periodic shift step is ``1/n``.
    """
    if n <= 0:
        raise SpaceError("circle grid needs n >= 1")
    idx = np.arange(n)
    k = np.abs(idx[:, None] - idx[None, :])
    k = np.minimum(k, n - k)
    # k/n keeps tie distances bit-identical across rows
    dist = k / n
    return MetricMeasureSpace(dist, np.full(n, 1.0 / n), coords=idx / n,
                              periodic_shift_step=1.0 / n, name=f"circle{n}",
                              validate=False)


def line_grid(n: int, length: float) -> MetricMeasureSpace:
    """``n`` equispaced points on ``[0, length]`` with trapezoid weights."""
    if n <= 0:
        raise SpaceError("line grid needs n >= 1")
    if n == 1:
        return MetricMeasureSpace(np.zeros((1, 1)), np.array([float(length) or 1.0]),
                                  coords=np.zeros(1), name="line1")
    if length <= 0:
        raise SpaceError("line grid needs length > 0")
    idx = np.arange(n)
    x = idx * float(length) / (n - 1)
    dist = np.abs(idx[:, None] - idx[None, :]) * float(length) / (n - 1)
    h = float(length) / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return MetricMeasureSpace(dist, w, coords=x, name=f"line{n}", validate=False)


def random_cloud(n: int, dimension: int = 2, seed: int = 0) -> MetricMeasureSpace:
    """Uniform random points in the unit cube, weights ``1/n``."""
    if n <= 0:
        raise SpaceError("random cloud needs n >= 1")
    rng = np.random.default_rng(seed)
    coords = rng.random((n, dimension))
    space = from_coords(coords, np.full(n, 1.0 / n), name=f"cloud{n}-{dimension}d-s{seed}",
                        validate=False)
    return space


def build_space(spec: dict) -> MetricMeasureSpace:
    """Construct a space from its JSON description (see README for the schema)."""
    kind = spec.get("kind")
    try:
        if kind == "circle":
            return circle_grid(int(spec["n"]))
        if kind == "line_grid":
            return line_grid(int(spec["n"]), float(spec["length"]))
        if kind == "random_cloud":
            if "seed" not in spec:
                raise SpaceError("random_cloud requires a seed")
            return random_cloud(int(spec["n"]), int(spec.get("dimension", 2)), int(spec["seed"]))
        if kind == "explicit":
            name = spec.get("name")
            validate = spec.get("validate")
            if "dist" in spec:
                weights = spec.get("weights")
                if weights is None:
                    weights = np.ones(len(spec["dist"]))
                return from_distance_matrix(spec["dist"], weights, name=name, validate=validate)
            if "coords" in spec:
                return from_coords(spec["coords"], spec.get("weights"), name=name,
                                   validate=validate)
            raise SpaceError("explicit space needs 'dist' or 'coords'")
    except KeyError as exc:
        raise SpaceError(f"{kind} space is missing field {exc.args[0]!r}") from None
    raise SpaceError(f"unknown space kind {kind!r}")


# ---------------------------------------------------------------- point sets


def as_mask(space: MetricMeasureSpace, subset) -> np.ndarray:
    """Normalise a subset (bool mask or iterable of indices) to a bool mask."""
    if subset is None:
        return np.ones(space.n_points, dtype=bool)
    arr = np.asarray(subset)
    if arr.dtype == bool:
        if arr.shape != (space.n_points,):
            raise PreconditionError("mask length does not match the space")
        return arr
    mask = np.zeros(space.n_points, dtype=bool)
    if arr.size:
        idx = arr.astype(int).reshape(-1)
        if idx.min() < 0 or idx.max() >= space.n_points:
            raise PreconditionError("point index out of range")
        mask[idx] = True
    return mask


def set_measure(space: MetricMeasureSpace, subset) -> float:
    mask = as_mask(space, subset)
    return math.fsum(space.weight[mask].tolist())


def set_diameter(space: MetricMeasureSpace, subset) -> float:
    idx = np.flatnonzero(as_mask(space, subset))
    if idx.size == 0:
        return 0.0
    return float(space.dist[np.ix_(idx, idx)].max())


def _check_radius(r: float) -> None:
    if not r > 0:
        raise PreconditionError(f"radius must be > 0, got {r!r}")


def ball(space: MetricMeasureSpace, x: int, r: float) -> np.ndarray:
    """Closed ball ``{y : d(x, y) <= r}`` as a mask."""
    _check_radius(r)
    return space.dist[x] <= r


def ball_measure(space: MetricMeasureSpace, x: int, r: float) -> float:
    _check_radius(r)
    return math.fsum(space.weight[space.dist[x] <= r].tolist())


def ball_sizes(space: MetricMeasureSpace, r: float) -> np.ndarray:
    """Number of points in ``B(x, r)`` for every ``x``."""
    _check_radius(r)
    return np.count_nonzero(space.sorted_dist <= r, axis=1)


def ball_measures(space: MetricMeasureSpace, r: float) -> np.ndarray:
    """``mu(B(x, r))`` for every ``x`` (vectorised, prefix-sum based)."""
    sizes = ball_sizes(space, r)
    return space.cum_weight[np.arange(space.n_points), sizes - 1]


def symmetric_difference_measure(space: MetricMeasureSpace, x: int, y: int, r: float) -> float:
    _check_radius(r)
    bx = space.dist[x] <= r
    by = space.dist[y] <= r
    return math.fsum(space.weight[bx ^ by].tolist())


def min_ball_measure(space: MetricMeasureSpace, subset, r: float) -> float:
    """``min{mu(B(x, r)) : x in E}``."""
    _check_radius(r)
    mask = as_mask(space, subset)
    if not mask.any():
        raise PreconditionError("min_ball_measure needs a non-empty set")
    return float(ball_measures(space, r)[mask].min())


def critical_radii(space: MetricMeasureSpace) -> np.ndarray:
    """Sorted radii where ``r -> mu(B(x,2r)) / mu(B(x,r))`` can jump: ``D u D/2``."""
    d = np.unique(space.dist[space.dist > 0])
    return np.unique(np.concatenate([d, d / 2]))


def doubling_constant(space: MetricMeasureSpace) -> DoublingReport:
    """Exact doubling constant ``sup mu(B(x,2r)) / mu(B(x,r))``.

    The ratio is a right-continuous step function of ``r`` whose jumps lie in
    ``D u D/2`` (``D`` = distinct positive distances).  Each step is sampled at
    its left endpoint and at one interior point; the leading interval
    ``(0, b_0)`` is sampled at ``b_0 / 2``.
    """
    crit = critical_radii(space)
    if crit.size == 0:
        return DoublingReport(1.0, 0, 1.0, ())
    interior = np.empty_like(crit)
    interior[:-1] = 0.5 * (crit[:-1] + crit[1:])
    interior[-1] = 2.0 * crit[-1]
    samples = np.empty(2 * crit.size + 1)
    samples[0] = 0.5 * crit[0]
    samples[1::2] = crit
    samples[2::2] = interior

    best, best_x, best_r = -math.inf, 0, float(samples[0])
    rows = np.arange(space.n_points)
    for x in rows:
        sd = space.sorted_dist[x]
        cw = space.cum_weight[x]
        small = cw[np.searchsorted(sd, samples, side="right") - 1]
        big = cw[np.searchsorted(sd, 2.0 * samples, side="right") - 1]
        ratio = big / small
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, best_x, best_r = float(ratio[k]), int(x), float(samples[k])
    return DoublingReport(max(best, 1.0), best_x, best_r, tuple(crit.tolist()))


def dyadic_radii(top: float, bottom: float) -> list[float]:
    """``top * 2**-j`` for ``j = 0, 1, ...`` down to the first value below ``bottom``."""
    if not top > 0:
        raise PreconditionError("top radius must be > 0")
    out = [float(top)]
    if not math.isfinite(bottom):
        return out
    while out[-1] >= bottom:
        out.append(out[-1] / 2)
    return out


def point_list(mask: np.ndarray) -> list[int]:
    return np.flatnonzero(mask).tolist()
