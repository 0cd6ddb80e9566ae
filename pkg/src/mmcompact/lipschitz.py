"""Lipschitz functions: extension, the classes L(n), deformations, density.

``L(n)`` is the set of ``f`` with ``||f||_p <= n``, ``lip(f) <= n`` and
``supp f`` inside ``B(x0, n)``.  Two maps move ``L(n)`` into itself:

* :func:`phi_scale` shrinks ``f`` by ``1 - eps/n`` so ``lip < n``;
* :func:`psi_spike` plants a tent of slope ``n`` at ``x0`` and repairs the
  annulus around it by McShane extension, so ``lip = n``.

On atomic spaces the tent reaches slope exactly ``n`` only if some point
other than ``x0`` lies within the inner radius; :class:`PsiResult` reports
whether that happened.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .averaging import averages_from_prefix, deviation_prefix
from .errors import LipschitzBoundError, PreconditionError
from .lp import LpConfig, LpFunction, as_config, lp_norm, support, values_norm
from .space import MetricMeasureSpace, as_mask, ball_measure, ball_sizes, point_list

_ROW_CHUNK = 512


def lipschitz_constant(f: LpFunction) -> float:
    """``max_{x != y} |f(x) - f(y)| / d(x, y)``; 0 on a one-point space."""
    space = f.space
    n = space.n_points
    if n < 2:
        return 0.0
    v = f.values
    best = 0.0
    for start in range(0, n, _ROW_CHUNK):
        stop = min(n, start + _ROW_CHUNK)
        d = space.dist[start:stop]
        diff = np.abs(v[start:stop, None] - v[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, diff / d, 0.0)
        best = max(best, float(q.max()))
    return best


@dataclass(frozen=True, eq=False)
class PartialFunction:
    """Values on a subset ``domain`` with a declared Lipschitz bound ``L``.

    Construction checks ``|v(a) - v(b)| <= L d(a, b)`` on the domain (up to
    a 1e-12 relative rounding allowance) and raises
    :class:`~mmcompact.errors.LipschitzBoundError` with the worst pair.
    """

    space: MetricMeasureSpace
    domain: np.ndarray
    values: np.ndarray
    L: float

    def __post_init__(self) -> None:
        dom = np.asarray(self.domain)
        if dom.dtype == bool:
            dom = np.flatnonzero(as_mask(self.space, dom))
        dom = np.asarray(dom, dtype=np.int64).reshape(-1)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if dom.size == 0:
            raise PreconditionError("partial function needs a non-empty domain")
        if np.unique(dom).size != dom.size:
            raise PreconditionError("domain indices must be distinct")
        if vals.shape != dom.shape:
            raise PreconditionError("one value per domain point is required")
        if dom.min() < 0 or dom.max() >= self.space.n_points:
            raise PreconditionError("domain index out of range")
        if not np.all(np.isfinite(vals)):
            raise PreconditionError("values must be finite")
        L = float(self.L)
        if L < 0:
            raise PreconditionError("Lipschitz bound must be >= 0")
        d = self.space.dist[np.ix_(dom, dom)]
        diff = np.abs(vals[:, None] - vals[None, :])
        excess = diff - L * d - 1e-12 * (diff + L * d)
        if dom.size > 1 and excess.max() > 0:
            i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
            a, b = int(dom[i]), int(dom[j])
            quotient = float(diff[i, j] / d[i, j])
            raise LipschitzBoundError(
                f"values at points {a} and {b} have difference quotient {quotient!r} > L={L!r}",
                (a, b), quotient,
            )
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "L", L)


def mcshane_extend(partial: PartialFunction) -> LpFunction:
    """Largest ``L``-Lipschitz extension: ``min_a (v(a) + L d(a, x))``."""
    space = partial.space
    ext = np.min(partial.values[:, None] + partial.L * space.dist[partial.domain], axis=0)
    ext[partial.domain] = partial.values
    return LpFunction(space, ext)


def whitney_extend(partial: PartialFunction) -> LpFunction:
    """Smallest ``L``-Lipschitz extension: ``max_a (v(a) - L d(a, x))``."""
    space = partial.space
    ext = np.max(partial.values[:, None] - partial.L * space.dist[partial.domain], axis=0)
    ext[partial.domain] = partial.values
    return LpFunction(space, ext)


# ---------------------------------------------------------------- L(n)


@dataclass(frozen=True)
class LnSpec:
    n: float
    x0: int = 0
    cfg: LpConfig = field(default_factory=LpConfig)

    def __post_init__(self) -> None:
        if not self.n > 0:
            raise PreconditionError("n must be > 0")
        object.__setattr__(self, "cfg", as_config(self.cfg))


@dataclass(frozen=True)
class LnMembership:
    member: bool
    norm: float
    lipschitz: float
    support_radius: float
    failures: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.member


def in_Ln(f: LpFunction, spec: LnSpec, rtol: float = 1e-12) -> LnMembership:
    """Test the three ``L(n)`` conditions; ``failures`` names the violated ones.

    ``rtol`` absorbs rounding in quantities that equal ``n`` in exact arithmetic.
    """
    n = spec.n
    slack = n * (1 + rtol)
    norm = lp_norm(f, spec.cfg)
    lip = lipschitz_constant(f)
    supp = support(f)
    d0 = f.space.dist[spec.x0]
    supp_radius = float(d0[supp].max()) if supp.any() else 0.0
    failures = []
    if norm > slack:
        failures.append("norm")
    if lip > slack:
        failures.append("lipschitz")
    if supp_radius > n:
        failures.append("support")
    return LnMembership(not failures, norm, lip, supp_radius, tuple(failures))


def _check_eps(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon!r}")


def phi_scale(f: LpFunction, spec: LnSpec, epsilon: float) -> LpFunction:
    """``(1 - eps/n) f``: within ``eps`` of ``f`` with Lipschitz constant ``<= n - eps``."""
    _check_eps(epsilon)
    membership = in_Ln(f, spec)
    if not membership:
        raise PreconditionError(f"f is not in L({spec.n}): {', '.join(membership.failures)}")
    return f * (1.0 - epsilon / spec.n)


@dataclass(frozen=True)
class PsiResult:
    function: LpFunction
    r1: float
    r2: float
    m: float
    lipschitz: float
    distance: float
    exact: bool
    spike_points: int

    @property
    def status(self) -> str:
        return "exact" if self.exact else "degraded"

    def to_dict(self) -> dict:
        return {
            "r1": self.r1, "r2": self.r2, "m": self.m, "lipschitz": self.lipschitz,
            "distance": self.distance, "status": self.status, "spike_points": self.spike_points,
            "values": self.function.values.tolist(),
        }


def psi_spike(f: LpFunction, spec: LnSpec, epsilon: float, y0: int) -> PsiResult:
    """Tent of slope ``n`` at ``x0`` glued to ``f`` by McShane extension.

    With ``m = max(lip f, ||f||_p) < n`` and ``eps <= n - m``:

        r1 = min(eps / (3 n mu(B(x0, n))^(1/p)), d(x0, y0), n),  r2 = (n - m) r1 / n

    ``f`` is replaced by ``f(x0) + n (r2 - d(x, x0))`` on ``B(x0, r2)``, kept
    outside ``B(x0, r1)``, and the annulus in between is filled by the
    McShane extension with constant ``n``.
    """
    _check_eps(epsilon)
    space = f.space
    x0, n, p = spec.x0, spec.n, spec.cfg.p
    if y0 == x0:
        raise PreconditionError("y0 must differ from x0")
    membership = in_Ln(f, spec)
    if not membership:
        raise PreconditionError(f"f is not in L({n}): {', '.join(membership.failures)}")
    m = max(membership.lipschitz, membership.norm)
    if m >= n:
        raise PreconditionError(f"m = max(lip f, ||f||_p) = {m!r} must be < n = {n!r}")
    if epsilon > n - m:
        raise PreconditionError(f"epsilon {epsilon!r} exceeds n - m = {n - m!r}")

    d0 = space.dist[x0]
    r1 = min(epsilon / (3 * n * ball_measure(space, x0, n) ** (1.0 / p)), float(d0[y0]), n)
    r2 = (n - m) * r1 / n
    inner = d0 <= r2
    domain = inner | (d0 > r1)
    psi = np.where(inner, f.values[x0] + n * (r2 - d0), f.values)
    partial = PartialFunction(space, np.flatnonzero(domain), psi[domain], n)
    g = mcshane_extend(partial)
    spike_points = int(np.count_nonzero(inner))
    return PsiResult(
        function=g, r1=r1, r2=r2, m=m,
        lipschitz=lipschitz_constant(g),
        distance=lp_norm(g - f, p),
        exact=spike_points >= 2,
        spike_points=spike_points,
    )


# ---------------------------------------------------------------- density


@dataclass(frozen=True)
class DensityApproximant:
    """Lipschitz bump function ``g`` close to a target ``f``.

    ``g = a_i`` on ``B(x_i, inner_i)``, ramps linearly to 0 across
    ``B(x_i, outer_i) \\ B(x_i, inner_i)`` and vanishes elsewhere.
    """

    centers: tuple[int, ...]
    outer_radii: tuple[float, ...]
    inner_radii: tuple[float, ...]
    levels: tuple[float, ...]
    function: LpFunction
    scale: float
    simple_error: float
    shrink_error: float
    distance: float
    lipschitz: float

    def to_dict(self) -> dict:
        return {
            "centers": list(self.centers),
            "outer_radii": list(self.outer_radii),
            "inner_radii": list(self.inner_radii),
            "levels": list(self.levels),
            "scale": self.scale,
            "simple_error": self.simple_error,
            "shrink_error": self.shrink_error,
            "distance": self.distance,
            "lipschitz": self.lipschitz,
            "support": point_list(support(self.function)),
            "values": self.function.values.tolist(),
        }


def _disjoint_cover(space: MetricMeasureSpace, scale: float) -> list[tuple[int, float, int]]:
    """Disjoint balls of radius ``scale`` (halved on overlap) covering every point.

    Returns ``(centre, radius, point count)`` triples.
    """
    floor = space.min_separation / 2 if math.isfinite(space.min_separation) else scale
    # distance from each point to the nearest already-covered point
    gap = np.full(space.n_points, np.inf)
    balls = []
    for x in range(space.n_points):
        if gap[x] == 0:
            continue
        r = scale
        while r > floor and gap[x] <= r:
            r = max(r / 2, floor)
        size = int(np.searchsorted(space.sorted_dist[x], r, side="right"))
        members = space.neighbor_order[x, :size]
        gap = np.minimum(gap, space.dist[members].min(axis=0))
        balls.append((x, r, size))
    return balls


def _ball_levels(f: LpFunction, prefix: np.ndarray, balls) -> list[float]:
    """Average of ``f`` over each ball, one table per distinct radius."""
    radii = sorted({r for _, r, _ in balls})
    table = dict(zip(radii, averages_from_prefix(f.space, f.values, prefix, radii)))
    return [float(table[r][x]) for x, r, _ in balls]


def bump_function(space: MetricMeasureSpace, centers, outer, inner, levels) -> np.ndarray:
    """Evaluate ``a_i`` / linear ramp / 0 on disjoint balls."""
    g = np.zeros(space.n_points)
    for x, r, delta, a in zip(centers, outer, inner, levels):
        d = space.dist[x]
        core = d <= delta
        ring = (d <= r) & ~core
        g[core] = a
        g[ring] = -a * (d[ring] - delta) / (r - delta) + a
    return g


def density_approximant(f: LpFunction, epsilon: float,
                        cfg: LpConfig | float = 2.0) -> DensityApproximant:
    """Bounded-support Lipschitz ``g`` with ``||g - f||_p <= eps``.

    The ball scale halves from the diameter until the ball-averaged simple
    function is within ``eps/3`` of ``f``; singleton balls reproduce ``f``
    exactly, so this always terminates.  Inner radii are chosen so inner and
    outer balls hold the same points, making the shrink error zero.
    """
    if not epsilon > 0:
        raise PreconditionError("epsilon must be > 0")
    p = as_config(cfg).p
    space = f.space
    scale = space.diameter if space.diameter > 0 else 1.0
    prefix = deviation_prefix(space, f.values)
    while True:
        balls = _disjoint_cover(space, scale)
        levels = _ball_levels(f, prefix, balls)
        simple = np.zeros(space.n_points)
        for (x, _, size), a in zip(balls, levels):
            simple[space.neighbor_order[x, :size]] = a
        simple_error = values_norm(space, simple - f.values, p)
        if simple_error <= epsilon / 3 or all(size == 1 for _, _, size in balls):
            break
        scale /= 2

    centers, outer, inner, kept = [], [], [], []
    for (x, r, size), a in zip(balls, levels):
        if a == 0:
            continue
        sd = space.sorted_dist[x]
        far = float(sd[size - 1])
        nxt = float(sd[size]) if size < space.n_points else math.inf
        if far < r:
            outer_r = r
        elif math.isfinite(nxt):
            outer_r = 0.5 * (far + nxt)
        else:
            outer_r = far + 1.0
        centers.append(x)
        outer.append(outer_r)
        inner.append(0.5 * (far + outer_r))
        kept.append(a)

    g = bump_function(space, centers, outer, inner, kept)
    shrunk_simple = np.zeros(space.n_points)
    full_simple = np.zeros(space.n_points)
    for x, r, delta, a in zip(centers, outer, inner, kept):
        shrunk_simple[space.dist[x] <= delta] = a
        full_simple[space.dist[x] <= r] = a
    shrink_error = values_norm(space, shrunk_simple - full_simple, p)
    gf = LpFunction(space, g)
    distance = lp_norm(gf - f, p)
    if distance > epsilon:
        raise RuntimeError(f"density approximant missed: {distance!r} > {epsilon!r}")
    return DensityApproximant(tuple(centers), tuple(outer), tuple(inner), tuple(kept), gf,
                              scale, simple_error, shrink_error, distance,
                              lipschitz_constant(gf))
