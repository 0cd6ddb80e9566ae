"""Seeded generators for test and experiment families.

Random generators use ``numpy.random.default_rng(seed)``; golden families
produced by them are stored under ``tests/fixtures`` so the seed-to-family
mapping is pinned independently of the generator.
"""

from __future__ import annotations

import numpy as np

from .errors import PreconditionError
from .lipschitz import PartialFunction, lipschitz_constant, mcshane_extend
from .lp import FunctionFamily, LpConfig, LpFunction, as_config, lp_norm
from .space import MetricMeasureSpace


def _line_coords(space: MetricMeasureSpace, what: str) -> np.ndarray:
    if space.coords is None or space.coords.shape[1] != 1:
        raise PreconditionError(f"{what} needs a one-dimensional grid space")
    return space.coords[:, 0]


def oscillation(space: MetricMeasureSpace, k_max: int) -> FunctionFamily:
    """``sin(2 pi k x)`` for ``k = 1..k_max`` on a circle grid."""
    if space.periodic_shift_step is None:
        raise PreconditionError("oscillation family needs a circle grid")
    x = _line_coords(space, "oscillation family")
    return FunctionFamily(space, [np.sin(2 * np.pi * k * x) for k in range(1, int(k_max) + 1)])


def translate_bumps(space: MetricMeasureSpace, count: int, spacing: float,
                    width: float = 1.0) -> FunctionFamily:
    """Unit tents ``max(0, 1 - |x - j*spacing| / width)``, ``j = 0..count-1``."""
    if width <= 0:
        raise PreconditionError("bump width must be > 0")
    x = _line_coords(space, "translate_bumps family")
    return FunctionFamily(space, [np.maximum(0.0, 1.0 - np.abs(x - j * spacing) / width)
                                  for j in range(int(count))])


def random_lipschitz(space: MetricMeasureSpace, L: float, rng: np.random.Generator,
                     anchors: int = 8) -> LpFunction:
    """Random function with Lipschitz constant exactly ``L`` (McShane of random anchors)."""
    k = min(anchors, space.n_points)
    dom = np.sort(rng.choice(space.n_points, size=k, replace=False))
    vals = rng.uniform(-1.0, 1.0, size=k)
    if k == 1:
        return LpFunction.constant(space, vals[0])
    d = space.dist[np.ix_(dom, dom)]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(d > 0, np.abs(vals[:, None] - vals[None, :]) / d, 0.0)
    lq = float(q.max())
    if lq == 0:
        return LpFunction.constant(space, vals[0])
    f = mcshane_extend(PartialFunction(space, dom, vals, lq))
    return f * (L / lq)


def random_Ln_member(space: MetricMeasureSpace, n: float, rng: np.random.Generator,
                     x0: int = 0, cfg: LpConfig | float = 2.0, anchors: int = 8,
                     m_range: tuple[float, float] = (0.3, 0.9)) -> LpFunction:
    """Random member of ``L(n)`` with ``max(lip, ||.||_p) = m`` for ``m/n`` drawn from ``m_range``.

    Points outside ``B(x0, n)`` are pinned to 0 before extension, so the
    support condition holds exactly.
    """
    p = as_config(cfg).p
    outside = np.flatnonzero(space.dist[x0] > n)
    inside = np.flatnonzero(space.dist[x0] <= n)
    k = min(anchors, inside.size)
    dom_in = np.sort(rng.choice(inside, size=k, replace=False))
    vals_in = rng.uniform(-1.0, 1.0, size=k)
    dom = np.concatenate([dom_in, outside])
    vals = np.concatenate([vals_in, np.zeros(outside.size)])
    d = space.dist[np.ix_(dom, dom)]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(d > 0, np.abs(vals[:, None] - vals[None, :]) / d, 0.0)
    lq = float(q.max()) if dom.size > 1 else 1.0
    f = mcshane_extend(PartialFunction(space, dom, vals, max(lq, 1e-300)))
    m = n * rng.uniform(*m_range)
    size = max(lipschitz_constant(f), lp_norm(f, p))
    if size == 0:
        return f
    return f * (m / size)


def random_Ln(space: MetricMeasureSpace, count: int, n: float, seed: int, x0: int = 0,
              cfg: LpConfig | float = 2.0) -> FunctionFamily:
    rng = np.random.default_rng(seed)
    return FunctionFamily(space, [random_Ln_member(space, n, rng, x0, cfg)
                                  for _ in range(int(count))])


def random_values(space: MetricMeasureSpace, count: int, seed: int) -> FunctionFamily:
    """I.i.d. standard normal values (no regularity)."""
    rng = np.random.default_rng(seed)
    return FunctionFamily(space, rng.standard_normal((int(count), space.n_points)))


def generate_family(space: MetricMeasureSpace, spec: dict,
                    cfg: LpConfig | float = 2.0) -> FunctionFamily:
    """Dispatch on ``spec["generator"]``; explicit files are handled by the caller."""
    gen = spec.get("generator")
    try:
        if gen == "oscillation":
            return oscillation(space, int(spec["k_max"]))
        if gen == "translate_bumps":
            return translate_bumps(space, int(spec["count"]), float(spec["spacing"]),
                                   float(spec.get("width", 1.0)))
        if gen == "zero":
            return FunctionFamily(space, [np.zeros(space.n_points)])
        if gen in ("random_Ln", "random_values"):
            if "seed" not in spec:
                raise PreconditionError(f"generator {gen} requires a seed")
            if gen == "random_Ln":
                return random_Ln(space, int(spec["count"]), float(spec["n"]), int(spec["seed"]),
                                 int(spec.get("x0", 0)), cfg)
            return random_values(space, int(spec["count"]), int(spec["seed"]))
    except KeyError as exc:
        raise PreconditionError(f"generator {gen} is missing parameter {exc.args[0]!r}") from None
    raise PreconditionError(f"unknown family generator {gen!r}")
