"""Lp functions on a finite metric measure space.

Every integral is a weighted sum over points, evaluated with ``math.fsum`` in
index order so results do not depend on thread count or BLAS build.  Because
all weights are positive, functions equal almost everywhere are equal
pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import NotShiftableError, PreconditionError
from .space import MetricMeasureSpace, as_mask


def same_space(a: MetricMeasureSpace, b: MetricMeasureSpace) -> bool:
    return a is b or a.hash == b.hash


@dataclass(frozen=True)
class LpConfig:
    """Exponent ``p`` in ``[1, inf)`` and its conjugate ``q``."""

    p: float = 2.0

    def __post_init__(self) -> None:
        p = float(self.p)
        if not (1.0 <= p < math.inf):
            raise PreconditionError(f"p must lie in [1, inf), got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def q(self) -> float:
        if self.p == 1.0:
            return math.inf
        return self.p / (self.p - 1.0)


def as_config(cfg: LpConfig | float | int) -> LpConfig:
    return cfg if isinstance(cfg, LpConfig) else LpConfig(float(cfg))


@dataclass(frozen=True, eq=False)
class LpFunction:
    """Real values on the points of ``space``."""

    space: MetricMeasureSpace
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.shape[0] != self.space.n_points:
            raise PreconditionError(
                f"function has {v.shape[0]} values, space has {self.space.n_points} points"
            )
        if not np.all(np.isfinite(v)):
            raise PreconditionError("function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LpFunction):
            return NotImplemented
        return same_space(self.space, other.space) and np.array_equal(self.values, other.values)

    __hash__ = None

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, LpFunction):
            if not same_space(other.space, self.space):
                raise PreconditionError("functions live on different spaces")
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other) -> LpFunction:
        return LpFunction(self.space, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> LpFunction:
        return LpFunction(self.space, self.values - self._coerce(other))

    def __rsub__(self, other) -> LpFunction:
        return LpFunction(self.space, self._coerce(other) - self.values)

    def __mul__(self, scalar: float) -> LpFunction:
        return LpFunction(self.space, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> LpFunction:
        return LpFunction(self.space, -self.values)

    @classmethod
    def zeros(cls, space: MetricMeasureSpace) -> LpFunction:
        return cls(space, np.zeros(space.n_points))

    @classmethod
    def constant(cls, space: MetricMeasureSpace, c: float) -> LpFunction:
        return cls(space, np.full(space.n_points, float(c)))


class FunctionFamily(Sequence[LpFunction]):
    """A finite ordered family of functions on one space."""

    def __init__(self, space: MetricMeasureSpace, members: Iterable):
        self.space = space
        items = []
        for m in members:
            if isinstance(m, LpFunction):
                if not same_space(m.space, space):
                    raise PreconditionError("family members must share one space")
                items.append(m)
            else:
                items.append(LpFunction(space, m))
        self._members = tuple(items)

    def __len__(self) -> int:
        return len(self._members)

    def __getitem__(self, i):
        return self._members[i]

    def __iter__(self) -> Iterator[LpFunction]:
        return iter(self._members)

    def __repr__(self) -> str:
        return f"FunctionFamily({self.space!r}, {len(self)} members)"

    @property
    def matrix(self) -> np.ndarray:
        """Values as a ``(members, N)`` array."""
        if not self._members:
            return np.zeros((0, self.space.n_points))
        return np.vstack([m.values for m in self._members])


def weighted_power_sum(values: np.ndarray, weight: np.ndarray, p: float) -> float:
    """``sum |v_i|^p w_i`` with exact rounding, in index order."""
    terms = np.abs(values) ** p * weight
    return math.fsum(terms.tolist())


def lp_norm(f: LpFunction, cfg: LpConfig | float = 2.0) -> float:
    p = as_config(cfg).p
    s = weighted_power_sum(f.values, f.space.weight, p)
    if p == 1.0:
        return s
    return s ** (1.0 / p)


def lp_distance(f: LpFunction, g: LpFunction, cfg: LpConfig | float = 2.0) -> float:
    return lp_norm(f - g, cfg)


def values_norm(space: MetricMeasureSpace, values: np.ndarray, cfg: LpConfig | float = 2.0) -> float:
    """Lp norm of a raw value vector on ``space``."""
    p = as_config(cfg).p
    s = weighted_power_sum(values, space.weight, p)
    return s if p == 1.0 else s ** (1.0 / p)


def mask(f: LpFunction, subset) -> LpFunction:
    """``f * chi_E``."""
    m = as_mask(f.space, subset)
    return LpFunction(f.space, np.where(m, f.values, 0.0))


def tail_norm(f: LpFunction, subset, cfg: LpConfig | float = 2.0) -> float:
    """``||f chi_{X \\ E}||_p``."""
    m = as_mask(f.space, subset)
    return lp_norm(mask(f, ~m), cfg)


def support(f: LpFunction, tol: float = 0.0) -> np.ndarray:
    if tol < 0:
        raise PreconditionError("support tolerance must be >= 0")
    return np.abs(f.values) > tol


def translate(f: LpFunction, steps: int) -> LpFunction:
    """``tau_a f(x) = f(x - a)`` with ``a = steps * h`` on a periodic grid."""
    if f.space.periodic_shift_step is None:
        raise NotShiftableError("translation needs a periodic grid (circle builder)")
    return LpFunction(f.space, np.roll(f.values, int(steps)))


def family_bound(family: FunctionFamily, cfg: LpConfig | float = 2.0) -> float:
    """``max_f ||f||_p`` over a non-empty family."""
    if len(family) == 0:
        raise PreconditionError("family is empty")
    return max(lp_norm(f, cfg) for f in family)
