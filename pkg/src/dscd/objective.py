"""Objective functions over a box domain.

Two multimodal benchmarks ship with analytic gradients:

* Styblinski-Tang, ``f(x) = 0.5 * sum(x**4 - 16 x**2 + 5 x)`` on ``[-5, 5]^d``.
  Global minimum at ``x_i = -2.903534`` with value ``-39.16617 d``.
* Schwefel, ``f(x) = 418.9829 d - sum(x sin(sqrt|x|))`` on ``[-500, 500]^d``.
  Global minimum at ``x_i = 420.9687`` with value ``~0``.

User objectives plug in by constructing :class:`ObjectiveSpec` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "DimensionError",
    "ObjectiveSpec",
    "evaluate",
    "gradient",
    "finite_diff_gradient",
    "sample_uniform_position",
    "styblinski_tang",
    "schwefel",
    "get_objective",
    "OBJECTIVES",
]

ArrayFn = Callable[[np.ndarray], float]
GradFn = Callable[[np.ndarray], np.ndarray]


class DimensionError(ValueError):
    """Position length does not match the objective's dimension."""


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    func: ArrayFn = field(repr=False)
    grad: GradFn | None = field(default=None, repr=False)
    eval_count_budget: int = 20_000

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dim,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dim,)).copy()
        if not np.all(lower < upper):
            raise ValueError("every dimension needs lo < hi")
        if self.eval_count_budget < 1:
            raise ValueError("eval_count_budget must be positive")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __call__(self, x) -> float:
        return evaluate(self, x)


def _check(spec: ObjectiveSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise DimensionError(f"{spec.name}: expected shape ({spec.dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{spec.name}: position contains non-finite values")
    return x


def evaluate(spec: ObjectiveSpec, x) -> float:
    """Objective value at ``x``. Positions outside the box are allowed."""
    return float(spec.func(_check(spec, x)))


def gradient(spec: ObjectiveSpec, x) -> np.ndarray:
    x = _check(spec, x)
    if spec.grad is None:
        raise NotImplementedError(f"{spec.name} has no analytic gradient")
    return np.asarray(spec.grad(x), dtype=float)


def finite_diff_gradient(spec: ObjectiveSpec, x, h: float = 1e-6) -> np.ndarray:
    """Central differences ``(f(x + h e_i) - f(x - h e_i)) / 2h``."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    x = _check(spec, x)
    out = np.empty(spec.dim)
    for i in range(spec.dim):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (spec.func(xp) - spec.func(xm)) / (2.0 * h)
    return out


def sample_uniform_position(spec: ObjectiveSpec, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(spec.lower, spec.upper)


# -- Styblinski-Tang ---------------------------------------------------------

def _st_value(x: np.ndarray) -> float:
    x2 = x * x
    return 0.5 * float((x2 * x2 - 16.0 * x2 + 5.0 * x).sum())


def _st_grad(x: np.ndarray) -> np.ndarray:
    return (4.0 * x**3 - 32.0 * x + 5.0) / 2.0


def styblinski_tang(dim: int = 10, budget: int = 20_000) -> ObjectiveSpec:
    return ObjectiveSpec("styblinski-tang", dim, -5.0, 5.0, _st_value, _st_grad, budget)


# -- Schwefel ----------------------------------------------------------------

SCHWEFEL_OFFSET = 418.9829


def _schwefel_value(x: np.ndarray) -> float:
    return SCHWEFEL_OFFSET * x.size - float((x * np.sin(np.sqrt(np.abs(x)))).sum())


def _schwefel_grad(x: np.ndarray) -> np.ndarray:
    a = np.abs(x)
    r = np.sqrt(a)
    g = np.zeros_like(x)
    nz = a > 0
    # d/dx [x sin(sqrt|x|)] = sin(r) + x cos(r) sign(x) / (2 r); limit is 0 at x = 0
    g[nz] = -np.sin(r[nz]) - x[nz] * np.cos(r[nz]) * np.sign(x[nz]) / (2.0 * r[nz])
    return g


def schwefel(dim: int = 10, budget: int = 20_000) -> ObjectiveSpec:
    return ObjectiveSpec("schwefel", dim, -500.0, 500.0, _schwefel_value, _schwefel_grad, budget)


OBJECTIVES: dict[str, Callable[..., ObjectiveSpec]] = {
    "styblinski-tang": styblinski_tang,
    "schwefel": schwefel,
}


def get_objective(name: str, dim: int = 10, budget: int = 20_000) -> ObjectiveSpec:
    try:
        factory = OBJECTIVES[name]
    except KeyError:
        raise ValueError(f"unknown objective {name!r}; choose from {sorted(OBJECTIVES)}") from None
    return factory(dim, budget)
