"""Beta-annealed proposal distribution for single-coordinate global moves.

The current coordinate is min-max normalised into ``[0, 1]``. A Beta
distribution is then moment-matched to a mean and standard deviation that
interpolate between the uniform distribution (``phi = 0``) and a point mass
at the current unit position (``phi -> 1``). ``phi`` follows a rising
half-cosine schedule.

Sampling uses :meth:`numpy.random.Generator.beta`, which is exact: Johnk's
rejection algorithm when both shape parameters are at most one, and the
ratio ``G_a / (G_a + G_b)`` of two gamma variates otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MU_EPS = 1e-6
SIGMA_SLACK = 0.999
UNIFORM_SIGMA = 1.0 / math.sqrt(12.0)


@dataclass(frozen=True)
class ProposalDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        lower, upper = np.broadcast_arrays(lower, upper)
        if not np.all(lower < upper):
            raise ValueError("proposal domain needs a_i < b_i in every dimension")
        object.__setattr__(self, "lower", lower.copy())
        object.__setattr__(self, "upper", upper.copy())

    @classmethod
    def uniform(cls, dim: int, lo: float = -3.0, hi: float = 3.0) -> "ProposalDomain":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @classmethod
    def from_objective(cls, spec) -> "ProposalDomain":
        return cls(spec.lower, spec.upper)

    def bounds(self, dim: int) -> tuple[float, float]:
        # a scalar domain broadcasts to every coordinate
        i = dim if self.lower.size > 1 else 0
        return float(self.lower[i]), float(self.upper[i])


@dataclass(frozen=True)
class ConcentrationSchedule:
    total_steps: int
    phi_cap: float = 0.999

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be positive")
        if not 0.0 < self.phi_cap < 1.0:
            raise ValueError("phi_cap must lie in (0, 1)")


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float
    mu: float
    sigma: float

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self) -> float:
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))


def phi_at(schedule: ConcentrationSchedule, step: int) -> float:
    if not 0 <= step <= schedule.total_steps:
        raise ValueError(f"step {step} outside [0, {schedule.total_steps}]")
    phi = 0.5 * (1.0 - math.cos(math.pi * step / schedule.total_steps))
    return min(schedule.phi_cap, phi)


def to_unit(domain: ProposalDomain, x: float, dim: int) -> float:
    lo, hi = domain.bounds(dim)
    u = (x - lo) / (hi - lo)
    return min(1.0, max(0.0, u))


def from_unit(domain: ProposalDomain, u: float, dim: int) -> float:
    lo, hi = domain.bounds(dim)
    return lo + u * (hi - lo)


def beta_params(upsilon: float, phi: float) -> BetaParams:
    """Moment-matched Beta parameters for unit position ``upsilon``.

    The mean moves linearly from 0.5 to ``upsilon`` and the standard deviation
    shrinks linearly from ``1/sqrt(12)`` to zero as ``phi`` goes from 0 to 1.
    Both are clamped into the region where a Beta distribution exists; the
    returned ``mu`` and ``sigma`` are the post-clamp values.
    """
    if not 0.0 <= upsilon <= 1.0:
        raise ValueError(f"upsilon must lie in [0, 1], got {upsilon}")
    if not 0.0 <= phi < 1.0:
        raise ValueError(f"phi must lie in [0, 1), got {phi}")
    mu = phi * upsilon + (1.0 - phi) * 0.5
    sigma = (1.0 - phi) * UNIFORM_SIGMA
    mu = min(1.0 - MU_EPS, max(MU_EPS, mu))
    sigma = min(sigma, SIGMA_SLACK * math.sqrt(mu * (1.0 - mu)))
    c1 = mu / (1.0 - mu)
    c2 = sigma * sigma * (c1 + 1.0) ** 2
    beta = (c1 - c2) / (c2 * (c1 + 1.0))
    alpha = c1 * beta
    return BetaParams(alpha, beta, mu, sigma)


def sample_proposal(
    current: float,
    dim: int,
    domain: ProposalDomain,
    phi: float,
    rng: np.random.Generator,
) -> float:
    params = beta_params(to_unit(domain, current, dim), phi)
    u = rng.beta(params.alpha, params.beta)
    return from_unit(domain, u, dim)
