"""Doubly stochastic coordinate descent (DSCD) global step.

Each step picks one coordinate uniformly at random, redraws it from the
Beta-annealed proposal around the incumbent, and accepts the move only if
the new loss is strictly below the best loss seen in the last ``K``
evaluations.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .proposal import ProposalDomain, sample_proposal

DEFAULT_WINDOW = 1000


class LossWindow:
    """Last ``capacity`` losses with amortised O(1) minimum.

    A monotone deque holds ``(index, loss)`` pairs with strictly increasing
    losses, so the front is always the window minimum.
    """

    def __init__(self, capacity: int = DEFAULT_WINDOW):
        if capacity < 1:
            raise ValueError("window capacity must be positive")
        self.capacity = capacity
        self._count = 0
        self._entries: deque[float] = deque(maxlen=capacity)
        self._mono: deque[tuple[int, float]] = deque()

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, loss: float) -> None:
        idx = self._count
        self._count += 1
        self._entries.append(loss)
        mono = self._mono
        while mono and mono[-1][1] >= loss:
            mono.pop()
        mono.append((idx, loss))
        oldest = idx - self.capacity
        while mono[0][0] <= oldest:
            mono.popleft()

    @property
    def best(self) -> float:
        if not self._mono:
            raise ValueError("window is empty")
        return self._mono[0][1]

    def values(self) -> list[float]:
        return list(self._entries)


def window_best(window: LossWindow) -> float:
    return window.best


@dataclass
class StepRecord:
    dimension: int
    proposed: float
    loss: float
    accepted: bool
    threshold: float


@dataclass
class DscdState:
    """Incumbent and acceptance window for a DSCD run.

    ``y_best`` is the loss measured at ``x_best``. The acceptance threshold is
    ``window.best``; both coincide unless old losses have been evicted.
    """

    x_best: np.ndarray
    y_best: float
    window: LossWindow
    rng: np.random.Generator
    phi: float = 0.0
    steps: int = field(default=0)

    @classmethod
    def start(cls, x0, y0: float, rng: np.random.Generator, K: int = DEFAULT_WINDOW) -> "DscdState":
        window = LossWindow(K)
        if math.isfinite(y0):
            window.push(y0)
        return cls(np.array(x0, dtype=float), float(y0), window, rng)

    @property
    def threshold(self) -> float:
        return self.window.best if len(self.window) else math.inf


def dscd_step(state: DscdState, objective, domain: ProposalDomain) -> StepRecord:
    """One global step; mutates ``state`` and returns what happened."""
    x = state.x_best
    d = int(state.rng.integers(x.size))
    proposed = sample_proposal(float(x[d]), d, domain, state.phi, state.rng)
    x_new = x.copy()
    x_new[d] = proposed
    y = float(objective(x_new))
    threshold = state.threshold
    accepted = False
    if math.isfinite(y):
        accepted = y < threshold
        state.window.push(y)
        if accepted:
            state.x_best = x_new
            state.y_best = y
    state.steps += 1
    return StepRecord(d, proposed, y, accepted, threshold)
