"""Adam local optimiser and learning-rate schedules."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, dim: int, **kwargs) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), **kwargs)

    def reset(self) -> "AdamState":
        return replace(self, m=np.zeros_like(self.m), v=np.zeros_like(self.v), t=0)


def adam_step(state: AdamState, x: np.ndarray, grad: np.ndarray, lr: float) -> tuple[AdamState, np.ndarray]:
    """Bias-corrected Adam update. Returns the new state and position."""
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.m.shape or np.shape(x) != state.m.shape:
        raise ValueError("position, gradient and moment shapes disagree")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient; Adam step rejected")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * (grad * grad)
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    x_new = x - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return AdamState(m, v, t, b1, b2, state.eps), x_new


@dataclass(frozen=True)
class LrSchedule:
    kind: str
    lr_start: float
    lr_end: float
    total_steps: int

    def __post_init__(self):
        if self.kind not in ("constant", "linear"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not (self.lr_start > 0 and self.lr_end > 0):
            raise ValueError("learning rates must be positive")
        if self.total_steps < 1:
            raise ValueError("total_steps must be positive")

    @classmethod
    def constant(cls, lr: float, total_steps: int) -> "LrSchedule":
        return cls("constant", lr, lr, total_steps)

    @classmethod
    def linear(cls, start: float, end: float, total_steps: int) -> "LrSchedule":
        return cls("linear", start, end, total_steps)

    @classmethod
    def parse(cls, text: str, total_steps: int) -> "LrSchedule":
        """``"0.01"`` for a constant rate, ``"linear:A:B"`` for A to B."""
        parts = text.split(":")
        if len(parts) == 1:
            return cls.constant(float(parts[0]), total_steps)
        if len(parts) == 3 and parts[0] == "linear":
            return cls.linear(float(parts[1]), float(parts[2]), total_steps)
        raise ValueError(f"cannot parse learning-rate schedule {text!r}")

    def label(self) -> str:
        if self.kind == "constant":
            return repr(self.lr_start)
        return f"linear:{self.lr_start!r}:{self.lr_end!r}"


def lr_at(schedule: LrSchedule, step: int) -> float:
    if not 0 <= step <= schedule.total_steps:
        raise ValueError(f"step {step} outside [0, {schedule.total_steps}]")
    if schedule.kind == "constant":
        return schedule.lr_start
    return schedule.lr_start + (schedule.lr_end - schedule.lr_start) * step / schedule.total_steps
