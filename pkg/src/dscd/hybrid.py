"""Alternating local (Adam) and global (DSCD) optimisation.

The optimiser stays in one mode until it has taken at least ``T`` steps in
that mode *and* the latest step failed to lower the loss, then switches.
A global step moves the incumbent; the local trajectory then restarts from
the incumbent. A local step moves the trajectory and promotes it to
incumbent on strict improvement.

Every objective evaluation, including the initial one, counts against the
budget and produces exactly one trace row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .global_step import DEFAULT_WINDOW, DscdState, LossWindow, dscd_step
from .local import AdamState, LrSchedule, adam_step, lr_at
from .objective import ObjectiveSpec, evaluate, gradient, sample_uniform_position
from .proposal import ConcentrationSchedule, ProposalDomain, phi_at

LOCAL = "local"
GLOBAL = "global"
INIT = "init"
UNIFORM = "uniform"

DEFAULT_T = 50

TRACE_COLUMNS = (
    "eval_index",
    "mode",
    "dimension",
    "loss",
    "best_so_far",
    "window_best",
    "phi",
    "accepted",
    "lr",
)


class TraceRow(NamedTuple):
    eval_index: int
    mode: str
    dimension: int | None
    loss: float
    best_so_far: float
    window_best: float | None
    phi: float | None
    accepted: bool | None
    lr: float | None


@dataclass
class RunTrace:
    method: str = ""
    seed: int | None = None
    rows: list[TraceRow] = field(default_factory=list)
    _best: float = field(default=math.inf, repr=False)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[TraceRow]:
        return iter(self.rows)

    def record(self, mode, loss, *, dimension=None, window_best=None, phi=None, accepted=None, lr=None) -> TraceRow:
        if loss < self._best:
            self._best = loss
        row = TraceRow(len(self.rows), mode, dimension, loss, self._best, window_best, phi, accepted, lr)
        self.rows.append(row)
        return row

    def column(self, name: str) -> list:
        i = TRACE_COLUMNS.index(name)
        return [r[i] for r in self.rows]

    def best_so_far(self) -> np.ndarray:
        return np.array([r.best_so_far for r in self.rows])

    @property
    def final_best(self) -> float:
        return self.rows[-1].best_so_far


# -- alternation -------------------------------------------------------------

@dataclass
class AlternationState:
    mode: str = LOCAL
    consecutive: int = 0
    last_loss: float = math.inf
    improved_last: bool = False


def should_switch(state: AlternationState, T: float) -> bool:
    if not T >= 1:
        raise ValueError(f"T must be >= 1, got {T}")
    return state.consecutive >= T and not state.improved_last


def advance(state: AlternationState, loss: float, T: float) -> bool:
    """Register one step's loss; toggles the mode and returns True on a switch."""
    state.improved_last = loss < state.last_loss
    state.last_loss = loss
    state.consecutive += 1
    if should_switch(state, T):
        state.mode = GLOBAL if state.mode == LOCAL else LOCAL
        state.consecutive = 0
        return True
    return False


# -- hybrid optimiser --------------------------------------------------------

@dataclass
class HybridConfig:
    budget: int
    lr: LrSchedule | float | str = 0.01
    T: float = DEFAULT_T
    K: int = DEFAULT_WINDOW
    initial_mode: str = LOCAL
    phi_cap: float = 0.999
    phi_steps: int | None = None  # defaults to budget
    reset_moments_on_switch: bool = False
    domain: ProposalDomain | None = None

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least one evaluation")
        if self.initial_mode not in (LOCAL, GLOBAL):
            raise ValueError(f"initial_mode must be 'local' or 'global', got {self.initial_mode!r}")
        if not self.T >= 1:
            raise ValueError("T must be >= 1")
        if not isinstance(self.lr, LrSchedule):
            text = self.lr if isinstance(self.lr, str) else repr(float(self.lr))
            self.lr = LrSchedule.parse(text, self.budget)


class HybridOptimizer:
    """Stateful stepper; each :meth:`step` costs one objective evaluation.

    The objective and gradient are passed per step so a caller can optimise
    a moving target, e.g. a validation loss whose weights change between
    steps.
    """

    def __init__(self, x0, y0: float, config: HybridConfig, rng: np.random.Generator, domain: ProposalDomain):
        x0 = np.array(x0, dtype=float)
        self.config = config
        self.domain = domain
        self.dscd = DscdState.start(x0, y0, rng, config.K)
        self.adam = AdamState.zeros(x0.size)
        self.x_current = x0.copy()
        self.y_current = float(y0)
        self.alternation = AlternationState(mode=config.initial_mode, last_loss=float(y0))
        self.phi_schedule = ConcentrationSchedule(config.phi_steps or config.budget, config.phi_cap)
        self.local_steps = 0
        self.global_steps = 0

    @property
    def mode(self) -> str:
        return self.alternation.mode

    @property
    def window(self) -> LossWindow:
        return self.dscd.window

    @property
    def x_best(self) -> np.ndarray:
        return self.dscd.x_best

    @property
    def y_best(self) -> float:
        return self.dscd.y_best

    def step(self, f: Callable, grad: Callable, trace: RunTrace | None = None) -> tuple[str, float]:
        """Take one step in the current mode; returns ``(mode, evaluated loss)``."""
        mode = self.alternation.mode
        if mode == GLOBAL:
            step = min(self.global_steps, self.phi_schedule.total_steps)
            phi = phi_at(self.phi_schedule, step)
            self.dscd.phi = phi
            rec = dscd_step(self.dscd, f, self.domain)
            self.global_steps += 1
            self.x_current = self.dscd.x_best.copy()
            self.y_current = self.dscd.y_best
            loss = rec.loss
            if trace is not None:
                trace.record(GLOBAL, loss, dimension=rec.dimension, window_best=self._window_best(),
                             phi=phi, accepted=rec.accepted)
        else:
            lr = lr_at(self.config.lr, min(self.local_steps, self.config.lr.total_steps))
            self.adam, self.x_current = adam_step(self.adam, self.x_current, grad(self.x_current), lr)
            self.local_steps += 1
            loss = float(f(self.x_current))
            self.y_current = loss
            if math.isfinite(loss):
                self.window.push(loss)
            improved = loss < self.dscd.y_best
            if improved:
                self.dscd.x_best = self.x_current.copy()
                self.dscd.y_best = loss
            if trace is not None:
                trace.record(LOCAL, loss, window_best=self._window_best(), accepted=improved, lr=lr)

        if advance(self.alternation, self.y_current, self.config.T):
            if self.config.reset_moments_on_switch:
                self.adam = self.adam.reset()
        return mode, loss

    def _window_best(self) -> float | None:
        return self.window.best if len(self.window) else None


def _initial(spec: ObjectiveSpec, rng: np.random.Generator, x0) -> np.ndarray:
    if x0 is None:
        return sample_uniform_position(spec, rng)
    return np.array(x0, dtype=float)


def run_hybrid(spec: ObjectiveSpec, config: HybridConfig, rng: np.random.Generator, x0=None,
               method: str = "hybrid", seed: int | None = None) -> RunTrace:
    """Full hybrid run to exactly ``config.budget`` evaluations."""
    x0 = _initial(spec, rng, x0)
    y0 = evaluate(spec, x0)
    domain = config.domain or ProposalDomain.from_objective(spec)
    opt = HybridOptimizer(x0, y0, config, rng, domain)
    trace = RunTrace(method, seed)
    trace.record(INIT, y0, window_best=opt._window_best())
    f = spec.func
    g = spec.grad
    for _ in range(config.budget - 1):
        opt.step(f, g, trace)
    return trace


def run_adam(spec: ObjectiveSpec, budget: int, lr: LrSchedule | float | str, rng: np.random.Generator,
             x0=None, method: str = "adam", seed: int | None = None) -> RunTrace:
    """Adam alone, one evaluation per step."""
    if budget < 1:
        raise ValueError("budget must be at least one evaluation")
    if not isinstance(lr, LrSchedule):
        lr = LrSchedule.parse(lr if isinstance(lr, str) else repr(float(lr)), budget)
    x = _initial(spec, rng, x0)
    state = AdamState.zeros(spec.dim)
    trace = RunTrace(method, seed)
    y_best = evaluate(spec, x)
    trace.record(INIT, y_best)
    for k in range(budget - 1):
        rate = lr_at(lr, min(k, lr.total_steps))
        state, x = adam_step(state, x, gradient(spec, x), rate)
        y = float(spec.func(x))
        improved = y < y_best
        if improved:
            y_best = y
        trace.record(LOCAL, y, accepted=improved, lr=rate)
    return trace


def run_dscd(spec: ObjectiveSpec, budget: int, rng: np.random.Generator, K: int = DEFAULT_WINDOW,
             domain: ProposalDomain | None = None, phi_cap: float = 0.999, x0=None,
             method: str = "dscd", seed: int | None = None) -> RunTrace:
    """DSCD alone with phi annealed over the full budget."""
    if budget < 1:
        raise ValueError("budget must be at least one evaluation")
    x = _initial(spec, rng, x0)
    y = evaluate(spec, x)
    domain = domain or ProposalDomain.from_objective(spec)
    state = DscdState.start(x, y, rng, K)
    schedule = ConcentrationSchedule(budget, phi_cap)
    trace = RunTrace(method, seed)
    trace.record(INIT, y, window_best=state.window.best)
    for k in range(budget - 1):
        state.phi = phi_at(schedule, k)
        rec = dscd_step(state, spec.func, domain)
        trace.record(GLOBAL, rec.loss, dimension=rec.dimension, window_best=state.window.best,
                     phi=state.phi, accepted=rec.accepted)
    return trace


def run_baseline_uniform(spec: ObjectiveSpec, budget: int, rng: np.random.Generator,
                         method: str = "uniform", seed: int | None = None) -> RunTrace:
    """Independent uniform samples over the box; the trace keeps the running best."""
    if budget < 1:
        raise ValueError("budget must be at least one evaluation")
    trace = RunTrace(method, seed)
    best = math.inf
    for _ in range(budget):
        y = evaluate(spec, sample_uniform_position(spec, rng))
        improved = y < best
        if improved:
            best = y
        trace.record(UNIFORM, y, accepted=improved)
    return trace
