"""Toy differentiable architecture search.

A cell is a small DAG: two input nodes, ``nodes - 2`` intermediate nodes,
and an output equal to the sum of the intermediates. Every edge ``(i, j)``
mixes a set of candidate operations, gated either by independent sigmoids
or by a softmax over the edge's operations. The network stacks a "normal"
cell and a "reduction" cell::

    h   = normal(x_a, x_b)
    out = reduction(x_b, h)

Both cells share one graph; their architecture weights ``alpha`` and
operation weights ``w`` are disjoint blocks of the flat parameter vectors.
Targets come from a hidden ground-truth network, so a good architecture
exists. Losses are mean squared errors over the train and validation
splits, and all gradients are exact (hand-written reverse pass).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

import numpy as np

from .hybrid import GLOBAL, INIT, LOCAL, HybridConfig, HybridOptimizer, RunTrace
from .local import AdamState, adam_step
from .proposal import ProposalDomain

OPERATIONS = ("linear", "skip", "zero")
GROUPS = ("normal", "reduction")
DEFAULT_THRESHOLD = 0.85


def sigmoid(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def softmax(a):
    a = np.asarray(a, dtype=float)
    e = np.exp(a - np.max(a, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def _mix(weights: np.ndarray, op_outputs) -> np.ndarray:
    outs = [np.asarray(o, dtype=float) for o in op_outputs]
    if len(outs) != weights.size:
        raise ValueError(f"{weights.size} weights for {len(outs)} operation outputs")
    return sum(wt * o for wt, o in zip(weights, outs))


def mixed_edge_sigmoid(alpha_edge, op_outputs) -> np.ndarray:
    """Sum of operation outputs, each gated by its own sigmoid."""
    return _mix(sigmoid(np.ravel(alpha_edge)), op_outputs)


def mixed_edge_softmax(alpha_edge, op_outputs) -> np.ndarray:
    """Convex combination of operation outputs with softmax weights."""
    return _mix(softmax(np.ravel(alpha_edge)), op_outputs)


# -- structure ---------------------------------------------------------------

@dataclass(frozen=True)
class CellStructure:
    nodes: int = 4
    ops: tuple[str, ...] = ("linear", "skip")
    feature_dim: int = 2
    mixing: str = "sigmoid"
    groups: tuple[str, ...] = GROUPS
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.nodes < 3:
            raise ValueError("a cell needs two inputs and at least one intermediate node")
        unknown = set(self.ops) - set(OPERATIONS)
        if unknown or not self.ops:
            raise ValueError(f"operations must be a non-empty subset of {OPERATIONS}")
        if self.mixing not in ("sigmoid", "softmax"):
            raise ValueError("mixing must be 'sigmoid' or 'softmax'")
        if len(self.groups) != 2:
            raise ValueError("the network stacks exactly two cell groups")
        edges = self.edges or tuple((i, j) for j in range(2, self.nodes) for i in range(j))
        # forward and reverse passes rely on edges sorted by target node
        object.__setattr__(self, "edges", tuple(sorted(map(tuple, edges), key=lambda e: (e[1], e[0]))))
        for i, j in self.edges:
            if not 0 <= i < j < self.nodes or j < 2:
                raise ValueError(f"bad edge {(i, j)}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_ops(self) -> int:
        return len(self.ops)

    @property
    def alpha_size(self) -> int:
        return len(self.groups) * self.n_edges * self.n_ops

    @property
    def w_size(self) -> int:
        if "linear" not in self.ops:
            return 0
        return len(self.groups) * self.n_edges * self.feature_dim**2

    def alpha_blocks(self, alpha) -> np.ndarray:
        return np.asarray(alpha, dtype=float).reshape(len(self.groups), self.n_edges, self.n_ops)

    def w_blocks(self, w) -> np.ndarray:
        p = self.feature_dim
        return np.asarray(w, dtype=float).reshape(len(self.groups), self.n_edges, p, p)

    def grouping(self) -> dict[str, np.ndarray]:
        """Flat alpha indices belonging to each group."""
        per = self.n_edges * self.n_ops
        return {g: np.arange(k * per, (k + 1) * per) for k, g in enumerate(self.groups)}


@dataclass(frozen=True)
class ToyCell:
    structure: CellStructure
    alpha: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).ravel()
        w = np.array(self.w, dtype=float).ravel()
        if alpha.size != self.structure.alpha_size or w.size != self.structure.w_size:
            raise ValueError("alpha/w sizes do not match the cell structure")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "w", w)

    @classmethod
    def init(cls, structure: CellStructure, rng: np.random.Generator, alpha_scale: float = 1e-3,
             w_scale: float = 0.5) -> "ToyCell":
        alpha = alpha_scale * rng.standard_normal(structure.alpha_size)
        w = w_scale * rng.standard_normal(structure.w_size)
        return cls(structure, alpha, w)


# -- forward / backward ------------------------------------------------------

def _gates(structure: CellStructure, alpha_g: np.ndarray) -> np.ndarray:
    return sigmoid(alpha_g) if structure.mixing == "sigmoid" else softmax(alpha_g)


def _op_output(op: str, x: np.ndarray, W: np.ndarray | None) -> np.ndarray:
    if op == "linear":
        return x @ W.T
    if op == "skip":
        return x
    return np.zeros_like(x)


def cell_forward(structure: CellStructure, alpha_g, W_g, s0, s1) -> tuple[np.ndarray, list[np.ndarray]]:
    """Run one cell. Returns the output and the list of node values."""
    gates = _gates(structure, alpha_g)
    xs = [np.asarray(s0, dtype=float), np.asarray(s1, dtype=float)]
    xs += [np.zeros_like(xs[0]) for _ in range(structure.nodes - 2)]
    for e, (i, j) in enumerate(structure.edges):
        W = W_g[e] if W_g is not None else None
        xs[j] = xs[j] + _mix(gates[e], [_op_output(op, xs[i], W) for op in structure.ops])
    return sum(xs[2:]), xs


def _cell_backward(structure: CellStructure, alpha_g, W_g, xs, d_out):
    gates = _gates(structure, alpha_g)
    dxs = [np.zeros_like(xs[0]) for _ in xs]
    for j in range(2, structure.nodes):
        dxs[j] = dxs[j] + d_out
    d_gate = np.zeros_like(gates)
    dW = np.zeros_like(W_g) if W_g is not None else None
    for e in reversed(range(structure.n_edges)):
        i, j = structure.edges[e]
        g = dxs[j]
        for k, op in enumerate(structure.ops):
            if op == "zero":
                continue
            W = W_g[e] if W_g is not None else None
            d_gate[e, k] = np.sum(g * _op_output(op, xs[i], W))
            if op == "linear":
                dxs[i] = dxs[i] + gates[e, k] * (g @ W)
                dW[e] += gates[e, k] * (g.T @ xs[i])
            else:
                dxs[i] = dxs[i] + gates[e, k] * g
    if structure.mixing == "sigmoid":
        d_alpha = d_gate * gates * (1.0 - gates)
    else:
        d_alpha = gates * (d_gate - np.sum(gates * d_gate, axis=-1, keepdims=True))
    return dxs[0], dxs[1], d_alpha, dW


class Split(NamedTuple):
    xa: np.ndarray
    xb: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class SplitData:
    train: Split
    val: Split
    true_alpha: np.ndarray = field(repr=False)
    true_w: np.ndarray = field(repr=False)


def network_forward(structure: CellStructure, alpha, w, xa, xb) -> np.ndarray:
    A = structure.alpha_blocks(alpha)
    Wb = structure.w_blocks(w) if structure.w_size else [None, None]
    h, _ = cell_forward(structure, A[0], Wb[0], xa, xb)
    out, _ = cell_forward(structure, A[1], Wb[1], xb, h)
    return out


def loss_and_grads(structure: CellStructure, alpha, w, split: Split) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean squared error with exact gradients w.r.t. ``alpha`` and ``w``."""
    A = structure.alpha_blocks(alpha)
    Wb = structure.w_blocks(w) if structure.w_size else [None, None]
    h, xs_n = cell_forward(structure, A[0], Wb[0], split.xa, split.xb)
    out, xs_r = cell_forward(structure, A[1], Wb[1], split.xb, h)
    resid = out - split.y
    loss = float(np.mean(resid * resid))
    d_out = 2.0 * resid / resid.size
    _, d_h, da_r, dW_r = _cell_backward(structure, A[1], Wb[1], xs_r, d_out)
    _, _, da_n, dW_n = _cell_backward(structure, A[0], Wb[0], xs_n, d_h)
    g_alpha = np.concatenate([da_n.ravel(), da_r.ravel()])
    if structure.w_size:
        g_w = np.concatenate([dW_n.ravel(), dW_r.ravel()])
    else:
        g_w = np.zeros(0)
    return loss, g_alpha, g_w


def loss(structure: CellStructure, alpha, w, split: Split) -> float:
    resid = network_forward(structure, alpha, w, split.xa, split.xb) - split.y
    return float(np.mean(resid * resid))


def make_split_data(structure: CellStructure, seed: int = 0, n_train: int = 64, n_val: int = 64,
                    noise: float = 0.01) -> SplitData:
    """Synthetic regression data from a hidden ground-truth network.

    The ground truth keeps the linear op on every edge into the first
    intermediate node of each cell and switches everything else off.
    """
    rng = np.random.default_rng(seed)
    A = np.full((len(structure.groups), structure.n_edges, structure.n_ops), -6.0)
    for e, (_, j) in enumerate(structure.edges):
        if j == 2:
            k = structure.ops.index("linear") if "linear" in structure.ops else 0
            A[:, e, k] = 6.0
    true_alpha = A.ravel()
    true_w = rng.standard_normal(structure.w_size)
    p = structure.feature_dim

    def draw(n):
        xa = rng.standard_normal((n, p))
        xb = rng.standard_normal((n, p))
        y = network_forward(structure, true_alpha, true_w, xa, xb) + noise * rng.standard_normal((n, p))
        return Split(xa, xb, y)

    return SplitData(draw(n_train), draw(n_val), true_alpha, true_w)


# -- bilevel steps -----------------------------------------------------------

def _finite_or_raise(name: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"non-finite {name}: {np.asarray(value)!r}")


def architecture_gradient(structure: CellStructure, alpha, w, data: SplitData, xi: float = 0.0,
                          h: float = 1e-5) -> np.ndarray:
    """Gradient of ``L_val(alpha, w - xi * grad_w L_train(alpha, w))`` in alpha.

    ``xi = 0`` uses the exact reverse pass. For ``xi > 0`` the composed map is
    differentiated by central differences over alpha.
    """
    if xi < 0:
        raise ValueError("xi must be non-negative")
    alpha = np.asarray(alpha, dtype=float)
    if xi == 0:
        return loss_and_grads(structure, alpha, w, data.val)[1]

    def composed(a):
        _, _, gw = loss_and_grads(structure, a, w, data.train)
        return loss(structure, a, np.asarray(w) - xi * gw, data.val)

    g = np.empty_like(alpha)
    for k in range(alpha.size):
        ap = alpha.copy()
        am = alpha.copy()
        ap[k] += h
        am[k] -= h
        g[k] = (composed(ap) - composed(am)) / (2.0 * h)
    return g


def darts_alternating_step(cell: ToyCell, data: SplitData, lr_alpha: float, lr_w: float,
                           xi: float = 0.0) -> ToyCell:
    """Gradient step on alpha (validation loss), then on w (training loss at the new alpha)."""
    s = cell.structure
    g_alpha = architecture_gradient(s, cell.alpha, cell.w, data, xi)
    _finite_or_raise("architecture gradient", g_alpha)
    alpha = cell.alpha - lr_alpha * g_alpha
    _finite_or_raise("alpha", alpha)
    _, _, g_w = loss_and_grads(s, alpha, cell.w, data.train)
    _finite_or_raise("weight gradient", g_w)
    w = cell.w - lr_w * g_w
    _finite_or_raise("w", w)
    return replace(cell, alpha=alpha, w=w)


# -- discretisation ----------------------------------------------------------

def discretize(alpha, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Keep an operation iff its sigmoid weight is strictly above ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return sigmoid(alpha) > threshold


class Validity(NamedTuple):
    valid: bool
    reason: str | None = None


def validity_check(mask, structure: CellStructure) -> Validity:
    """A group is invalid when no kept, non-zero operation path links an input to the output."""
    mask = np.asarray(mask, dtype=bool).reshape(len(structure.groups), structure.n_edges, structure.n_ops)
    carries = np.array([op != "zero" for op in structure.ops])
    for g, name in enumerate(structure.groups):
        active = (mask[g] & carries).any(axis=1)
        reached = {0, 1}
        for e, (i, j) in enumerate(structure.edges):
            if active[e] and i in reached:
                reached.add(j)
        if not any(j in reached for j in range(2, structure.nodes)):
            return Validity(False, name)
    return Validity(True)


def mean_group_weights(alpha, grouping: dict[str, Iterable[int]]) -> dict[str, float]:
    s = sigmoid(alpha)
    return {name: float(np.mean(s[np.asarray(list(idx))])) for name, idx in grouping.items()}


# -- search driver -----------------------------------------------------------

@dataclass(frozen=True)
class SearchConfig:
    seed: int = 0
    steps: int = 2000
    optimizer: str = "dscd"
    nodes: int = 4
    ops: tuple[str, ...] = ("linear", "skip")
    feature_dim: int = 2
    mixing: str = "sigmoid"
    n_train: int = 64
    n_val: int = 64
    noise: float = 0.01
    lr_alpha: float = 0.1
    lr_w: float = 0.01
    xi: float = 0.0
    T: float = 50
    K: int = 1000
    domain: tuple[float, float] = (-3.0, 3.0)
    threshold: float = DEFAULT_THRESHOLD
    checkpoint_every: int = 100

    def __post_init__(self):
        if self.optimizer not in ("adam", "dscd"):
            raise ValueError("optimizer must be 'adam' or 'dscd'")
        if self.steps < 1 or self.checkpoint_every < 1:
            raise ValueError("steps and checkpoint_every must be positive")
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))

    @classmethod
    def from_dict(cls, raw: dict) -> "SearchConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        raw = dict(raw)
        if raw.get("T") in ("inf", None):
            raw["T"] = math.inf
        return cls(**raw)

    @classmethod
    def load(cls, path) -> "SearchConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def structure(self) -> CellStructure:
        return CellStructure(self.nodes, self.ops, self.feature_dim, self.mixing)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["ops"] = list(self.ops)
        out["domain"] = list(self.domain)
        out["T"] = "inf" if math.isinf(self.T) else self.T
        return out


@dataclass
class SearchResult:
    cell: ToyCell
    trace: RunTrace
    checkpoints: list[dict]


def run_search(config: SearchConfig) -> SearchResult:
    """Search alpha with Adam or the hybrid scheme while Adam trains w.

    Each iteration takes one alpha step on the validation loss (local or
    global), then one Adam step on w against the training loss at the new
    alpha. ``optimizer="adam"`` pins the alternation to local mode.
    """
    structure = config.structure()
    data = make_split_data(structure, config.seed, config.n_train, config.n_val, config.noise)
    rng = np.random.default_rng(config.seed + 1)
    cell = ToyCell.init(structure, rng)
    w = cell.w
    T = config.T if config.optimizer == "dscd" else math.inf
    hcfg = HybridConfig(budget=config.steps + 1, lr=config.lr_alpha, T=T, K=config.K)
    domain = ProposalDomain.uniform(structure.alpha_size, *config.domain)
    y0 = loss(structure, cell.alpha, w, data.val)
    opt = HybridOptimizer(cell.alpha, y0, hcfg, rng, domain)
    w_state = AdamState.zeros(w.size)
    grouping = structure.grouping()

    trace = RunTrace(f"bilevel-{config.optimizer}", config.seed)
    trace.record(INIT, y0, window_best=y0)
    checkpoints = []

    def checkpoint(step: int, alpha: np.ndarray) -> None:
        means = mean_group_weights(alpha, grouping)
        _finite_or_raise("group means", list(means.values()))
        ok = validity_check(discretize(alpha, config.threshold), structure)
        checkpoints.append({"step": step, "group_means": means, "valid_after_discretization": ok.valid})

    checkpoint(0, opt.x_current)
    for t in range(1, config.steps + 1):
        w_now = w

        def f(a):
            return loss(structure, a, w_now, data.val)

        def g(a):
            return architecture_gradient(structure, a, w_now, data, config.xi)

        opt.step(f, g, trace)
        alpha = opt.x_current
        _, _, g_w = loss_and_grads(structure, alpha, w, data.train)
        _finite_or_raise("weight gradient", g_w)
        if g_w.size:
            w_state, w = adam_step(w_state, w, g_w, config.lr_w)
        if t % config.checkpoint_every == 0 or t == config.steps:
            checkpoint(t, alpha)
    return SearchResult(ToyCell(structure, opt.x_current, w), trace, checkpoints)


__all__ = [
    "OPERATIONS", "GROUPS", "LOCAL", "GLOBAL",
    "sigmoid", "softmax", "mixed_edge_sigmoid", "mixed_edge_softmax",
    "CellStructure", "ToyCell", "Split", "SplitData", "make_split_data",
    "cell_forward", "network_forward", "loss", "loss_and_grads",
    "architecture_gradient", "darts_alternating_step",
    "discretize", "Validity", "validity_check", "mean_group_weights",
    "SearchConfig", "SearchResult", "run_search",
]
