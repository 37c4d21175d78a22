"""Replicated benchmark runs, median aggregation, and file output.

Every method runs once per replicate seed ``base_seed + r``. The initial
position is the first draw from that seed's generator, so all methods share
the same starting points and results are paired by replicate.

Aggregation works on each run's best-so-far curve. At every point of a
shared evaluation grid it reports the sample median and a percentile
bootstrap confidence interval of the median.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

from .global_step import DEFAULT_WINDOW
from .hybrid import (DEFAULT_T, GLOBAL, LOCAL, TRACE_COLUMNS, HybridConfig, RunTrace, run_adam,
                     run_baseline_uniform, run_dscd, run_hybrid)
from .local import LrSchedule
from .objective import OBJECTIVES, get_objective

AGGREGATE_COLUMNS = ("method", "eval_index", "median", "ci_lo", "ci_hi")
OPTIMIZERS = ("adam", "dscd", "uniform")
BOOTSTRAP_RESAMPLES = 10_000
MAX_GRID_POINTS = 200


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class MethodSpec:
    optimizer: str
    lr: float | str | None = None
    with_dscd: bool = False
    name: str | None = None

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}; choose from {OPTIMIZERS}")
        if self.optimizer == "adam":
            if self.lr is None:
                raise ValueError("adam needs a learning rate or schedule")
            LrSchedule.parse(self._lr_text(), 1)
        elif self.with_dscd:
            raise ValueError("with_dscd only applies to adam")

    def _lr_text(self) -> str:
        return self.lr if isinstance(self.lr, str) else repr(float(self.lr))

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.optimizer != "adam":
            return self.optimizer
        text = self._lr_text()
        base = "adam-schedule" if text.startswith("linear") else f"adam-{text}"
        return base + ("+dscd" if self.with_dscd else "")

    @classmethod
    def from_dict(cls, raw: dict) -> "MethodSpec":
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown method keys: {sorted(unknown)}")
        return cls(**raw)

    def run(self, objective, budget: int, seed: int, K: int, T: float) -> RunTrace:
        rng = np.random.default_rng(seed)
        if self.optimizer == "uniform":
            return run_baseline_uniform(objective, budget, rng, method=self.label, seed=seed)
        if self.optimizer == "dscd":
            return run_dscd(objective, budget, rng, K=K, method=self.label, seed=seed)
        if self.with_dscd:
            cfg = HybridConfig(budget, lr=self._lr_text(), T=T, K=K)
            return run_hybrid(objective, cfg, rng, method=self.label, seed=seed)
        return run_adam(objective, budget, self._lr_text(), rng, method=self.label, seed=seed)


@dataclass(frozen=True)
class BenchConfig:
    objective: str
    methods: tuple[MethodSpec, ...]
    dim: int = 10
    replicates: int = 20
    budget: int = 20_000
    base_seed: int = 0
    K: int = DEFAULT_WINDOW
    T: float = DEFAULT_T
    output_dir: str | None = None
    grid_stride: int | None = None
    confidence: float = 0.95
    bootstrap_resamples: int = BOOTSTRAP_RESAMPLES

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}; choose from {sorted(OBJECTIVES)}")
        methods = tuple(m if isinstance(m, MethodSpec) else MethodSpec.from_dict(m) for m in self.methods)
        if not methods:
            raise ValueError("at least one method is required")
        labels = [m.label for m in methods]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate method labels: {labels}")
        object.__setattr__(self, "methods", methods)
        if self.replicates < 1 or self.budget < 1 or self.dim < 1:
            raise ValueError("replicates, budget and dim must be positive")
        if not self.T >= 1 or self.K < 1:
            raise ValueError("T must be >= 1 and K positive")
        if self.grid_stride is not None and self.grid_stride < 1:
            raise ValueError("grid_stride must be positive")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchConfig":
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "objective" not in raw or "methods" not in raw:
            raise ValueError("config needs 'objective' and 'methods'")
        raw = dict(raw)
        if raw.get("T") == "inf":
            raw["T"] = math.inf
        return cls(**raw)

    @classmethod
    def load(cls, path) -> "BenchConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["methods"] = [{k: v for k, v in asdict(m).items() if v is not None} for m in self.methods]
        if math.isinf(self.T):
            out["T"] = "inf"
        return out

    def seeds(self) -> list[int]:
        return [self.base_seed + r for r in range(self.replicates)]

    def grid(self) -> np.ndarray:
        stride = self.grid_stride or max(1, self.budget // MAX_GRID_POINTS)
        idx = np.arange(0, self.budget, stride)
        if idx[-1] != self.budget - 1:
            idx = np.append(idx, self.budget - 1)
        return idx


# -- running -----------------------------------------------------------------

def _run_one(args) -> RunTrace:
    method, objective_name, dim, budget, seed, K, T = args
    return method.run(get_objective(objective_name, dim, budget), budget, seed, K, T)


def run_replicates(config: BenchConfig, workers: int = 1) -> list[RunTrace]:
    """All method x replicate runs, method-major, in deterministic order."""
    jobs = [(m, config.objective, config.dim, config.budget, seed, config.K, config.T)
            for m in config.methods for seed in config.seeds()]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(job) for job in jobs]


# -- statistics --------------------------------------------------------------

def sample_median(values) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    if n == 0:
        raise ValueError("median of an empty sample")
    mid = n // 2
    return float(v[mid]) if n % 2 else float(0.5 * (v[mid - 1] + v[mid]))


def _bootstrap_median_ci(matrix: np.ndarray, confidence: float, resamples: int, seed: int,
                         chunk: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Percentile bootstrap CI of the column medians of ``matrix`` (n x G)."""
    # sorting columns makes the result independent of replicate order
    m = np.sort(matrix, axis=0)
    n, G = m.shape
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(resamples, n))
    tail = 100.0 * (1.0 - confidence) / 2.0
    lo = np.empty(G)
    hi = np.empty(G)
    for start in range(0, G, chunk):
        block = m[:, start:start + chunk][idx]  # (B, n, c)
        meds = np.median(block, axis=1)
        lo[start:start + chunk], hi[start:start + chunk] = np.percentile(meds, [tail, 100.0 - tail], axis=0)
    return lo, hi


def median_ci(values, confidence: float = 0.95, bootstrap_resamples: int = BOOTSTRAP_RESAMPLES,
              seed: int = 0) -> tuple[float, float, float]:
    """Sample median with a seeded percentile-bootstrap confidence interval."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("median_ci needs at least one value")
    lo, hi = _bootstrap_median_ci(v[:, None], confidence, bootstrap_resamples, seed)
    return sample_median(v), float(lo[0]), float(hi[0])


def paired_sign_test(a, b) -> float:
    """One-sided sign test p-value for ``a < b`` across pairs; ties are dropped."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    wins = int(np.sum(a < b))
    losses = int(np.sum(a > b))
    if wins + losses == 0:
        return 1.0
    return float(binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)


@dataclass
class MethodAggregate:
    eval_index: np.ndarray
    median: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, MethodAggregate):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("eval_index", "median", "ci_lo", "ci_hi"))


@dataclass
class AggregateResult:
    methods: dict[str, MethodAggregate] = field(default_factory=dict)

    def final(self, method: str) -> tuple[float, float, float]:
        agg = self.methods[method]
        return float(agg.median[-1]), float(agg.ci_lo[-1]), float(agg.ci_hi[-1])


def best_so_far_matrix(traces: Sequence[RunTrace], grid: np.ndarray | None = None) -> np.ndarray:
    curves = np.vstack([t.best_so_far() for t in traces])
    return curves if grid is None else curves[:, grid]


def aggregate(traces: Iterable[RunTrace], config: BenchConfig) -> AggregateResult:
    by_method: dict[str, list[RunTrace]] = {}
    for t in traces:
        by_method.setdefault(t.method, []).append(t)
    grid = config.grid()
    result = AggregateResult()
    for k, m in enumerate(config.methods):
        runs = by_method.get(m.label, [])
        if not runs:
            continue
        mat = best_so_far_matrix(runs, grid)
        lo, hi = _bootstrap_median_ci(mat, config.confidence, config.bootstrap_resamples, config.base_seed + k)
        med = np.array([sample_median(mat[:, g]) for g in range(mat.shape[1])])
        result.methods[m.label] = MethodAggregate(grid.copy(), med, lo, hi)
    return result


# -- serialisation -----------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _open_for_write(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_trace_csv(traces: RunTrace | Iterable[RunTrace], path) -> None:
    if isinstance(traces, RunTrace):
        traces = [traces]
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for t in traces:
            for row in t.rows:
                w.writerow([_fmt(v) for v in row])


def emit_aggregate_csv(result: AggregateResult, path) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for name, agg in result.methods.items():
            for i in range(agg.eval_index.size):
                w.writerow([name, int(agg.eval_index[i]), _fmt(agg.median[i]), _fmt(agg.ci_lo[i]),
                            _fmt(agg.ci_hi[i])])


def emit_csv(obj, path) -> None:
    """Write traces or an aggregate as CSV, dispatching on type."""
    if isinstance(obj, AggregateResult):
        emit_aggregate_csv(obj, path)
    else:
        emit_trace_csv(obj, path)


def read_aggregate_csv(path) -> AggregateResult:
    cols: dict[str, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != AGGREGATE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for name, idx, med, lo, hi in reader:
            c = cols.setdefault(name, {"eval_index": [], "median": [], "ci_lo": [], "ci_hi": []})
            c["eval_index"].append(int(idx))
            c["median"].append(float(med))
            c["ci_lo"].append(float(lo))
            c["ci_hi"].append(float(hi))
    return AggregateResult({
        name: MethodAggregate(np.array(c["eval_index"], dtype=int), np.array(c["median"]),
                              np.array(c["ci_lo"]), np.array(c["ci_hi"]))
        for name, c in cols.items()
    })


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def aggregate_to_dict(result: AggregateResult) -> dict:
    return {
        name: {
            "eval_index": [int(i) for i in agg.eval_index],
            "median": [float(v) for v in agg.median],
            "ci_lo": [float(v) for v in agg.ci_lo],
            "ci_hi": [float(v) for v in agg.ci_hi],
        }
        for name, agg in result.methods.items()
    }


def aggregate_from_dict(raw: dict) -> AggregateResult:
    return AggregateResult({
        name: MethodAggregate(np.array(v["eval_index"], dtype=int), np.array(v["median"], dtype=float),
                              np.array(v["ci_lo"], dtype=float), np.array(v["ci_hi"], dtype=float))
        for name, v in raw.items()
    })


def write_json(payload: dict, path) -> None:
    with _open_for_write(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def emit_json(result: AggregateResult, path, config: BenchConfig | None = None) -> None:
    payload = {
        "config": config.to_dict() if config is not None else None,
        "x_axis": "evaluations",
        "aggregate": aggregate_to_dict(result),
        "final": {name: dict(zip(("median", "ci_lo", "ci_hi"), result.final(name))) for name in result.methods},
    }
    write_json(payload, path)


def read_json(path) -> tuple[dict | None, AggregateResult]:
    with open(path) as fh:
        raw = json.load(fh)
    return raw.get("config"), aggregate_from_dict(raw["aggregate"])


def run_bench(config: BenchConfig, out_dir=None, workers: int = 1) -> AggregateResult:
    """Run every replicate, aggregate, and write ``aggregate.csv`` and ``summary.json``."""
    out_dir = out_dir or config.output_dir
    traces = run_replicates(config, workers)
    result = aggregate(traces, config)
    if out_dir is not None:
        emit_aggregate_csv(result, os.path.join(out_dir, "aggregate.csv"))
        emit_json(result, os.path.join(out_dir, "summary.json"), config)
    return result


__all__ = [
    "AGGREGATE_COLUMNS", "TRACE_COLUMNS", "MethodSpec", "BenchConfig", "run_replicates",
    "sample_median", "median_ci", "paired_sign_test", "MethodAggregate", "AggregateResult",
    "best_so_far_matrix", "aggregate", "emit_csv", "emit_trace_csv", "emit_aggregate_csv", "emit_json",
    "read_aggregate_csv", "read_trace_csv", "read_json", "write_json", "run_bench", "LOCAL", "GLOBAL",
]
