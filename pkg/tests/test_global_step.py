import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dscd.global_step import DscdState, LossWindow, dscd_step, window_best
from dscd.objective import styblinski_tang
from dscd.proposal import ProposalDomain


class Scripted:
    """Objective returning a fixed sequence of losses, ignoring the position."""

    def __init__(self, losses):
        self.losses = list(losses)
        self.calls = 0

    def __call__(self, x):
        y = self.losses[self.calls]
        self.calls += 1
        return y


def _state(window_losses, K=1000, seed=0, dim=2):
    w = LossWindow(K)
    for y in window_losses:
        w.push(y)
    return DscdState(np.zeros(dim), min(window_losses), w, np.random.default_rng(seed))


DOMAIN = ProposalDomain.uniform(2)


def test_window_singleton_and_empty():
    w = LossWindow(5)
    with pytest.raises(ValueError):
        window_best(w)
    w.push(3.0)
    assert window_best(w) == 3.0


def test_window_eviction():
    K = 4
    w = LossWindow(K)
    w.push(1.0)
    for v in (5.0, 6.0, 7.0, 8.0):
        w.push(v)
    assert window_best(w) == 5.0
    assert len(w) == K


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 50), st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=300))
def test_window_matches_naive_scan(K, values):
    w = LossWindow(K)
    for i, v in enumerate(values):
        w.push(v)
        assert window_best(w) == min(values[max(0, i + 1 - K): i + 1])


def test_window_random_pushes_against_naive_oracle():
    rng = np.random.default_rng(0)
    K = 37
    w = LossWindow(K)
    seen = []
    for v in rng.normal(size=10_000):
        w.push(float(v))
        seen.append(float(v))
        assert window_best(w) == min(seen[-K:])
        assert w.values() == seen[-K:]


def test_strict_improvement_accepted():
    s = _state([5.0, 3.0])
    rec = dscd_step(s, Scripted([2.0]), DOMAIN)
    assert rec.accepted
    assert s.y_best == 2.0 and window_best(s.window) == 2.0


def test_tie_rejected():
    s = _state([5.0, 3.0])
    x_before = s.x_best.copy()
    rec = dscd_step(s, Scripted([3.0]), DOMAIN)
    assert not rec.accepted
    np.testing.assert_array_equal(s.x_best, x_before)
    assert s.y_best == 3.0


def test_acceptance_after_eviction():
    s = _state([1.0, 9.0, 9.0], K=3)
    # next push evicts the 1.0; the pre-push minimum must come from the last K = 3 evaluations
    s.window.push(9.0)
    naive = min(s.window.values())
    assert naive == 9.0
    rec = dscd_step(s, Scripted([2.0]), DOMAIN)
    assert rec.accepted and rec.threshold == 9.0


def test_non_finite_loss_never_accepted_nor_stored():
    s = _state([5.0])
    rec = dscd_step(s, Scripted([math.nan]), DOMAIN)
    assert not rec.accepted
    assert s.window.values() == [5.0]
    rec = dscd_step(s, Scripted([-math.inf]), DOMAIN)
    assert not rec.accepted and s.window.values() == [5.0]


def test_step_changes_exactly_one_coordinate():
    spec = styblinski_tang(6)
    x0 = np.full(6, 1.0)
    s = DscdState.start(x0, spec(x0), np.random.default_rng(3))
    dom = ProposalDomain.from_objective(spec)
    for _ in range(200):
        before = s.x_best.copy()
        rec = dscd_step(s, spec, dom)
        diff = np.nonzero(s.x_best != before)[0]
        if rec.accepted:
            assert list(diff) == [rec.dimension]
            assert s.x_best[rec.dimension] == rec.proposed
        else:
            assert diff.size == 0


def test_dimension_sampling_is_uniform():
    rng = np.random.default_rng(123)
    s = DscdState(np.zeros(10), 0.0, LossWindow(10), rng)
    dom = ProposalDomain.uniform(10)
    counts = np.zeros(10, dtype=int)
    f = lambda x: 1.0  # noqa: E731
    for _ in range(100_000):
        counts[dscd_step(s, f, dom).dimension] += 1
    sigma = math.sqrt(100_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - 10_000) < 4 * sigma)


def test_accepted_losses_non_increasing_with_full_history_window():
    spec = styblinski_tang(5)
    rng = np.random.default_rng(9)
    x0 = rng.uniform(spec.lower, spec.upper)
    s = DscdState.start(x0, spec(x0), rng, K=5000)
    dom = ProposalDomain.from_objective(spec)
    accepted = []
    for _ in range(3000):
        rec = dscd_step(s, spec, dom)
        if rec.accepted:
            accepted.append(rec.loss)
        assert s.y_best == window_best(s.window)
    assert accepted and all(b < a for a, b in zip(accepted, accepted[1:]))


def test_replay_is_bit_exact():
    spec = styblinski_tang(4)
    dom = ProposalDomain.from_objective(spec)

    def run(seed):
        rng = np.random.default_rng(seed)
        x0 = rng.uniform(spec.lower, spec.upper)
        s = DscdState.start(x0, spec(x0), rng, K=50)
        return [dscd_step(s, spec, dom) for _ in range(500)], s.x_best

    (a, xa), (b, xb) = run(5), run(5)
    assert a == b
    np.testing.assert_array_equal(xa, xb)
