import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikecascade.cascade import (SpikeState, cascade_counts, cascade_size_inf,
                                  physical_criterion_check, physical_jump_size,
                                  resolve_cascade)
from spikecascade.errors import ConfigError, DomainError


def fixed_point_oracle(x, alpha):
    """Round-by-round recursion in pure python, one particle at a time."""
    n = len(x)
    fired = set(i for i in range(n) if x[i] >= 1.0)
    if not fired:
        return set()
    while True:
        new = {i for i in range(n) if i not in fired and x[i] + alpha * len(fired) / n >= 1.0}
        if not new:
            return fired
        fired |= new


def minimal_closed_set(x, alpha):
    """Smallest k with #{x >= 1 - alpha k / n} <= k, by enumerating every k."""
    n = len(x)
    for k in range(n + 1):
        if sum(1 for v in x if v >= 1.0 - alpha * k / n) <= k:
            return k
    return n


potential_states = st.integers(1, 40).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-0.5, 1.05, allow_nan=False), min_size=n, max_size=n),
    st.sampled_from([0.1, 0.5, 0.9, 0.99])))


def test_four_particle_example():
    res = resolve_cascade(SpikeState(np.array([1.0, 0.85, 0.7, 0.3]), 0.8))
    assert [r.tolist() for r in res.rounds] == [[0], [1], [2]]
    assert res.gamma == frozenset({0, 1, 2})
    np.testing.assert_allclose(res.post_potentials, [0.6, 0.45, 0.3, 0.9], atol=1e-15)
    assert res.jump_fraction == 0.75
    assert cascade_size_inf(SpikeState(np.array([1.0, 0.85, 0.7, 0.3]), 0.8)) == 3


def test_three_particle_physical_selection():
    res = resolve_cascade(SpikeState(np.array([1.0, 0.55, 0.52]), 0.9))
    assert res.gamma == frozenset({0})
    assert res.round_sizes == [1]


def test_quiet_state_is_empty_cascade():
    x = np.array([0.2, 0.99, -1.0])
    res = resolve_cascade(SpikeState(x, 0.5))
    assert res.size == 0 and res.rounds == []
    np.testing.assert_array_equal(res.post_potentials, x)
    assert cascade_size_inf(SpikeState(np.full(5, 0.0), 0.5)) == 0
    assert cascade_size_inf(SpikeState(np.ones(7), 0.5)) == 7


def test_single_particle_self_kick():
    res = resolve_cascade(SpikeState(np.array([1.02]), 0.3))
    assert res.size == 1
    assert res.post_potentials[0] == pytest.approx(1.02 + 0.3 - 1.0)


def test_errors():
    with pytest.raises(ConfigError):
        SpikeState(np.array([1.0]), 1.0)
    with pytest.raises(DomainError):
        SpikeState(np.array([]), 0.5)
    with pytest.raises(DomainError):
        physical_jump_size([], 0.5)


@settings(max_examples=400, deadline=None)
@given(potential_states)
def test_cascade_matches_oracles(data):
    xs, alpha = data
    x = np.array(xs)
    state = SpikeState(x, alpha)
    res = resolve_cascade(state)
    assert set(res.gamma) == fixed_point_oracle(xs, alpha)
    assert res.size == cascade_size_inf(state) == minimal_closed_set(xs, alpha)
    # rounds are disjoint and cover gamma
    flat = [i for r in res.rounds for i in r.tolist()]
    assert len(flat) == len(set(flat)) and set(flat) == set(res.gamma)
    assert len(res.rounds) <= state.n
    assert np.all(res.post_potentials < 1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=60), st.sampled_from([0.2, 0.5, 0.9]))
def test_jump_size_matches_inf_formula_when_threshold_attained(xs, alpha):
    x = np.array(xs + [1.0])
    n = len(x)
    eta = physical_jump_size(x, alpha)
    k = cascade_size_inf(SpikeState(x, alpha))
    assert 0.0 <= eta <= 1.0
    assert abs(eta * n - k) <= 1.0 + 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40),
       st.lists(st.floats(0.9, 1.0), min_size=1, max_size=10),
       st.sampled_from([0.3, 0.8]))
def test_jump_size_monotone_in_mass_near_threshold(base, extra, alpha):
    # replacing low samples by samples near 1 dominates the empirical CDF near 1
    x = np.array(base)
    y = x.copy()
    m = min(len(extra), len(y))
    order = np.argsort(y)[:m]
    y[order] = np.maximum(y[order], extra[:m])
    assert physical_jump_size(y, alpha) >= physical_jump_size(x, alpha)


def test_jump_size_brute_force_scan():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(1, 15))
        x = rng.uniform(0.0, 1.0, n)
        alpha = float(rng.choice([0.3, 0.7, 0.95]))
        eta = physical_jump_size(x, alpha)
        fine = np.linspace(0, 1.2, 120001)
        prob = (x[None, :] >= 1.0 - alpha * fine[:, None]).mean(axis=1)
        brute = fine[np.argmax(prob < fine)]
        assert abs(eta - brute) <= 2e-5


def test_jump_size_examples():
    x = np.array([1.0, 0.85, 0.7, 0.3])
    assert physical_jump_size(x, 0.8) == 0.75
    assert physical_jump_size(np.full(10, 0.1), 0.5) == 0.0
    n = 10_000
    for alpha in (0.5, 0.6, 0.8, 0.9):
        right = 1.0 - alpha + alpha * np.arange(1, n + 1) / n
        assert physical_jump_size(right, alpha) == 1.0
        mid = 1.0 - alpha + alpha * (np.arange(1, n + 1) - 0.5) / n
        assert physical_jump_size(mid, alpha) == 0.0


def test_criterion_check_examples():
    assert physical_criterion_check([0.1], 0.5, 0.0).passed
    n, alpha = 1000, 0.5
    grid = 1.0 - alpha + alpha * (np.arange(1, n + 1) - 0.5) / n
    rep = physical_criterion_check(grid, alpha, 1.0)
    assert rep.passed and rep.worst_margin >= -1.0 / n
    assert not physical_criterion_check(np.linspace(0, 0.5, 50), 0.5, 0.2).passed


def test_criterion_check_on_tail_only():
    x = np.concatenate([np.linspace(0.0, 0.3, 900), np.linspace(0.5, 1.0, 100)])
    full = physical_criterion_check(x, 0.5, 0.1)
    tail = physical_criterion_check(x[x >= 0.95], 0.5, 0.1, n=len(x))
    assert full == tail


def test_counts_switch_to_sorted_scan():
    # a long chain forces more rounds than the direct phase
    n, alpha = 200, 0.9
    x = 1.0 - alpha * np.arange(n) / n + 1e-12
    x[0] = 1.0
    counts = cascade_counts(x, alpha, n)
    assert counts == list(range(1, n + 1))
    assert cascade_size_inf(SpikeState(x, alpha)) == n


def test_enumerated_small_states():
    # every state on a coarse lattice for N <= 4
    levels = [0.0, 0.3, 0.55, 0.8, 0.95, 1.0]
    for n in range(1, 5):
        for xs in itertools.product(levels, repeat=n):
            for alpha in (0.5, 0.9):
                res = resolve_cascade(SpikeState(np.array(xs), alpha))
                assert set(res.gamma) == fixed_point_oracle(list(xs), alpha)
