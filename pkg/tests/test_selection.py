import numpy as np
import pytest

from tullock_brd import Alternating, ExplicitSchedule, FlooredRandom, RoundRobin, UniformRandom, largest_on_larger_side
from tullock_brd.selection import SelectionContext, floored_probabilities


def ctx(n=3, t=0, last=None, seed=0):
    return SelectionContext(n, t, last, np.random.default_rng(seed), np.zeros(n), np.zeros(n, bool))


def test_alternating():
    pol = Alternating(first=0)
    assert pol.choose(ctx(2)) == 0
    assert pol.choose(ctx(2, 1, 0)) == 1
    assert pol.choose(ctx(2, 2, 1)) == 0
    with pytest.raises(ValueError):
        pol.validate(3)


def test_round_robin_and_schedule():
    rr = RoundRobin()
    assert [rr.choose(ctx(3, t)) for t in range(5)] == [0, 1, 2, 0, 1]
    sched = ExplicitSchedule([2, 0])
    assert sched.choose(ctx(3, 0)) == 2
    assert sched.choose(ctx(3, 2)) is None
    assert ExplicitSchedule([2, 0], repeat=True).choose(ctx(3, 3)) == 0
    with pytest.raises(ValueError):
        ExplicitSchedule([5]).validate(3)


def test_uniform_is_reproducible():
    a = [UniformRandom().choose(ctx(5, seed=3)) for _ in range(3)]
    assert len(set(a)) == 1


def test_floored_probabilities_sum_and_floor():
    n, L = 6, 0.1
    p = floored_probabilities(n, L, last_mover=2)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(np.delete(p, 2) >= L - 1e-15)
    # the spare mass sits on the previous mover
    assert p[2] == pytest.approx(1 - 5 * L)


def test_floored_probabilities_first_step_and_weights():
    p = floored_probabilities(4, 0.25, None)
    assert np.allclose(p, 0.25)
    w = np.array([0, 0, 1.0, 0])
    p = floored_probabilities(4, 0.1, 1, w)
    assert p.sum() == pytest.approx(1.0)
    assert p[2] == pytest.approx(0.1 + 0.7)


def test_floored_random_frequencies():
    pol = FlooredRandom(0.2)
    pol.validate(4)
    rng = np.random.default_rng(0)
    counts = np.zeros(4)
    for _ in range(20000):
        counts[pol.choose(SelectionContext(4, 1, 0, rng, np.zeros(4), np.zeros(4, bool)))] += 1
    freq = counts / counts.sum()
    assert freq[0] == pytest.approx(0.4, abs=0.02)
    assert np.allclose(freq[1:], 0.2, atol=0.02)


def test_floored_rejects_large_floor():
    with pytest.raises(ValueError):
        FlooredRandom(0.6).validate(3)


def test_largest_on_larger_side_positive_side():
    # deviations (1, -0.5, 0): positive mass 1 beats negative mass 0.5
    assert largest_on_larger_side(np.array([2, 0.5, 1]) - 1) == 0


def test_largest_on_larger_side_negative_side_tie():
    # deviations (-0.8, -0.8, 0): equal shortfalls, lowest index wins
    assert largest_on_larger_side(np.array([0.2, 0.2, 1]) - 1) == 0


def test_largest_on_larger_side_all_zero_and_exclude():
    assert largest_on_larger_side(np.zeros(4)) == 0
    assert largest_on_larger_side(np.zeros(4), exclude=0) == 1
    # only one positive entry; excluding it falls back to the other side
    assert largest_on_larger_side(np.array([1.0, -0.2, -0.3]), exclude=0) == 2


def test_largest_on_larger_side_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(300):
        z = rng.normal(size=int(rng.integers(1, 9)))
        V = z[z > 0].sum()
        W = -z[z <= 0].sum()
        side = [i for i in range(len(z)) if (z[i] > 0) == (V >= W)]
        expected = max(side, key=lambda i: (abs(z[i]), -i))
        assert largest_on_larger_side(z) == expected
