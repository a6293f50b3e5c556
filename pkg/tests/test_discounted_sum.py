import math

import numpy as np
import pytest

from tullock_brd import (
    AdversarialMax,
    BestCase,
    BetaContractError,
    CallbackBeta,
    ConstantBeta,
    DissumState,
    ExplicitSchedule,
    UniformBeta,
    UniformRandom,
    dissum_step,
    lower_bound_example,
    potential,
    run_dissum,
)
from tullock_brd.discounted_sum import sigma_minus


def e1(n=6):
    z = np.zeros(n)
    z[0], z[1] = -1.0, 1.0
    return z


def test_stalled_move():
    st = DissumState(e1(), 0.5, ConstantBeta(0.5))
    new = dissum_step(st, 2)
    assert np.array_equal(new.z, e1())


def test_example_sequence():
    st = DissumState(e1(), 0.5, ConstantBeta(0.5))
    st = dissum_step(st, 0)
    assert np.array_equal(st.z, [-0.5, 1, 0, 0, 0, 0])
    st = dissum_step(st, 2)
    assert np.array_equal(st.z, [-0.5, 1, -0.25, 0, 0, 0])


def test_no_negative_zero():
    st = dissum_step(DissumState(e1(), 0.5, ConstantBeta(0.5)), 2)
    assert not np.any(np.signbit(st.z[2:]))


def test_potential_examples():
    assert potential(np.zeros(5)).f == 0.0
    assert potential(e1()).f == 1.0
    pv = potential([2, -0.5, -1, 0.3])
    assert (pv.V, pv.W, pv.f) == pytest.approx((2.3, 1.5, 2.3))


def test_sigma_minus_is_exact():
    z = np.array([1e16, 1.0, -1e16])
    assert sigma_minus(z, 1) == 0.0
    assert sigma_minus(z, 0) == -1e16 + 1.0


def test_beta_contract():
    st = DissumState(e1(), 0.5, CallbackBeta(lambda z, i, t: 0.9))
    with pytest.raises(BetaContractError):
        dissum_step(st, 0)


def test_bad_B():
    with pytest.raises(ValueError):
        DissumState(e1(), 1.0)
    with pytest.raises(ValueError):
        run_dissum(e1(), -0.1, eps=1e-3)


def test_zero_is_fixed():
    tr = run_dissum(np.zeros(4), 0.5, eps=0.0, max_steps=3)
    assert tr.summary.converged and tr.summary.steps == 0


def test_zero_invariant_under_steps():
    st = DissumState(np.zeros(4), 0.9, UniformBeta(), rng=np.random.default_rng(0))
    for i in range(4):
        st = dissum_step(st, i)
        assert np.array_equal(st.z, np.zeros(4))


def test_all_ones_lower_bound():
    inst = lower_bound_example("all_ones", n=16)
    assert np.array_equal(inst.z0, np.ones(16))
    tr = run_dissum(inst.z0, inst.B, inst.beta_policy, inst.schedule, eps=0.5, max_steps=10_000)
    assert tr.summary.converged
    assert tr.summary.steps >= 16
    assert set(tr.movers[1:]) == set(range(16))


def test_two_coordinate_lower_bound():
    inst = lower_bound_example("two_coordinate", kappa=1.0, B=0.9, n=5)
    assert np.array_equal(inst.z0, [1, 1, 0, 0, 0])
    tr = run_dissum(inst.z0, inst.B, inst.beta_policy, inst.schedule, eps=1e-6, max_steps=10_000)
    need = 1 + math.log(1e6) / math.log(1 / 0.9)
    assert tr.summary.converged and tr.summary.steps >= need
    f = tr.summary.f_history
    assert np.allclose(f[2:] / f[1:-1], 0.9, rtol=1e-9)


def test_two_coordinate_rejects_small_B():
    with pytest.raises(ValueError):
        lower_bound_example("two_coordinate", kappa=1.0, B=0.3)


def test_best_case_upper_bound():
    rng = np.random.default_rng(4)
    for n in (3, 6, 12):
        for B in (0.2, 0.5, 0.95):
            z0 = rng.normal(size=n)
            tr = run_dissum(z0, B, AdversarialMax(), BestCase(), eps=1e-8, max_steps=10**6)
            assert tr.summary.converged
            assert tr.summary.steps <= 8 * n * math.log(potential(z0).f / 1e-8) / (1 - B)


def test_randomised_convergence_budget():
    for n in (4, 8, 16):
        fails = 0
        for k in range(20):
            z0 = np.random.default_rng([n, k]).normal(size=n)
            T = int(32 * n * n * math.log(n) * math.log(potential(z0).f / (1e-4 * 0.05)))
            tr = run_dissum(z0, 0.5, AdversarialMax(), UniformRandom(), eps=1e-4, max_steps=T, seed=k)
            fails += not tr.summary.converged
        assert fails <= 1


def test_run_is_deterministic():
    z0 = np.random.default_rng(0).normal(size=6)
    a = run_dissum(z0, 0.7, UniformBeta(), UniformRandom(), eps=1e-6, max_steps=10_000, seed=3)
    b = run_dissum(z0, 0.7, UniformBeta(), UniformRandom(), eps=1e-6, max_steps=10_000, seed=3)
    assert a.movers == b.movers and np.array_equal(a.summary.final, b.summary.final)


def test_schedule_end():
    tr = run_dissum(np.ones(3), 0.5, selection=ExplicitSchedule([0]), eps=1e-9)
    assert tr.summary.stop_reason == "schedule_end" and tr.summary.steps == 1


def test_needs_a_stopping_rule():
    with pytest.raises(ValueError):
        run_dissum(np.ones(3), 0.5)


def test_trace_columns():
    tr = run_dissum(np.ones(2), 0.5, eps=1e-3)
    assert tr.columns() == ["t", "mover", "f", "z_0", "z_1"]
