"""Invariant suites run by ``tullock-brd verify``.

Each check returns a :class:`CheckResult`. Sizes are kept moderate so the
whole ``all`` suite runs in well under a minute; the test suite runs the
full-size versions.
"""

from __future__ import annotations

import math

import numpy as np

from . import analysis, discounted_sum
from .analysis import CheckResult, lglg
from .contest import (
    ContestConfig,
    best_response,
    best_response_linear_closed_form,
    utility,
    utility_derivative,
)
from .costs import CostSpec
from .discounted_sum import (
    AdversarialMax,
    BestCase,
    ConstantBeta,
    DissumState,
    UniformBeta,
    lower_bound_example,
    run_dissum,
    sigma_minus,
)
from .dynamics import StoppingRule, detect_cycle, run, two_agent_z_sequence
from .selection import Alternating, FlooredRandom, UniformRandom

# -- core --------------------------------------------------------------------


def check_closed_form(samples=1000, seed=0):
    rng = np.random.default_rng(seed)
    bad, worst = 0, 0.0
    for _ in range(samples):
        n = int(rng.integers(2, 12))
        s = float(rng.uniform(1e-9, 10.0))
        cfg = ContestConfig.normalized_homogeneous(n, CostSpec.linear())
        d = abs(best_response(cfg, 0, s) - best_response_linear_closed_form(n, s))
        worst = max(worst, d)
        bad += d > 1e-9
    return CheckResult("br_closed_form", bad == 0, samples, bad, f"max diff {worst:.3g}")


def check_grid_argmax(samples=50, seed=0, spacing=1e-6):
    """Best response vs the argmax of the utility on a grid of the given spacing."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(samples):
        n = int(rng.integers(2, 8))
        r = float(rng.uniform(0, 8))
        s = float(rng.uniform(0.05, 3.0 * (n - 1)))
        cfg = ContestConfig.normalized_homogeneous(n, CostSpec.power(r))
        y = best_response(cfg, 0, s)
        ci = cfg.costs[0]
        lo, hi = max(0.0, y - 0.01), y + 0.01
        grid = np.arange(lo, hi + spacing / 2, spacing)
        u = grid / (grid + s) - ci.value(grid)
        g = grid[int(np.argmax(u))]
        bad += abs(g - y) > spacing * (1 + 1e-6)
    return CheckResult("br_grid_argmax", bad == 0, samples, bad)


def check_fixed_point():
    bad, checked = 0, 0
    kinds = [CostSpec.linear(), CostSpec.power(0.5), CostSpec.power(1), CostSpec.power(4), CostSpec.monomial(0.5, 2.0)]
    for n in (2, 3, 5, 17):
        for c in kinds:
            cfg = ContestConfig.normalized_homogeneous(n, c)
            checked += 1
            bad += abs(best_response(cfg, 0, n - 1) - 1.0) > 1e-10
    return CheckResult("equilibrium_fixed_point", bad == 0, checked, bad)


def check_concavity(samples=200, seed=0):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(samples):
        n = int(rng.integers(2, 10))
        cfg = ContestConfig.normalized_homogeneous(n, CostSpec.power(float(rng.uniform(0, 6))))
        s = float(rng.uniform(0.01, 20))
        zs = np.sort(rng.uniform(0, 10, size=20))
        d = [utility_derivative(cfg, 0, z, s) for z in zs]
        bad += any(b >= a for a, b in zip(d, d[1:]) if True) and len(set(zs)) == len(zs)
    return CheckResult("utility_concavity", bad == 0, samples, bad)


def check_utility_examples():
    cfg2 = ContestConfig.normalized_homogeneous(2, CostSpec.linear())
    cfg3 = ContestConfig.normalized_homogeneous(3, CostSpec.linear())
    cfg4 = ContestConfig.normalized_homogeneous(4, CostSpec.linear())
    ok = (
        abs(utility(cfg2, 0, [1, 1]) - 0.25) < 1e-15
        and abs(utility(cfg4, 0, [0, 0, 0, 0]) - 0.25) < 1e-15
        and abs(utility(cfg3, 0, [2, 1, 1]) - (0.5 - 4 / 9)) < 1e-15
    )
    return CheckResult("utility_examples", ok, 3, 0 if ok else 1)


# -- two agents ----------------------------------------------------------------


def check_two_agent_rate():
    cfg = ContestConfig.normalized_homogeneous(2, CostSpec.linear())
    eps_list = [1e-2, 1e-4, 1e-8, 1e-16]
    steps = [run(cfg, [0.5, 0.5], Alternating(), StoppingRule(eps=e, max_steps=200)).summary.steps for e in eps_list]
    C = [s - lglg(1 / e) for s, e in zip(steps, eps_list)]
    ok = max(C) - min(C) <= 2 and max(C) <= 6 and all(b - a <= 1 for a, b in zip(steps, steps[1:]))
    return CheckResult("two_agent_rate", ok, len(eps_list), 0 if ok else 1, f"steps={steps}")


def check_curved_warm_phase():
    bad, detail = 0, []
    gamma = 1e-12
    for q in (1, 2, 4):
        cfg = ContestConfig.normalized_homogeneous(2, CostSpec.power(q))
        tr = run(cfg, [gamma, gamma], Alternating(first=0), StoppingRule(l1_eps=1e-3, target=(1, 1), max_steps=200))
        z = two_agent_z_sequence(tr)
        k = int(np.argmax(z >= 0.5))
        pred = lglg(1 / gamma) / math.log2(2 + q)
        detail.append(f"q={q}: {k} vs {pred:.3f}")
        bad += not (pred - 3 <= k <= pred + 1)
    return CheckResult("curved_warm_phase", bad == 0, 3, bad, "; ".join(detail))


def example_a1_config() -> ContestConfig:
    """Two agents with marginal costs ``z**0.2`` and ``z**0.2 / 20``."""
    return ContestConfig((CostSpec.scaled_power(1.0, 0.2), CostSpec.scaled_power(0.05, 0.2)))


def check_example_cycle():
    tr = run(example_a1_config(), [0.1058, 1.3102], Alternating(first=0), StoppingRule(cycle_tol=5e-4, max_steps=200))
    cyc = tr.summary.cycle
    if cyc is None or cyc.period != 4:
        return CheckResult("nonhomogeneous_cycle", False, 1, 1, f"stop={tr.summary.stop_reason}")
    a = sorted(set(float(v) for v in np.round(cyc.profiles[:, 0], 6)))
    b = sorted(set(float(v) for v in np.round(cyc.profiles[:, 1], 6)))
    ok = (
        all(min(abs(v - t) for t in (0.1058, 0.1131)) <= 5e-4 for v in a)
        and all(min(abs(v - t) for t in (1.3102, 1.3468)) <= 5e-4 for v in b)
    )
    return CheckResult("nonhomogeneous_cycle", ok, 1, 0 if ok else 1, f"agent0={a} agent1={b}")


def check_no_cycle_homogeneous():
    cfg = ContestConfig.normalized_homogeneous(2, CostSpec.linear())
    tr = run(cfg, [0.3, 0.3], Alternating(), StoppingRule(max_steps=40))
    ok = detect_cycle(tr, 1e-6, 8) is None
    return CheckResult("homogeneous_no_cycle", ok, 1, 0 if ok else 1)


def check_br_monotonicity():
    cfg = ContestConfig.normalized_homogeneous(2, CostSpec.linear())
    return analysis.check_two_agent_br_monotonicity(cfg, samples=2000)


# -- discounted sum ------------------------------------------------------------


def check_potential_monotone(steps=20_000, seed=0):
    """Fuzz the discounted-sum dynamics and watch the potential."""
    rng = np.random.default_rng(seed)
    done, bad, detail = 0, 0, ""
    while done < steps:
        n = int(rng.integers(2, 65))
        B = float(rng.uniform(0, 0.999))
        policy = [AdversarialMax(), UniformBeta(), ConstantBeta(B * float(rng.random()))][int(rng.integers(3))]
        z = rng.normal(size=n) * rng.choice([1e-6, 1.0, 1e6])
        state = DissumState(z, B, policy, rng=rng)
        pv = discounted_sum.potential(state.z)
        for _ in range(200):
            i = int(rng.integers(n))
            state = discounted_sum.dissum_step(state, i)
            nv = discounted_sum.potential(state.z)
            l1 = math.fsum(np.abs(state.z))
            done += 1
            if nv.f < 0 or nv.f > pv.f * (1 + 1e-12) or not (nv.f * (1 - 1e-12) <= l1 <= 2 * nv.f * (1 + 1e-12)):
                bad += 1
                detail = f"f went {pv.f!r} -> {nv.f!r}"
            pv = nv
    return CheckResult("potential_monotonicity", bad == 0, done, bad, detail)


def check_sign_contraction(samples=2000, seed=1):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(samples):
        n = int(rng.integers(2, 20))
        B = float(rng.uniform(0, 0.99))
        z = rng.normal(size=n)
        i = int(rng.integers(n))
        sm = sigma_minus(z, i)
        st = discounted_sum.dissum_step(DissumState(z, B, UniformBeta(), rng=rng), i)
        zi = st.z[i]
        if zi * sm > 0 or abs(zi) > B * abs(sm) * (1 + 1e-15):
            bad += 1
    return CheckResult("sign_contraction", bad == 0, samples, bad)


def check_lower_bounds():
    inst = lower_bound_example("all_ones", n=16)
    t1 = run_dissum(inst.z0, inst.B, inst.beta_policy, inst.schedule, eps=0.5, max_steps=10_000)
    inst2 = lower_bound_example("two_coordinate", kappa=1.0, B=0.9, n=4)
    t2 = run_dissum(inst2.z0, inst2.B, inst2.beta_policy, inst2.schedule, eps=1e-6, max_steps=10_000)
    need = math.ceil(1 + math.log(1e6) / math.log(1 / 0.9))
    ok = t1.summary.converged and t1.summary.steps >= 16 and t2.summary.converged and t2.summary.steps >= need
    return CheckResult(
        "dissum_lower_bounds", ok, 2, 0 if ok else 1, f"all_ones={t1.summary.steps}, two_coordinate={t2.summary.steps} (need {need})"
    )


def check_best_case_upper(seed=0):
    rng = np.random.default_rng(seed)
    bad, checked = 0, 0
    for n in (4, 8, 16):
        for B in (0.3, 0.5, 0.9):
            z0 = rng.normal(size=n)
            eps = 1e-6
            f0 = discounted_sum.potential(z0).f
            tr = run_dissum(z0, B, AdversarialMax(), BestCase(), eps=eps, max_steps=10**6)
            checked += 1
            bad += tr.summary.steps > 8 * n * math.log(f0 / eps) / (1 - B)
    return CheckResult("dissum_best_case_upper", bad == 0, checked, bad)


def check_dissum_random(trials=40, seed=0):
    bad, checked = 0, 0
    for n in (4, 8):
        for k in range(trials):
            z0 = np.random.default_rng([seed, n, k]).normal(size=n)
            eps, delta = 1e-3, 0.05
            T = int(32 * n * n * math.log(n) * math.log(discounted_sum.potential(z0).f / (eps * delta)))
            tr = run_dissum(z0, 0.5, AdversarialMax(), UniformRandom(), eps=eps, max_steps=T, seed=k)
            checked += 1
            bad += not tr.summary.converged
    return CheckResult("dissum_randomized", bad <= 0.05 * checked, checked, bad)


# -- n agents --------------------------------------------------------------------


def n_agent_traces(ns=(3, 10), trials=10, eps=1e-9):
    out = []
    for n in ns:
        cfg = ContestConfig.normalized_homogeneous(n, CostSpec.linear())
        budget = int(32 * n * n * math.log2(n) * math.log2(n / eps))
        for seed in range(trials):
            out.append(run(cfg, np.full(n, 5.0), UniformRandom(), StoppingRule(eps=eps, max_steps=budget), seed=seed))
    return out


def check_n_agent_suite():
    traces = n_agent_traces()
    results = [
        CheckResult(
            "n_agent_convergence",
            all(t.summary.converged for t in traces),
            len(traces),
            sum(not t.summary.converged for t in traces),
        )
    ]
    for name, fn in (
        ("persistence", analysis.check_persistence),
        ("warmup_absorption", analysis.check_warmup_absorption),
        ("two_threshold", analysis.check_two_threshold),
        ("good_domain", analysis.check_good_domain),
    ):
        rs = [fn(t) for t in traces]
        v = sum(r.violations for r in rs)
        results.append(CheckResult(name, v == 0, sum(r.checked for r in rs), v))
    return results


def check_floored_converges():
    cfg = ContestConfig.normalized_homogeneous(5, CostSpec.power(1))
    trs = [
        run(cfg, np.full(5, 3.0), FlooredRandom(0.1), StoppingRule(eps=1e-8, max_steps=200_000), seed=s)
        for s in range(5)
    ]
    bad = sum(not t.summary.converged for t in trs)
    return CheckResult("floored_random_convergence", bad == 0, len(trs), bad)


# -- lemmas ----------------------------------------------------------------------


def check_partition_all():
    rs = [analysis.check_partition(n, samples=2000) for n in (2, 4, 8, 16, 64)]
    v = sum(r.violations for r in rs)
    return CheckResult("partition", v == 0, sum(r.checked for r in rs), v)


def check_coupon():
    n = 64
    rep = analysis.coupon_all_played_time(n, trials=10_000, seed=0)
    p = rep.tail_probability(n * math.log(n) + 3 * n)
    return CheckResult("coupon_tail", p < 0.08, 10_000, 0 if p < 0.08 else 1, f"P={p:.4f}")


def check_reverse_lipschitz():
    rs = [
        analysis.check_reverse_lipschitz(ContestConfig.normalized_homogeneous(n, CostSpec.linear()), samples=1000, seed=n)
        for n in (2, 3, 8)
    ]
    v = sum(r.violations for r in rs)
    return CheckResult("reverse_lipschitz", v == 0, sum(r.checked for r in rs), v)


def check_neighborhood():
    bad, checked = 0, 0
    for n in (2, 3, 5):
        for c in (CostSpec.linear(), CostSpec.power(2)):
            cfg = ContestConfig.normalized_homogeneous(n, c)
            rep = analysis.epsilon_neighborhood_check(cfg, 0.01 / n, samples=300, seed=n)
            checked += rep.samples
            bad += rep.violations
    return CheckResult("epsilon_neighborhood", bad == 0, checked, bad)


SUITES = {
    "core": [check_utility_examples, check_closed_form, check_grid_argmax, check_fixed_point, check_concavity],
    "two_agent": [check_br_monotonicity, check_two_agent_rate, check_curved_warm_phase, check_example_cycle, check_no_cycle_homogeneous],
    "dissum": [check_potential_monotone, check_sign_contraction, check_lower_bounds, check_best_case_upper, check_dissum_random],
    "n_agent": [check_n_agent_suite, check_floored_converges],
    "lemmas": [check_partition_all, check_coupon, check_reverse_lipschitz, check_neighborhood],
}
SUITE_NAMES = tuple(SUITES) + ("all",)


def run_suite(name: str) -> list:
    if name not in SUITE_NAMES:
        raise KeyError(name)
    names = list(SUITES) if name == "all" else [name]
    results = []
    for suite in names:
        for fn in SUITES[suite]:
            try:
                out = fn()
            except Exception as exc:  # a crashing check is a failing check
                out = CheckResult(fn.__name__.removeprefix("check_"), False, 0, 1, f"{type(exc).__name__}: {exc}")
            for r in out if isinstance(out, list) else [out]:
                results.append((suite, r))
    return results


def inject_potential_sign_flip():
    """Mutation used to smoke-test the suite: the potential changes sign."""
    original = discounted_sum.potential

    def flipped(z):
        pv = original(z)
        return discounted_sum.PotentialValue(-pv.V, -pv.W)

    discounted_sum.potential = flipped
    return original


INJECTIONS = {"potential-sign-flip": inject_potential_sign_flip}
