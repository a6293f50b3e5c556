import math

import numpy as np
import pytest

from conftest import grid_argmax
from tullock_brd import (
    ContestConfig,
    CostSpec,
    NumericalRangeError,
    UnsupportedConfigError,
    best_response,
    best_response_linear_closed_form,
    equilibrium_profile,
    is_epsilon_equilibrium,
    kappa,
    logit_transform,
    normalize_homogeneous,
    utility,
    utility_derivative,
)
from tullock_brd.contest import DEFAULT_A


# -- utility ----------------------------------------------------------------


def test_utility_at_equilibrium_two_agents(linear2):
    assert utility(linear2, 0, [1, 1]) == pytest.approx(0.25, abs=1e-15)


def test_utility_all_zero_splits_prize():
    cfg = ContestConfig.normalized_homogeneous(4, CostSpec.power(2))
    assert utility(cfg, 0, np.zeros(4)) == pytest.approx(0.25)


def test_utility_three_agents(linear3):
    # 2/4 - (2/9) * 2, recomputed by hand
    assert utility(linear3, 0, [2, 1, 1]) == pytest.approx(0.5 - 4 / 9, abs=1e-15)


def test_utility_derivative_examples(linear2):
    cfg3 = ContestConfig.normalized_homogeneous(3, CostSpec.power(2))
    assert utility_derivative(cfg3, 0, 1.0, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert utility_derivative(linear2, 0, 0.0, 1.0) == pytest.approx(0.75)
    assert utility_derivative(linear2, 0, 3.0, 1.0) == pytest.approx(-0.1875)


def test_utility_derivative_needs_positive_opponents(linear2):
    with pytest.raises(ValueError):
        utility_derivative(linear2, 0, 1.0, 0.0)


def test_utility_rejects_bad_index(linear2):
    with pytest.raises(IndexError):
        utility(linear2, 2, [1, 1])


# -- best response ----------------------------------------------------------


def test_br_to_zero_convention(linear2):
    assert best_response(linear2, 0, 0.0) == DEFAULT_A


@pytest.mark.parametrize("n", [2, 3, 7])
@pytest.mark.parametrize("cost", [CostSpec.linear(), CostSpec.power(0.5), CostSpec.power(3), CostSpec.monomial(0.4, 2.5)])
def test_br_at_equilibrium_is_one(n, cost):
    cfg = ContestConfig.normalized_homogeneous(n, cost)
    assert best_response(cfg, 0, n - 1) == pytest.approx(1.0, abs=1e-12)


def test_br_two_agent_quarter(linear2):
    y = best_response(linear2, 0, 0.25)
    assert y == pytest.approx(0.75, abs=1e-12)
    # frozen grid oracle, spacing 1e-6
    assert abs(grid_argmax(linear2.costs[0], 2, 0.25) - y) <= 1e-6


def test_br_zero_when_marginal_negative_at_origin(linear3):
    s = 4.6
    assert utility_derivative(linear3, 0, 0.0, s) < 0
    assert best_response(linear3, 0, s) == 0.0


def test_closed_form_examples():
    assert best_response_linear_closed_form(2, 1.0) == pytest.approx(1.0)
    assert best_response_linear_closed_form(2, 0.25) == pytest.approx(0.75)
    assert best_response_linear_closed_form(3, 2.0) == pytest.approx(1.0)
    assert best_response_linear_closed_form(3, 10.0) == 0.0


def test_br_against_grid_for_power_costs():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        r = float(rng.uniform(0, 8))
        s = float(rng.uniform(0.05, 2 * (n - 1)))
        cfg = ContestConfig.normalized_homogeneous(n, CostSpec.power(r))
        y = best_response(cfg, 0, s)
        g = grid_argmax(cfg.costs[0], n, s, lo=max(0.0, y - 0.01), hi=y + 0.01)
        assert abs(g - y) <= 1e-6 * (1 + 1e-6)


def test_br_bracket_overflow_raises():
    # a marginal cost that is essentially flat: the optimum is beyond any sane bracket
    cost = CostSpec.linear(1e-40)
    cfg = ContestConfig((cost, cost))
    with pytest.raises(NumericalRangeError):
        best_response(cfg, 0, 1.0)


# -- equilibrium certificate -------------------------------------------------


def test_all_ones_is_equilibrium(linear3):
    cert = is_epsilon_equilibrium(linear3, np.ones(3), 1e-16)
    assert cert.holds and bool(cert)


def test_three_eps_neighbourhood_two_agents(linear2):
    eps = 0.03
    e = eps / 3
    assert is_epsilon_equilibrium(linear2, [1 - e, 1 - e], eps).holds


def test_half_half_is_not_equilibrium(linear2):
    cert = is_epsilon_equilibrium(linear2, [0.5, 0.5], 0.01)
    assert not cert.holds
    # oracle: grid maximum strictly beats staying at 0.5
    g = grid_argmax(linear2.costs[0], 2, 0.5)
    u_best = g / (g + 0.5) - g / 4
    u_here = 0.5 - 0.5 / 4
    assert u_here < (1 - 0.01) * u_best
    assert cert.best_responses[0] == pytest.approx(2 * math.sqrt(0.5) - 0.5, abs=1e-9)


def test_equilibrium_profile():
    for n in (2, 3):
        cfg = ContestConfig.normalized_homogeneous(n, CostSpec.linear())
        assert np.array_equal(equilibrium_profile(cfg), np.ones(n))
    het = ContestConfig((CostSpec.linear(), CostSpec.linear(2.0)))
    with pytest.raises(UnsupportedConfigError):
        equilibrium_profile(het)


def test_kappa(linear3):
    assert kappa(linear3) == pytest.approx(4.5)
    cfg = ContestConfig.normalized_homogeneous(3, CostSpec.power(1))
    assert math.isinf(kappa(cfg))


# -- normalisation and change of variables -----------------------------------


def test_normalize_constant_marginal():
    k = 3.0
    c, gamma = normalize_homogeneous(CostSpec.linear(k), 2)
    assert gamma == pytest.approx(1 / (4 * k))
    assert c.derivative(1.0) == pytest.approx(1.0)


def test_normalize_fixed_point():
    _, gamma = normalize_homogeneous(CostSpec.linear(0.25), 2)
    assert gamma == pytest.approx(1.0, abs=1e-10)


def test_normalize_linear_marginal():
    c, gamma = normalize_homogeneous(CostSpec.power(1.0), 2)
    assert gamma == pytest.approx(0.5)
    assert c.derivative(1.0) == pytest.approx(1.0)


def test_normalize_custom_uses_bisection():
    raw = CostSpec.custom(lambda z: 2 * z**2, lambda z: 4 * z, lambda z: 4 + 0 * z, label="2z^2")
    c, gamma = normalize_homogeneous(raw, 2)
    # c'(z) = 4 * gamma**2 * z * 4 must equal 1 at z = 1
    assert 16 * gamma**2 == pytest.approx(1.0, rel=1e-9)
    assert c.derivative(1.0) == pytest.approx(1.0, rel=1e-9)


def test_from_raw_homogeneous_is_normalized():
    cfg, gamma = ContestConfig.from_raw_homogeneous(3, CostSpec.power(2.0))
    assert cfg.normalized
    assert best_response(cfg, 0, 2.0) == pytest.approx(1.0, abs=1e-10)


def test_normalized_homogeneous_rejects_unnormalised_base():
    with pytest.raises(ValueError):
        ContestConfig.normalized_homogeneous(2, CostSpec.linear(2.0))


def test_logit_identity():
    c_hat = CostSpec.power(1.0)
    c = logit_transform(lambda x: x, c_hat, f_hat_prime=lambda x: 1.0 + 0 * x)
    for z in np.linspace(0, 5, 11):
        assert c.value(z) == pytest.approx(c_hat.value(z), abs=1e-9)


def test_logit_power_inverse():
    g = 0.5
    c = logit_transform(lambda x: x**g, CostSpec.linear(), f_hat_prime=lambda x: g * np.maximum(x, 1e-300) ** (g - 1))
    zs = np.linspace(0.05, 5, 100)
    assert np.allclose([c.value(z) for z in zs], zs ** (1 / g), rtol=1e-7)


def test_logit_linear_scaling():
    c = logit_transform(lambda x: 2 * x, CostSpec.monomial(1.0, 2.0), f_hat_prime=lambda x: 2.0 + 0 * x)
    zs = np.linspace(0.0, 5, 100)
    assert np.allclose([c.value(z) for z in zs], zs**2 / 4, rtol=1e-7, atol=1e-12)


def test_logit_rejects_decreasing():
    with pytest.raises(ValueError):
        logit_transform(lambda x: -x, CostSpec.linear(), f_hat_prime=lambda x: -1.0 + 0 * x)


def test_config_validation():
    with pytest.raises(ValueError):
        ContestConfig((CostSpec.linear(),))
    with pytest.raises(ValueError):
        ContestConfig((CostSpec.linear(), CostSpec.linear()), a=1.5)
