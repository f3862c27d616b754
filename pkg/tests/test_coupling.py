import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hlmc import (CoeffSet, NoiseDraw, PhaseState, Scheme, SchemeConfig,
                  TwistedMetric, contraction_constants, couple_run,
                  epsilon_budget, fit_rate, pg_step,
                  pgp_step, rho_distance)


def test_metric_one_dimensional_values():
    # k = 1, gamma = 2 gives tau = 1/16, blocks a = 81/128, b = 7/32, c = 1/4
    metric = TwistedMetric.from_k(np.array([1.0]), gamma=2.0)
    assert metric.tau == pytest.approx(1 / 16)
    d1 = rho_distance(metric, PhaseState(np.array([1.0]), np.array([0.0])),
                      PhaseState(np.array([0.0]), np.array([0.0])))
    assert d1**2 == pytest.approx(81 / 128, abs=1e-15)
    d2 = rho_distance(metric, PhaseState(np.array([0.0]), np.array([1.0])),
                      PhaseState(np.array([0.0]), np.array([0.0])))
    assert d2**2 == pytest.approx(1 / 4, abs=1e-15)


def test_metric_zero_iff_equal(osc):
    metric = TwistedMetric.from_model(osc, 2.0)
    s = PhaseState(np.array([0.3, 1.0]), np.array([-1.0, 0.2]))
    assert rho_distance(metric, s, s) == 0.0
    t = PhaseState(np.array([0.3, 1.0]), np.array([-1.0, 0.2001]))
    assert rho_distance(metric, s, t) > 0


def test_metric_positive_definite_blocks(osc, logi, gauss):
    for model in (osc, logi, gauss):
        metric = TwistedMetric.from_model(model, 2.0)
        for j in range(model.d):
            block = metric.block(j)
            assert np.linalg.det(block) > 0
            assert np.trace(block) > 0


@settings(max_examples=50, deadline=None)
@given(gamma=st.floats(0.2, 8.0), kmin=st.floats(0.05, 5.0), spread=st.floats(1.0, 20.0))
def test_metric_positive_definite_generic(gamma, kmin, spread):
    metric = TwistedMetric.from_k(np.array([kmin, kmin * spread]), gamma)
    for j in range(2):
        assert np.linalg.det(metric.block(j)) > 0


def test_metric_equivalence_constants(osc):
    # min(1/(4 g^2), 9/128 + kappa/g^2) <= rho^2/|u|^2 <= max(l_k/g^2 + 1, 1.5/g^2)
    gamma = 2.0
    metric = TwistedMetric.from_model(osc, gamma)
    lower = min(0.25 / gamma**2, 9 / 128 + osc.kappa / gamma**2)
    upper = max(osc.l_k / gamma**2 + 1, 1.5 / gamma**2)
    rng = np.random.default_rng(8)
    zero = PhaseState(np.zeros(2), np.zeros(2))
    for _ in range(1000):
        u = rng.standard_normal(4)
        s = PhaseState(u[:2], u[2:])
        ratio = rho_distance(metric, s, zero) ** 2 / (u @ u)
        assert lower - 1e-12 <= ratio <= upper + 1e-12


def test_contraction_constants_exact_values():
    c = contraction_constants(1.0, 2.0, 10.0)
    assert c.tau == 1 / 16
    assert c.c == 0.125
    assert c.m1 == math.sqrt(56.0)
    assert c.m2 == 4.0


def test_contraction_constants_regime_switch():
    # large gamma: friction term gamma/8 no longer binds c
    c = contraction_constants(1.0, 10.0, 10.0)
    assert c.c == 0.25 / 10.0


def test_epsilon_budget_gaussian_unbounded(gauss):
    budget = epsilon_budget(gauss, gamma=2.0, eps=0.1, w2_init=1.0)
    assert budget.unbounded
    assert budget.h_max == math.inf
    assert budget.k_min == 0


def test_epsilon_budget_formula(osc):
    budget = epsilon_budget(osc, gamma=math.sqrt(2.0), eps=0.1, w2_init=1.0)
    # 1/h >= 64 sqrt(2) * 0.5 * sqrt(50) * 10 = 3200
    assert 1.0 / budget.h_max == pytest.approx(3200.0, rel=1e-12)
    assert budget.gamma_matches_convention
    m1 = contraction_constants(1.0, math.sqrt(2.0), 10.0).m1
    expected = math.ceil(3200.0 * (8 / math.sqrt(2.0)) * math.log(2 * m1 / 0.1))
    assert budget.k_min == expected


def test_one_step_contraction_pg_pgp(osc):
    # rho(after) <= e^{-c h} rho(before) for synchronously coupled pairs,
    # pathwise in the driving noise
    gamma, h, c = 2.0, 0.01, 0.125
    metric = TwistedMetric.from_model(osc, gamma)
    coeffs = CoeffSet.for_model(osc, gamma, h)
    rng = np.random.default_rng(101)
    factor = math.exp(-c * h)
    for stepper in (pg_step, pgp_step):
        worst = -np.inf
        for _ in range(1000):
            s1 = PhaseState(*rng.standard_normal((2, 2)) * 2)
            s2 = PhaseState(*rng.standard_normal((2, 2)) * 2)
            n = NoiseDraw(rng.standard_normal(2), rng.standard_normal(2))
            before = rho_distance(metric, s1, s2)
            after = rho_distance(metric, stepper(osc, coeffs, s1, n),
                                 stepper(osc, coeffs, s2, n))
            worst = max(worst, after - factor * before)
        assert worst <= 1e-12


def test_couple_run_equal_inits_stay_zero(osc):
    config = SchemeConfig(Scheme.PGP, gamma=2.0, h=0.01, seed=7)
    init = PhaseState(np.ones(2), np.ones(2))
    res = couple_run(osc, config, init, init, n_steps=50, replicas=3)
    assert np.all(res.mean_rho == 0)
    assert np.all(res.mean_euclid == 0)


def test_couple_run_contracts_at_reported_rate(osc):
    config = SchemeConfig(Scheme.PGP, gamma=2.0, h=0.01, seed=11)
    res = couple_run(osc, config, PhaseState(np.ones(2), np.ones(2)),
                     PhaseState(-np.ones(2), -np.ones(2)),
                     n_steps=600, replicas=50)
    fit = fit_rate(res.times, res.mean_rho)
    # the contraction theory guarantees decay at least at rate c = 0.125
    assert fit.rate >= 0.125
    assert fit.r_squared >= 0.99


def test_couple_run_euclid_bounded_by_twisted_envelope(osc):
    # |diff_t| <= m1 e^{-c t} |diff_0| holds pathwise, hence for the mean
    config = SchemeConfig(Scheme.PG, gamma=2.0, h=0.01, seed=13)
    res = couple_run(osc, config, PhaseState(np.ones(2), np.ones(2)),
                     PhaseState(-np.ones(2), -np.ones(2)),
                     n_steps=400, replicas=20)
    consts = contraction_constants(osc.kappa, 2.0, osc.l_k)
    envelope = consts.m1 * np.exp(-consts.c * res.times) * res.mean_euclid[0]
    assert np.all(res.mean_euclid <= envelope + 1e-9)


def test_couple_run_noise_independent_for_linear_gradients(gauss):
    # with G linear (here zero) the difference process never sees the noise:
    # different master seeds give identical distance series
    init_a = PhaseState(np.ones(2), np.ones(2))
    init_b = PhaseState(-np.ones(2), -np.ones(2))
    series = []
    for seed in (1, 999):
        for scheme in (Scheme.PG, Scheme.PGP, Scheme.OBABO):
            config = SchemeConfig(scheme, gamma=2.0, h=0.05, seed=seed)
            res = couple_run(gauss, config, init_a, init_b, n_steps=80, replicas=2)
            series.append(res.mean_rho)
    for i in range(3):
        assert np.max(np.abs(series[i] - series[i + 3])) <= 1e-12


def test_couple_run_deterministic(osc):
    config = SchemeConfig(Scheme.OBABO, gamma=2.0, h=0.01, seed=21)
    init_a = PhaseState(np.ones(2), np.ones(2))
    init_b = PhaseState(np.zeros(2), np.zeros(2))
    r1 = couple_run(osc, config, init_a, init_b, 100, 5)
    r2 = couple_run(osc, config, init_a, init_b, 100, 5)
    assert np.array_equal(r1.mean_rho, r2.mean_rho)
    assert np.array_equal(r1.se_euclid, r2.se_euclid)


def test_fit_rate_exact_exponential():
    t = np.arange(200) * 0.01
    fit = fit_rate(t, np.exp(-0.125 * t))
    assert fit.rate == pytest.approx(0.125, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_rate_constant_series():
    t = np.arange(50) * 0.1
    fit = fit_rate(t, np.ones(50) * 3.0)
    assert fit.rate == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == 1.0


def test_fit_rate_drops_floor_points():
    t = np.arange(100) * 1.0
    d = np.exp(-0.2 * t)  # stays above the 1e-10 relative floor for t < 115
    d[60:] = 1e-300  # push the tail far below the floor
    fit = fit_rate(t, d)
    assert fit.n_points == 55  # 5 leading points dropped, 40 floored
    assert fit.rate == pytest.approx(0.2, abs=1e-9)


def test_fit_rate_too_few_points():
    t = np.arange(8) * 1.0
    with pytest.raises(ValueError):
        fit_rate(t, np.exp(-t))


def test_couple_run_validates(osc):
    config = SchemeConfig(Scheme.PG, gamma=2.0, h=0.01, seed=1)
    init = PhaseState(np.ones(2), np.ones(2))
    with pytest.raises(ValueError):
        couple_run(osc, config, init, init, n_steps=10, replicas=0)
    with pytest.raises(ValueError):
        couple_run(osc, config, init, PhaseState(np.ones(3), np.ones(3)), 10, 2)
