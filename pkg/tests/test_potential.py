import numpy as np
import pytest

from hlmc import (PhaseState, gaussian_model, grad_u, model_by_name, u_value,
                  validate_step)


def test_gaussian_gradient_is_pure_quadratic():
    m = gaussian_model([1.0, 10.0])
    assert np.allclose(grad_u(m, np.array([1.0, 1.0])), [1.0, 10.0])
    assert np.allclose(m.grad_g(np.array([3.0, -2.0])), [0.0, 0.0])


def test_oscillation_gradient_at_origin(osc):
    assert np.allclose(osc.grad_g(np.zeros(2)), [0.125, 0.125])
    assert np.allclose(grad_u(osc, np.zeros(2)), [0.125, 0.125])


def test_logistic_gradient_at_origin(logi):
    assert np.allclose(logi.grad_g(np.zeros(2)), [0.05, 0.10])


def test_model_constants(osc, logi, gauss):
    assert osc.l_g == 0.5
    assert logi.l_g == 0.4
    assert gauss.l_g == 0.0
    for m in (osc, logi, gauss):
        assert m.kappa == 1.0
        assert m.l_k == 10.0
        assert m.kappa == m.k.min() and m.l_k == m.k.max()


def test_gaussian_rejects_nonpositive_k():
    with pytest.raises(ValueError):
        gaussian_model([1.0, 0.0])
    with pytest.raises(ValueError):
        gaussian_model([-1.0, 2.0])


def test_model_by_name_unknown():
    with pytest.raises(ValueError):
        model_by_name("nope")


def test_phase_state_shape_mismatch():
    with pytest.raises(ValueError):
        PhaseState(np.zeros(2), np.zeros(3))


def test_grad_dimension_mismatch(osc):
    with pytest.raises(ValueError):
        grad_u(osc, np.zeros(3))


@pytest.mark.parametrize("name", ["oscillation", "logistic"])
def test_gradient_matches_finite_differences(name):
    # central differences of the scalar G, step 1e-5, agreement O(step^2)
    m = model_by_name(name)
    rng = np.random.default_rng(7)
    step = 1e-5
    for _ in range(25):
        x = rng.standard_normal(2) * 2.0
        g = m.grad_g(x)
        for j in range(2):
            e = np.zeros(2)
            e[j] = step
            fd = (m.g(x + e) - m.g(x - e)) / (2 * step)
            assert abs(fd - g[j]) <= 1e-9 * (1.0 + abs(g[j]))


@pytest.mark.parametrize("name", ["oscillation", "logistic", "gaussian"])
def test_perturbation_convex_and_lipschitz(name):
    m = model_by_name(name)
    rng = np.random.default_rng(11)
    for _ in range(100):
        x, y = rng.standard_normal((2, 2)) * 3.0
        dg = m.grad_g(x) - m.grad_g(y)
        assert dg @ (x - y) >= -1e-12
        assert np.linalg.norm(dg) <= m.l_g * np.linalg.norm(x - y) + 1e-12


def test_u_value_consistency(osc):
    x = np.array([0.3, -0.7])
    expected = 0.5 * x[0] ** 2 + 5.0 * x[1] ** 2 + osc.g(x)
    assert np.isclose(u_value(osc, x), expected)


def test_validate_step_section6_config(osc):
    rep = validate_step(osc, gamma=2.0, h=0.01, scheme="pgp")
    assert rep.passed
    assert rep.h_max == pytest.approx(0.05)


def test_validate_step_pgp_stiffness_violation(osc):
    rep = validate_step(osc, gamma=2.0, h=0.06, scheme="pgp")
    assert not rep.passed
    failing = [c.name for c in rep.conditions if not c.satisfied]
    assert failing == ["h <= gamma/(4*l_k)"]
    assert rep.binding == "h <= gamma/(4*l_k)"


def test_validate_step_pg_boundary(gauss):
    # h at exactly 1/(2 gamma) passes for pg when friction binds (l_g = 0)
    rep = validate_step(gauss, gamma=4.0, h=1.0 / 8.0, scheme="pg")
    assert rep.passed
    assert rep.binding == "h <= 1/(2*gamma)"


def test_validate_step_reports_nonzero_gradient_at_origin(osc):
    rep = validate_step(osc, gamma=2.0, h=0.01, scheme="pg")
    assert rep.passed
    assert any("grad G(0)" in note for note in rep.notes)


def test_validate_step_rejects_obabo(osc):
    with pytest.raises(ValueError):
        validate_step(osc, 2.0, 0.01, "obabo")
