import math

import numpy as np
import pytest

from gradconv import models as M
from gradconv.geometry import GeometryConfig
from gradconv.synthdata import UniformNoise


def _geom(d=4, R=1.0, B=1.0):
    return GeometryConfig.make(2.0, d, R=R, B=B)


def _e1(d=4):
    e = np.zeros(d)
    e[0] = 1.0
    return e


class TestLossValues:
    def test_glm_logistic_at_origin(self):
        model = M.glm_model(_geom())
        # sigma(0) = 1/2, so the squared error against label 1 is 1/4
        assert M.loss(model, np.zeros(4), _e1(), 1.0) == pytest.approx(0.25)

    def test_rr_zero_residual(self):
        model = M.rr_model(_geom(), c=1.0)
        w = np.full(4, 0.3)
        x = np.full(4, 0.4)
        assert M.loss(model, w, x, float(w @ x)) == 0.0

    def test_rr_saturates_at_c2_over_6(self):
        model = M.rr_model(_geom(), c=1.0)
        # residual 2 >= c = 1 lands on the constant plateau c^2/6
        assert M.loss(model, _e1(), _e1(), -1.0) == pytest.approx(1.0 / 6.0)

    def test_dimension_mismatch_rejected(self):
        model = M.glm_model(_geom())
        with pytest.raises(ValueError):
            M.loss(model, np.zeros(3), _e1(4), 1.0)


class TestGradients:
    def test_glm_logistic_symbolic(self):
        model = M.glm_model(_geom())
        # 2 (1/2 - 1) * 1/4 = -1/4 along x = e1
        np.testing.assert_allclose(
            M.grad(model, np.zeros(4), _e1(), 1.0), -0.25 * _e1(), atol=1e-15
        )

    def test_relu_indicator_off(self):
        model = M.relu_model(3)
        w, x = np.array([1.0, 0, 0]), np.array([0.5, 0.1, 0])
        np.testing.assert_array_equal(M.grad(model, w, x, 1.0), np.zeros(3))

    def test_relu_boundary_tie_active(self):
        model = M.relu_model(3)
        w, x = np.array([1.0, 0, 0]), np.array([0.0, 1.0, 0])
        np.testing.assert_array_equal(M.grad(model, w, x, 1.0), -x)
        np.testing.assert_array_equal(M.grad(model, w, x, -1.0), x)

    def test_rr_vanishes_past_c(self):
        model = M.rr_model(_geom(), c=1.0)
        np.testing.assert_array_equal(
            M.grad(model, _e1(), _e1(), -1.0), np.zeros(4)
        )


class TestHessians:
    def test_glm_logistic_symbolic(self):
        model = M.glm_model(_geom())
        # 2 sigma'(0)^2 + 2 (sigma(0) - 1) sigma''(0) = 2/16 + 0 = 1/8
        H = M.hessian(model, np.zeros(4), _e1(), 1.0)
        np.testing.assert_allclose(H, 0.125 * np.outer(_e1(), _e1()), atol=1e-15)

    def test_zero_covariate(self):
        model = M.glm_model(_geom())
        np.testing.assert_array_equal(
            M.hessian(model, np.ones(4), np.zeros(4), 1.0), np.zeros((4, 4))
        )

    def test_rr_vanishes_past_c(self):
        model = M.rr_model(_geom(), c=1.0)
        np.testing.assert_array_equal(
            M.hessian(model, _e1(), _e1(), -1.0), np.zeros((4, 4))
        )

    def test_relu_rejected(self):
        model = M.relu_model(3)
        with pytest.raises(ValueError):
            M.hessian(model, np.ones(3), np.ones(3), 1.0)


def _fd_grad(model, w, x, y, h=1e-5):
    g = np.zeros_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        g[j] = (M.loss(model, w + e, x, y) - M.loss(model, w - e, x, y)) / (2 * h)
    return g


def _fd_hess(model, w, x, y, h=1e-5):
    H = np.zeros((w.size, w.size))
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        H[:, j] = (M.grad(model, w + e, x, y) - M.grad(model, w - e, x, y)) / (2 * h)
    return 0.5 * (H + H.T)


def _smooth_specs():
    return [
        M.glm_model(_geom(), "logistic"),
        M.glm_model(_geom(), "probit"),
        M.rr_model(_geom(), c=1.0),
        M.rr_model(_geom()),
    ]


def _random_point(model, rng):
    w = rng.standard_normal(4)
    w *= rng.random() / max(np.linalg.norm(w), 1e-12)
    x = rng.standard_normal(4)
    x *= rng.random() / max(np.linalg.norm(x), 1e-12)
    if model.family == "glm":
        y = float(rng.random())
    else:
        y = float(rng.uniform(-1.3, 1.3))
    return w, x, y


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(10)
    for model in _smooth_specs():
        for _ in range(250):
            w, x, y = _random_point(model, rng)
            g = M.grad(model, w, x, y)
            fd = _fd_grad(model, w, x, y)
            assert np.max(np.abs(fd - g)) <= 1e-5 * max(1.0, np.max(np.abs(g)))


def test_hessian_matches_finite_differences():
    rng = np.random.default_rng(11)
    for model in _smooth_specs():
        for _ in range(100):
            w, x, y = _random_point(model, rng)
            H = M.hessian(model, w, x, y)
            fd = _fd_hess(model, w, x, y)
            assert np.max(np.abs(fd - H)) <= 1e-4 * max(1.0, np.max(np.abs(H)))


class TestRegularityConstants:
    def test_logistic_c_sigma_at_unit_radius(self):
        model = M.glm_model(_geom())
        consts = model.ensure_constants()
        # sigma' decreases in |s|, so the floor sits at s = BR = 1
        assert consts.c_lower == pytest.approx(math.e / (1 + math.e) ** 2, abs=1e-8)
        assert consts.C_upper == 1.0  # slope/curvature suprema < 1, clamped up
        assert consts.grad_range_G == pytest.approx(2.0)
        assert consts.loss_smoothness_H == pytest.approx(6.0)

    def test_logistic_degenerate_interval(self):
        model = M.glm_model(_geom(B=1e-12))
        consts = M.regularity_constants(model)
        assert consts.c_lower == pytest.approx(0.25, abs=1e-9)

    def test_tukey_h_prime_monte_carlo_vs_analytic(self):
        # zeta ~ U[-a, a]: h'(0) = E rho''(zeta) = (1 - (a/c)^2)^2 exactly
        model = M.rr_model(_geom(), c=1.0)
        noise = UniformNoise(0.3)
        consts = M.regularity_constants(
            model, noise_sampler=noise, rng=np.random.default_rng(5)
        )
        analytic = (1.0 - 0.3**2) ** 2
        assert abs(consts.c_lower - analytic) <= 4 * max(consts.c_lower_stderr, 1e-6)
        assert consts.c_lower_stderr > 0

    def test_degenerate_model_signalled(self):
        model = M.rr_model(_geom(), c=1.0)
        bad_noise = UniformNoise(5.0)  # noise swamps the descending rho'
        with pytest.raises(M.DegenerateModelError):
            M.regularity_constants(model, noise_sampler=bad_noise,
                                   rng=np.random.default_rng(6))


def test_derivative_bounds_on_grid():
    for model in _smooth_specs():
        consts = model.ensure_constants(
            noise_sampler=UniformNoise(0.3) if model.family == "robust_regression" else None,
            rng=np.random.default_rng(7),
        )
        lo, hi = consts.interval_S
        s = np.linspace(lo, hi, 10_000)
        if model.family == "glm":
            assert np.all(np.abs(model.link.d1(s)) <= consts.C_upper + 1e-12)
            assert np.all(np.abs(model.link.d2(s)) <= consts.C_upper + 1e-12)
            assert np.all(model.link.d1(s) >= consts.c_lower - 1e-12)
        else:
            assert np.all(np.abs(model.rho.d1(s)) <= consts.C_upper + 1e-12)
            assert np.all(np.abs(model.rho.d2(s)) <= consts.C_upper + 1e-12)


def test_gradient_range_bound():
    rng = np.random.default_rng(12)
    for model in _smooth_specs():
        consts = model.ensure_constants(
            noise_sampler=UniformNoise(0.3) if model.family == "robust_regression" else None,
            rng=np.random.default_rng(8),
        )
        for _ in range(2500):
            w, x, y = _random_point(model, rng)
            y = float(np.clip(y, 0, 1)) if model.family == "glm" else y
            g = M.grad(model, w, x, y)
            assert np.linalg.norm(g) <= consts.grad_range_G + 1e-12


def test_loss_smoothness_bound():
    rng = np.random.default_rng(13)
    for model in _smooth_specs():
        consts = model.constants or model.ensure_constants(
            noise_sampler=UniformNoise(0.3) if model.family == "robust_regression" else None,
        )
        for _ in range(500):
            w1, x, y = _random_point(model, rng)
            w2 = rng.standard_normal(4)
            w2 *= rng.random() / max(np.linalg.norm(w2), 1e-12)
            lhs = np.linalg.norm(M.grad(model, w1, x, y) - M.grad(model, w2, x, y))
            assert lhs <= consts.loss_smoothness_H * np.linalg.norm(w1 - w2) + 1e-12


def test_relu_geometry_forced():
    with pytest.raises(ValueError):
        M.ModelSpec(family="relu", geometry=GeometryConfig.make(2.0, 3, R=2.0))


def test_logistic_identities():
    link = M.LinkFunction("logistic")
    s = np.linspace(-8, 8, 1001)
    v = link.value(s)
    assert link.value(0.0) == pytest.approx(0.5)
    np.testing.assert_allclose(link.d1(s), v * (1 - v), atol=1e-14)
    h = 1e-6
    np.testing.assert_allclose(
        link.d2(s), (link.d1(s + h) - link.d1(s - h)) / (2 * h), atol=1e-7
    )
    np.testing.assert_allclose(
        link.d3(s), (link.d2(s + h) - link.d2(s - h)) / (2 * h), atol=1e-7
    )


def test_probit_identities():
    link = M.LinkFunction("probit")
    s = np.linspace(-5, 5, 801)
    h = 1e-6
    np.testing.assert_allclose(
        link.d1(s), (link.value(s + h) - link.value(s - h)) / (2 * h), atol=1e-9
    )
    np.testing.assert_allclose(
        link.d2(s), (link.d1(s + h) - link.d1(s - h)) / (2 * h), atol=1e-8
    )
    assert np.all(link.value(s) >= 0) and np.all(link.value(s) <= 1)
    assert np.all(link.d1(s) > 0)


def test_tukey_structure():
    rho = M.RobustRho(c_param=1.0)
    t = np.linspace(-3, 3, 1201)
    vals = rho.value(t)
    assert rho.value(0.0) == 0.0
    assert np.all(vals >= 0)
    np.testing.assert_allclose(rho.d1(t), -rho.d1(-t), atol=1e-15)  # odd
    assert np.all(vals[np.abs(t) >= 1.0] == pytest.approx(1.0 / 6.0))
    h = 1e-6
    interior = np.abs(np.abs(t) - 1.0) > 1e-3
    np.testing.assert_allclose(
        rho.d2(t)[interior],
        ((rho.d1(t + h) - rho.d1(t - h)) / (2 * h))[interior],
        atol=1e-8,
    )
