import math

import numpy as np
import pytest

from gradconv.geometry import (
    GeometryConfig,
    dual_exponent,
    dual_norm_witness,
    norm,
    project,
    smoothness_constant,
)


def test_norm_pythagorean():
    assert norm(np.array([3.0, 4.0]), 2.0) == pytest.approx(5.0)


def test_norm_zero_vector():
    for p in (1.0, 2.0, 3.5, math.inf):
        assert norm(np.zeros(7), p) == 0.0


def test_norm_inf_unit_entries():
    assert norm(np.array([1.0, -1.0, 1.0]), math.inf) == 1.0


def test_norm_rejects_p_below_one():
    with pytest.raises(ValueError):
        norm(np.ones(3), 0.5)


def test_dual_exponent_conventions():
    assert dual_exponent(math.inf) == 1.0
    assert dual_exponent(1.0) == math.inf
    assert dual_exponent(2.0) == 2.0
    assert dual_exponent(4.0) == pytest.approx(4.0 / 3.0)


def test_smoothness_constant_finite_p():
    assert smoothness_constant(2.0, 10) == 1.0
    assert smoothness_constant(4.0, 10) == 3.0


def test_smoothness_constant_inf_log_proxy():
    # q = ln d with d = e^6 gives beta = q - 1 = 5
    d = round(math.e**6)
    assert smoothness_constant(math.inf, d) == pytest.approx(5.0, abs=1e-2)
    assert smoothness_constant(math.inf, 3) == 1.0  # floor q = 2


def test_smoothness_constant_rejects_small_p():
    with pytest.raises(ValueError):
        smoothness_constant(1.5, 4)


def test_project_l2_radial_scaling():
    np.testing.assert_allclose(project(np.array([3.0, 4.0]), 2, 1.0), [0.6, 0.8])


def test_project_interior_fixed():
    v = np.array([0.1, 0.2])
    np.testing.assert_array_equal(project(v, 1, 1.0), v)
    np.testing.assert_array_equal(project(v, 2, 1.0), v)


def test_project_l1_corner():
    np.testing.assert_allclose(project(np.array([1.0, 1.0]), 1, 1.0), [0.5, 0.5])


def test_project_rejects_bad_exponent():
    with pytest.raises(ValueError):
        project(np.ones(3), 3, 1.0)


def _l1_projection_kkt_oracle(v, radius, thetas=200_000):
    """Exhaustive threshold search: the soft-threshold theta whose shrunk
    vector lands exactly on the l1 sphere (or v itself if feasible)."""
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    grid = np.linspace(0.0, a.max(), thetas)
    masses = np.maximum(a[None, :] - grid[:, None], 0.0).sum(axis=1)
    k = int(np.argmin(np.abs(masses - radius)))
    return np.sign(v) * np.maximum(a - grid[k], 0.0)


def test_project_l1_matches_kkt_threshold_search():
    rng = np.random.default_rng(0)
    for _ in range(25):
        d = rng.integers(2, 7)
        v = rng.standard_normal(d) * 2.0
        r = rng.uniform(0.3, 2.0)
        np.testing.assert_allclose(
            project(v, 1, r), _l1_projection_kkt_oracle(v, r), atol=5e-5
        )


def test_projection_idempotent():
    rng = np.random.default_rng(1)
    for exponent in (1, 2):
        for _ in range(20):
            v = rng.standard_normal(6) * 3.0
            w = project(v, exponent, 1.0)
            np.testing.assert_allclose(project(w, exponent, 1.0), w, atol=1e-14)
            assert norm(w, float(exponent)) <= 1.0 + 1e-12


def test_projection_beats_random_feasible_points():
    rng = np.random.default_rng(2)
    for exponent in (1, 2):
        v = rng.standard_normal(5) * 2.0
        w = project(v, exponent, 1.0)
        best = np.linalg.norm(w - v)
        pts = rng.standard_normal((10_000, 5))
        scale = (np.abs(pts).sum(1) if exponent == 1 else np.linalg.norm(pts, axis=1))
        pts = pts / scale[:, None] * rng.random((10_000, 1))
        assert np.all(np.linalg.norm(pts - v, axis=1) >= best - 1e-9)


def test_duality_with_analytic_witness():
    rng = np.random.default_rng(3)
    for p in (1.0, 2.0, math.inf):
        for _ in range(50):
            v = rng.standard_normal(8)
            u = dual_norm_witness(v, p)
            q = dual_exponent(p)
            assert norm(u, q) <= 1.0 + 1e-12
            assert abs(float(u @ v) - norm(v, p)) <= 1e-9


def test_beta_smoothness_at_p2():
    # 0.5||x||^2 <= 0.5||y||^2 + <y, x - y> + (beta/2)||x - y||^2 with beta = 1
    rng = np.random.default_rng(4)
    for _ in range(300):
        x, y = rng.standard_normal(6), rng.standard_normal(6)
        lhs = 0.5 * np.linalg.norm(x) ** 2
        rhs = 0.5 * np.linalg.norm(y) ** 2 + y @ (x - y) + 0.5 * np.linalg.norm(x - y) ** 2
        assert lhs <= rhs + 1e-9


def test_geometry_config_validation():
    cfg = GeometryConfig.make(2.0, 5)
    assert cfg.beta == 1.0 and cfg.dual_exponent == 2.0
    with pytest.raises(ValueError):
        GeometryConfig(primal_exponent=2.0, dual_exponent=3.0, beta=1.0,
                       radius_R=1.0, radius_B=1.0)
    with pytest.raises(ValueError):
        GeometryConfig(primal_exponent=4.0, dual_exponent=4.0 / 3.0, beta=1.0,
                       radius_R=1.0, radius_B=1.0)
    with pytest.raises(ValueError):
        GeometryConfig.make(2.0, 5, R=-1.0)
    inf_cfg = GeometryConfig.make(math.inf, 100)
    assert inf_cfg.dual_exponent == 1.0
    assert inf_cfg.beta == pytest.approx(max(2.0, math.log(100)) - 1.0)
