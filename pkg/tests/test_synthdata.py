import math

import numpy as np
import pytest

from gradconv import models as M
from gradconv import synthdata as SD
from gradconv.geometry import GeometryConfig, norm
from gradconv.rngtools import substream


def _glm(d=4):
    return M.glm_model(GeometryConfig.make(2.0, d))


class TestSampleCovariates:
    def test_sphere_isotropic_covariance(self):
        X = SD.sample_covariates("sphere_uniform", 1000, 3, 1.0, 0)
        Sigma = X.T @ X / 1000
        np.testing.assert_allclose(Sigma, np.eye(3) / 3.0, atol=0.05)
        np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-12)

    def test_rademacher_cube_exact_magnitudes(self):
        X = SD.sample_covariates("rademacher_cube", 50, 6, 0.7, 1)
        assert np.all(np.abs(X) == 0.7)

    def test_gaussian_clipped_inside_ball(self):
        X = SD.sample_covariates("gaussian_clipped", 500, 8, 1.0, 2)
        assert np.max(np.linalg.norm(X, axis=1)) <= 1.0 + 1e-15

    def test_unknown_tag_rejected(self):
        with pytest.raises(ValueError):
            SD.sample_covariates("bogus", 10, 2, 1.0, 0)


class TestGenerate:
    def test_glm_null_model_coin_flips(self):
        model = _glm()
        n = 4000
        data = SD.generate(model, np.zeros(4), n, 3)
        assert set(np.unique(data.y)) <= {0.0, 1.0}
        assert abs(data.y.mean() - 0.5) <= 3.0 / (2.0 * math.sqrt(n))

    def test_rr_noiseless_exact(self):
        model = M.rr_model(GeometryConfig.make(2.0, 4), c=1.0)
        w_star = np.full(4, 0.4)
        data = SD.generate(model, w_star, 100, 4, noise=SD.UniformNoise(0.0))
        np.testing.assert_allclose(data.y, data.X @ w_star, atol=1e-15)

    def test_glm_label_mean_matches_link(self):
        # +-R one-hot design at d = 1: conditional mean sigma(+-BR)
        model = _glm(d=1)
        w_star = np.array([1.0])
        data = SD.generate(model, w_star, 1_000_000, 5, dist="rademacher_cube")
        pos = data.X[:, 0] > 0
        p = float(model.link.value(np.array([1.0]))[0])
        for mask, target in ((pos, p), (~pos, 1 - p)):
            m = mask.sum()
            se = math.sqrt(target * (1 - target) / m)
            assert abs(data.y[mask].mean() - target) <= 3 * se

    def test_relu_labels_and_tie(self):
        model = M.relu_model(3)
        w_star = np.array([1.0, 0.0, 0.0])
        data = SD.generate(model, w_star, 200, 6)
        np.testing.assert_array_equal(data.y, np.where(data.X @ w_star >= 0, 1.0, -1.0))

    def test_infeasible_w_star_rejected(self):
        with pytest.raises(ValueError):
            SD.generate(_glm(), np.full(4, 1.0), 10, 0)  # ||w*|| = 2 > B

    def test_infeasible_y_bound_rejected(self):
        model = M.rr_model(GeometryConfig.make(2.0, 4), c=1.0, y_bound=1.0)
        with pytest.raises(ValueError):
            SD.generate(model, np.full(4, 0.4), 10, 0, noise=SD.UniformNoise(0.3))

    def test_determinism_bit_for_bit(self):
        model = _glm()
        a = SD.generate(model, np.full(4, 0.3), 128, 42)
        b = SD.generate(model, np.full(4, 0.3), 128, 42)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_feasibility_exact(self):
        model = _glm()
        data = SD.generate(model, np.full(4, 0.3), 500, 7)
        assert np.all(np.linalg.norm(data.X, axis=1) <= 1.0 + 1e-12)
        assert norm(data.w_star, 2.0) <= 1.0


class TestPopulationOracle:
    def test_gradient_vanishes_at_w_star_glm(self):
        model = _glm()
        w_star = np.full(4, 0.45)
        res = SD.population_oracle(model, w_star, w_star, 100_000, 8)
        assert np.linalg.norm(res["grad"]) <= 3 * res["grad_stderr"]

    def test_gradient_vanishes_at_w_star_rr(self):
        model = M.rr_model(GeometryConfig.make(2.0, 4), c=1.0)
        w_star = np.full(4, 0.45)
        res = SD.population_oracle(model, w_star, w_star, 100_000, 9,
                                   noise=SD.UniformNoise(0.3))
        assert np.linalg.norm(res["grad"]) <= 3 * res["grad_stderr"]

    def test_two_oracles_agree(self):
        model = _glm()
        w_star, w = np.full(4, 0.45), np.array([0.2, -0.3, 0.1, 0.4])
        a = SD.population_oracle(model, w_star, w, 100_000, 10)
        b = SD.population_oracle(model, w_star, w, 100_000, 11)
        joint = math.hypot(a["loss_stderr"], b["loss_stderr"])
        assert abs(a["loss"] - b["loss"]) <= 6 * joint

    def test_minimum_sample_count(self):
        with pytest.raises(ValueError):
            SD.population_oracle(_glm(), np.zeros(4), np.zeros(4), 10, 0)

    def test_paired_excess_nonnegative_at_minimizer(self):
        model = _glm()
        w_star = np.full(4, 0.45)
        res = SD.paired_excess_oracle(model, w_star, np.zeros(4), 50_000, 12)
        assert res["excess"] > 0
        res0 = SD.paired_excess_oracle(model, w_star, w_star, 50_000, 12)
        assert res0["excess"] == 0.0 and res0["excess_stderr"] == 0.0


class TestCovarianceSummary:
    def test_diagonal_toy(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        cov = SD.covariance_summary(X, np.array([1.0, 1.0]), cone_samples=100, seed_or_rng=0)
        np.testing.assert_allclose(cov.Sigma_hat, np.eye(2) / 2.0)
        assert cov.lambda_min == pytest.approx(0.5)

    def test_cone_membership_by_construction(self):
        rng = substream(0, "test/cone")
        support = np.array([0, 2])
        for _ in range(500):
            nu = SD.sample_cone_direction(rng, 5, support)
            off = np.setdiff1d(np.arange(5), support)
            assert np.abs(nu[off]).sum() <= np.abs(nu[support]).sum() + 1e-12

    def test_psi_min_vs_dense_grid_oracle(self):
        # d = 3, support {0, 1}: mesh 1e6 points, keep those inside the cone
        Sigma = np.diag([1.0, 0.5, 0.2])
        Sigma[0, 1] = Sigma[1, 0] = 0.1
        rng = np.random.default_rng(13)
        X = rng.multivariate_normal(np.zeros(3), Sigma, size=4000)
        w_star = np.array([0.5, -0.5, 0.0])
        cov = SD.covariance_summary(X, w_star, cone_samples=20_000, seed_or_rng=1)
        axis = np.linspace(-1, 1, 100)
        G = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        keep = np.abs(G[:, 2]) <= np.abs(G[:, 0]) + np.abs(G[:, 1])
        G = G[keep]
        G = G[np.linalg.norm(G, axis=1) > 1e-6]
        S = cov.Sigma_hat
        quots = np.einsum("ij,jk,ik->i", G, S, G) / np.einsum("ij,ij->i", G, G)
        assert cov.psi_min_estimate >= float(quots.min()) - 1e-3
        assert cov.psi_min_estimate >= 0

    def test_zero_matrix_signalled(self):
        with pytest.raises(ValueError):
            SD.covariance_summary(np.zeros((5, 3)), np.array([1.0, 0, 0]),
                                  cone_samples=10, seed_or_rng=0)

    def test_empty_support_signalled(self):
        X = np.eye(3)
        with pytest.raises(ValueError):
            SD.covariance_summary(X, np.zeros(3), cone_samples=10, seed_or_rng=0)


def test_cone_lemma_both_conclusions():
    # ||w||_1 <= ||w*||_1 forces nu = w - w* into the cone and
    # ||nu||_1 <= 2 sqrt(s) ||nu||_2
    rng = np.random.default_rng(14)
    for _ in range(1000):
        d = int(rng.integers(3, 9))
        s = int(rng.integers(1, d))
        w_star = np.zeros(d)
        w_star[:s] = rng.standard_normal(s)
        w = rng.standard_normal(d)
        l1_star = np.abs(w_star).sum()
        if np.abs(w).sum() > l1_star:
            w *= rng.random() * l1_star / np.abs(w).sum()
        nu = w - w_star
        mask = w_star != 0
        assert np.abs(nu[~mask]).sum() <= np.abs(nu[mask]).sum() + 1e-12
        assert np.abs(nu).sum() <= 2 * math.sqrt(s) * np.linalg.norm(nu) + 1e-12


def test_csv_round_trip(tmp_path):
    model = _glm()
    data = SD.generate(model, np.full(4, 0.3), 32, 99)
    path = tmp_path / "data.csv"
    SD.save_csv(data, path)
    text = path.read_text()
    assert text.startswith("# family=glm")
    back = SD.load_csv(path)
    np.testing.assert_array_equal(back.X, data.X)
    np.testing.assert_array_equal(back.y, data.y)
    np.testing.assert_array_equal(back.w_star, data.w_star)
    assert back.meta["seed"] == 99
