"""Exact t-SNE: sigma calibration, joint probabilities, gradient, descent.

The gradient is checked against central finite differences of the KL
objective; calibration is checked by recomputing the entropy of the
conditional distributions it returns.
"""

import numpy as np
import pytest

import drtune.tsne as tsne_mod
from drtune import (ConfigError, DivergenceError, DomainError, Embedding,
                    TsneConfig, available_backends, calibrate_sigmas,
                    joint_probabilities, kl_and_gradient, run_tsne)
from drtune.tsne import get_backend


def conditional_entropy_bits(D2, beta):
    """Independent recomputation of per-row entropy in bits."""
    n = D2.shape[0]
    H = np.zeros(n)
    for i in range(n):
        d = np.delete(D2[i], i)
        w = np.exp(-beta[i] * (d - d.min()))
        p = w / w.sum()
        H[i] = -np.sum(p * np.log2(np.maximum(p, 1e-300)))
    return H


def kl_value(P, Y):
    W = 1.0 / (1.0 + np.sum((Y[:, None, :] - Y[None, :, :]) ** 2, axis=-1))
    np.fill_diagonal(W, 0.0)
    Q = np.maximum(W / W.sum(), 1e-12)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


class TestTsneConfig:
    def test_defaults(self):
        config = TsneConfig(perplexity=10.0)
        assert config.n_iter == 1000
        assert config.learning_rate == 200.0
        assert config.early_exaggeration == 12.0
        assert config.exaggeration_iters == 250
        assert config.momentum_start == 0.5
        assert config.momentum_final == 0.8

    def test_rejects_nonpositive_perplexity(self):
        with pytest.raises(DomainError):
            TsneConfig(perplexity=0.0)

    def test_rejects_exaggeration_longer_than_run(self):
        with pytest.raises(DomainError):
            TsneConfig(perplexity=5.0, n_iter=100, exaggeration_iters=200)

    def test_rejects_bad_d_prime(self):
        with pytest.raises(DomainError):
            TsneConfig(perplexity=5.0, d_prime=0)


class TestEmbedding:
    def test_rejects_non_finite_coords(self):
        with pytest.raises(DomainError):
            Embedding(coords=np.array([[0.0, np.inf]]), params={})

    def test_rejects_negative_kl(self):
        with pytest.raises(DomainError):
            Embedding(coords=np.zeros((3, 2)), params={}, final_kl=-0.1)

    def test_optional_kl(self):
        emb = Embedding(coords=np.zeros((3, 2)), params={"perplexity": 5})
        assert emb.final_kl is None
        assert emb.n == 3
        assert emb.d_prime == 2


class TestCalibration:
    @pytest.mark.parametrize("perplexity", [5.0, 15.0, 30.0])
    def test_entropy_hits_target(self, perplexity):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100, 8))
        D2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
        cal = calibrate_sigmas(D2, perplexity)
        assert cal.converged.all()
        H = conditional_entropy_bits(D2, cal.beta)
        assert np.max(np.abs(H - np.log2(perplexity))) <= 1e-5

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 4))
        D2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
        cal = calibrate_sigmas(D2, 12.0)
        np.testing.assert_allclose(cal.cond_p.sum(axis=1), np.ones(40),
                                   atol=1e-12)
        np.testing.assert_array_equal(np.diag(cal.cond_p), np.zeros(40))

    def test_scale_covariance(self):
        # doubling all distances rescales beta but leaves p_{j|i} unchanged
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 5))
        D2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
        a = calibrate_sigmas(D2, 8.0)
        b = calibrate_sigmas(4.0 * D2, 8.0)
        np.testing.assert_allclose(b.cond_p, a.cond_p, atol=1e-7)

    def test_sigma_property(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(20, 3))
        D2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
        cal = calibrate_sigmas(D2, 6.0)
        np.testing.assert_allclose(cal.sigma, np.sqrt(1.0 / (2.0 * cal.beta)))


class TestJointProbabilities:
    def test_symmetric_and_normalized(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(25, 4))
        P = joint_probabilities(X, 8.0)
        np.testing.assert_allclose(P, P.T, atol=1e-15)
        assert P.sum() == pytest.approx(1.0, abs=1e-12)
        assert P.min() >= 0.0
        np.testing.assert_array_equal(np.diag(P), np.zeros(25))

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(12, 3))
        perm = rng.permutation(12)
        P = joint_probabilities(X, 5.0)
        P_perm = joint_probabilities(X[perm], 5.0)
        np.testing.assert_allclose(P_perm, P[np.ix_(perm, perm)], atol=1e-10)

    def test_floor_applied(self):
        # two far-apart tight clusters: cross-cluster entries hit the floor
        rng = np.random.default_rng(6)
        X = np.concatenate([rng.normal(0, 0.01, size=(8, 2)),
                            rng.normal(1000, 0.01, size=(8, 2))])
        P = joint_probabilities(X, 4.0)
        off = P[:8, 8:]
        assert off.min() > 0.0


class TestGradient:
    def test_matches_central_differences(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(20, 4))
        P = joint_probabilities(X, 6.0)
        Y = rng.normal(scale=0.5, size=(20, 2))
        _, grad = kl_and_gradient(P, Y)
        h = 1e-6
        fd = np.zeros_like(Y)
        for i in range(20):
            for j in range(2):
                Yp, Ym = Y.copy(), Y.copy()
                Yp[i, j] += h
                Ym[i, j] -= h
                fd[i, j] = (kl_value(P, Yp) - kl_value(P, Ym)) / (2 * h)
        rel = np.linalg.norm(grad - fd) / np.linalg.norm(fd)
        assert rel < 1e-4

    def test_gradient_sums_to_zero(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(15, 3))
        P = joint_probabilities(X, 5.0)
        Y = rng.normal(size=(15, 2))
        _, grad = kl_and_gradient(P, Y, alpha=12.0)
        assert np.abs(grad.sum(axis=0)).max() < 1e-8

    def test_kl_value_matches_oracle(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(14, 3))
        P = joint_probabilities(X, 5.0)
        Y = rng.normal(size=(14, 2))
        kl, _ = kl_and_gradient(P, Y)
        assert kl == pytest.approx(kl_value(P, Y), abs=1e-10)

    def test_kl_reported_for_plain_p_under_exaggeration(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(12, 3))
        P = joint_probabilities(X, 4.0)
        Y = rng.normal(size=(12, 2))
        kl_plain, _ = kl_and_gradient(P, Y, alpha=1.0)
        kl_exag, grad_exag = kl_and_gradient(P, Y, alpha=12.0)
        assert kl_exag == pytest.approx(kl_plain, abs=1e-12)
        _, grad_plain = kl_and_gradient(P, Y, alpha=1.0)
        assert not np.allclose(grad_exag, grad_plain)


class TestBackends:
    def test_python_backend_always_available(self):
        assert "python" in available_backends()

    def test_backends_agree_on_single_call(self):
        names = available_backends()
        if len(names) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(11)
        X = rng.normal(size=(18, 4))
        P = joint_probabilities(X, 6.0)
        Y = rng.normal(size=(18, 2))
        results = {}
        for name in names:
            results[name] = kl_and_gradient(P, Y, alpha=4.0, backend=name)
        kl_a, grad_a = results["python"]
        kl_b, grad_b = results["compiled"]
        assert kl_b == pytest.approx(kl_a, rel=1e-9, abs=1e-12)
        np.testing.assert_allclose(grad_b, grad_a, rtol=1e-9, atol=1e-12)

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv(tsne_mod.BACKEND_ENV, "python")
        backend = get_backend()
        assert backend.COMPILED is False

    def test_unknown_backend_rejected(self):
        with pytest.raises(ConfigError):
            get_backend("fortran")


class TestRunTsne:
    def test_two_blob_separation(self):
        rng = np.random.default_rng(12)
        X = np.concatenate([rng.normal(0, 1, size=(20, 5)),
                            rng.normal(9, 1, size=(20, 5))])
        emb = run_tsne(X, TsneConfig(perplexity=10.0, n_iter=500,
                                     exaggeration_iters=150, seed=0))
        centers = [emb.coords[:20].mean(axis=0), emb.coords[20:].mean(axis=0)]
        spread = max(emb.coords[:20].std(), emb.coords[20:].std())
        gap = np.linalg.norm(centers[0] - centers[1])
        assert gap > 2 * spread

    def test_embedding_centered(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(30, 4))
        emb = run_tsne(X, TsneConfig(perplexity=8.0, n_iter=300,
                                     exaggeration_iters=100, seed=1))
        assert np.abs(emb.coords.mean(axis=0)).max() < 1e-9

    def test_seed_reproducible(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(20, 3))
        config = TsneConfig(perplexity=6.0, n_iter=260, exaggeration_iters=120,
                            seed=7)
        a = run_tsne(X, config)
        b = run_tsne(X, config)
        np.testing.assert_array_equal(a.coords, b.coords)
        assert a.final_kl == b.final_kl

    def test_seed_changes_init(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(20, 3))
        a = run_tsne(X, TsneConfig(perplexity=6.0, n_iter=260,
                                   exaggeration_iters=120, seed=1))
        b = run_tsne(X, TsneConfig(perplexity=6.0, n_iter=260,
                                   exaggeration_iters=120, seed=2))
        assert not np.array_equal(a.coords, b.coords)

    def test_final_kl_non_negative(self):
        rng = np.random.default_rng(16)
        X = rng.normal(size=(16, 3))
        emb = run_tsne(X, TsneConfig(perplexity=5.0, n_iter=260,
                                     exaggeration_iters=120, seed=3))
        assert emb.final_kl is not None
        assert emb.final_kl >= 0.0
        assert np.isfinite(emb.final_kl)

    def test_params_echoed(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(12, 3))
        emb = run_tsne(X, TsneConfig(perplexity=4.0, n_iter=260,
                                     exaggeration_iters=100, seed=0))
        assert emb.params["perplexity"] == 4.0
        assert emb.params["early_exaggeration"] == 12.0

    def test_rejects_tiny_datasets(self):
        with pytest.raises(DomainError):
            run_tsne(np.zeros((4, 3)), TsneConfig(perplexity=2.0))

    def test_rejects_perplexity_above_n_minus_1(self):
        rng = np.random.default_rng(18)
        X = rng.normal(size=(10, 3))
        with pytest.raises(DomainError):
            run_tsne(X, TsneConfig(perplexity=10.0))

    def test_perplexity_n_minus_1_allowed(self):
        rng = np.random.default_rng(19)
        X = rng.normal(size=(8, 3))
        emb = run_tsne(X, TsneConfig(perplexity=7.0, n_iter=260,
                                     exaggeration_iters=100, seed=0))
        assert emb.coords.shape == (8, 2)

    def test_divergence_reports_iteration(self):
        rng = np.random.default_rng(20)
        X = rng.normal(size=(12, 3))
        config = TsneConfig(perplexity=4.0, n_iter=300, exaggeration_iters=100,
                            learning_rate=1e300, seed=0)
        with pytest.raises(DivergenceError) as excinfo:
            run_tsne(X, config)
        assert excinfo.value.iteration >= 0

    def test_three_dimensional_target(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(15, 5))
        emb = run_tsne(X, TsneConfig(perplexity=5.0, d_prime=3, n_iter=260,
                                     exaggeration_iters=100, seed=0))
        assert emb.coords.shape == (15, 3)
