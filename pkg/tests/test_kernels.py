import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.linear_model import Ridge
from sklearn.pipeline import make_pipeline

from qkl.exceptions import InvalidArgumentError
from qkl.kernels import (
    Entangler,
    FeatureMapConfig,
    KernelMatrix,
    ReducedDensityEmbedding,
    center_gram,
    cosine_kernel,
    embed,
    gram,
    kernel_value,
    rbf_kernel,
    shot_estimate,
)
from qkl.quantum import density_matrix, partial_trace, random_layers_unitary


def points(n, d, seed=0):
    return np.random.default_rng(seed).uniform(0, 2 * np.pi, (n, d))


class TestFeatureMapConfig:
    def test_projection_sorted(self):
        assert FeatureMapConfig(3, projection=(2, 0)).projection == (0, 2)

    @pytest.mark.parametrize("proj", [(3,), (0, 0), ()])
    def test_bad_projection(self, proj):
        with pytest.raises(InvalidArgumentError):
            FeatureMapConfig(3, projection=proj)

    def test_unknown_entangler(self):
        with pytest.raises(InvalidArgumentError):
            Entangler("brickwork")

    def test_with_projection_keeps_unitary(self):
        cfg = FeatureMapConfig.haar(3, seed=1)
        u = cfg.unitary
        assert cfg.with_projection((1,)).unitary is u
        assert np.array_equal(FeatureMapConfig.haar(3, seed=1).with_projection((1,)).unitary, u)

    def test_layers_default_depth(self):
        cfg = FeatureMapConfig.layers(2, seed=4)
        assert np.allclose(cfg.unitary, random_layers_unitary(2, 4, np.random.default_rng(4)))

    def test_effective_qubits(self):
        assert FeatureMapConfig(4).effective_qubits == 4
        assert FeatureMapConfig(4, projection=(0, 3)).effective_qubits == 2


class TestKernelValues:
    @pytest.mark.parametrize("d", range(1, 9))
    def test_full_kernel_equals_cosine_product(self, d):
        cfg = FeatureMapConfig.haar(d, seed=d)
        X, Y = points(100, d, d), points(100, d, d + 100)
        for x, y in zip(X, Y):
            assert abs(kernel_value(x, y, cfg) - cosine_kernel(x, y)) <= 1e-10

    def test_projected_kernel_uses_reduced_states(self):
        cfg = FeatureMapConfig.haar(3, seed=0, projection=(1,))
        x, y = points(2, 3).tolist()
        full = FeatureMapConfig.haar(3, seed=0)
        ra = partial_trace(embed(x, full), (1,))
        rb = partial_trace(embed(y, full), (1,))
        assert np.isclose(kernel_value(x, y, cfg), np.trace(ra @ rb).real)

    def test_embed_is_a_state(self):
        rho = embed([0.4, 2.0, 5.1], FeatureMapConfig.haar(3, seed=2, projection=(0,)))
        assert np.isclose(np.trace(rho).real, 1.0)
        assert np.all(np.linalg.eigvalsh(rho) > -1e-12)

    def test_rbf_value(self):
        assert np.isclose(rbf_kernel([0, 0], [1, 1]), np.exp(-1.0))

    def test_angle_count_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            kernel_value([0.1], [0.1, 0.2], FeatureMapConfig(2))


class TestGram:
    @pytest.mark.parametrize("kernel", ["k", "quantum", "q", "qw", "rbf"])
    def test_symmetric_psd(self, kernel):
        X = points(30, 3)
        K = gram(X, kernel, FeatureMapConfig.haar(3, seed=5))
        assert isinstance(K, KernelMatrix)
        assert np.allclose(K.values, K.values.T)
        assert np.linalg.eigvalsh(K.values).min() >= -1e-10

    @pytest.mark.parametrize("kernel", ["k", "quantum", "q", "qw", "rbf"])
    def test_entries_match_pairwise(self, kernel):
        X, Y = points(4, 2, 1), points(3, 2, 2)
        cfg = FeatureMapConfig.haar(2, seed=3)
        K = gram(X, kernel, cfg, Y=Y).values
        single = {
            "k": cosine_kernel,
            "rbf": rbf_kernel,
            "quantum": lambda a, b: kernel_value(a, b, cfg),
            "q": lambda a, b: kernel_value(a, b, cfg.with_projection((0,))),
            "qw": lambda a, b: kernel_value(a, b, cfg.with_projection((1,))),
        }[kernel]
        expected = [[single(a, b) for b in Y] for a in X]
        assert K.shape == (4, 3)
        assert np.allclose(K, expected, atol=1e-12)

    def test_simulated_full_matches_analytic(self):
        X = points(40, 4)
        cfg = FeatureMapConfig.haar(4, seed=9)
        assert np.allclose(gram(X, "quantum", cfg).values, gram(X, "k").values, atol=1e-10)

    def test_biased_kernel_rank(self):
        K = gram(points(50, 4), "q", FeatureMapConfig.haar(4, seed=1)).values
        assert np.sum(np.linalg.eigvalsh(K) > 1e-10) <= 4

    def test_kinds(self):
        cfg = FeatureMapConfig(2)
        assert gram(points(3, 2), "q", cfg).kind == "biased"
        assert gram(points(3, 2), "qw", cfg).kind == "biased_wrong"
        assert gram(points(3, 2), "k").kind == "full"

    def test_quantum_kernel_needs_config(self):
        with pytest.raises(InvalidArgumentError):
            gram(points(3, 2), "q")

    def test_qw_needs_two_qubits(self):
        with pytest.raises(InvalidArgumentError):
            gram(points(3, 1), "qw", FeatureMapConfig(1))

    def test_unknown_kernel(self):
        with pytest.raises(InvalidArgumentError):
            gram(points(3, 2), "laplace")

    def test_nan_rejected(self):
        X = points(3, 2)
        X[1, 1] = np.nan
        with pytest.raises(InvalidArgumentError):
            gram(X, "k")


class TestCentering:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 25), st.integers(0, 10_000))
    def test_idempotent_and_zero_sums(self, n, seed):
        K = gram(points(n, 2, seed), "rbf")
        Kc = center_gram(K)
        assert Kc.centered
        assert np.allclose(center_gram(Kc).values, Kc.values, atol=1e-12)
        assert np.allclose(Kc.values.sum(axis=0), 0, atol=1e-10)

    def test_matches_projection_formula(self):
        K = gram(points(6, 2), "k").values
        H = np.eye(6) - np.ones((6, 6)) / 6
        assert np.allclose(center_gram(K).values, H @ K @ H)


class TestShotEstimate:
    def test_mean_and_variance(self):
        cfg = FeatureMapConfig.haar(2, seed=0)
        x, y = [0.3, 1.0], [0.9, 2.2]
        p = kernel_value(x, y, cfg)
        rng = np.random.default_rng(0)
        est = np.array([shot_estimate(x, y, cfg, 200, rng) for _ in range(3000)])
        assert abs(est.mean() - p) < 5 * np.sqrt(p * (1 - p) / 200 / 3000)
        assert np.isclose(est.var(), p * (1 - p) / 200, rtol=0.1)

    @pytest.mark.parametrize("shots", [0, -5])
    def test_needs_positive_shots(self, shots):
        with pytest.raises(InvalidArgumentError):
            shot_estimate([0.1], [0.2], FeatureMapConfig(1), shots)

    def test_full_kernel_only(self):
        with pytest.raises(InvalidArgumentError):
            shot_estimate([0.1, 0.2], [0.2, 0.3], FeatureMapConfig(2, projection=(0,)), 10)


class TestReducedDensityEmbedding:
    def test_linear_kernel_equals_projected_kernel(self):
        X = points(12, 3)
        emb = ReducedDensityEmbedding(random_state=4).fit(X)
        Z = emb.transform(X)
        assert Z.shape == (12, 4)
        cfg = FeatureMapConfig.haar(3, seed=4)
        assert np.allclose(Z @ Z.T, gram(X, "q", cfg).values, atol=1e-12)

    def test_full_state(self):
        X = points(5, 2)
        Z = ReducedDensityEmbedding(entangler="none", projection=None).fit_transform(X)
        assert np.allclose(Z @ Z.T, gram(X, "k").values, atol=1e-12)

    def test_get_params_and_clone(self):
        emb = ReducedDensityEmbedding(entangler="layers", depth=3, random_state=1)
        params = emb.get_params()
        assert params == {"entangler": "layers", "projection": (0,), "depth": 3, "random_state": 1}
        assert clone(emb).get_params() == params

    def test_pipeline(self):
        X = points(60, 3)
        cfg = FeatureMapConfig.haar(3, seed=2)
        rho = np.array([embed(x, cfg.with_projection((0,))) for x in X])
        y = np.real(rho[:, 0, 0] - rho[:, 1, 1])
        pipe = make_pipeline(ReducedDensityEmbedding(random_state=2), Ridge(alpha=1e-8)).fit(X, y)
        assert pipe.score(X, y) > 0.999

    def test_feature_count_checked(self):
        emb = ReducedDensityEmbedding(random_state=0).fit(points(5, 3))
        with pytest.raises(ValueError):
            emb.transform(points(5, 2))

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            ReducedDensityEmbedding().transform(points(2, 2))


def test_density_matrix_of_state_is_projector():
    rho = density_matrix(np.array([1, 1j]) / np.sqrt(2))
    assert np.allclose(rho @ rho, rho)
