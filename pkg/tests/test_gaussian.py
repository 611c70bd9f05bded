import numpy as np
import pytest

from padim.embedding import make_random_reduction
from padim.errors import DataError
from padim.gaussian import (
    PadimModel,
    ensemble_sum,
    fit,
    fit_per_layer,
    load_model,
    mahalanobis_map,
    save_model,
    solve_lower_batched,
)
from padim.imageops import PreprocessConfig


def naive_covariance(vectors, epsilon):
    """Two-loop outer-product accumulation, independent of the fit path."""
    n = len(vectors)
    mu = sum(vectors) / n
    cov = np.zeros((len(mu), len(mu)))
    for x in vectors:
        d = x - mu
        cov += np.outer(d, d)
    return mu, cov / (n - 1) + epsilon * np.eye(len(mu))


def random_grids(rng, n, d, g0, g1, scale=1.0):
    return [rng.normal(scale=scale, size=(d, g0, g1)).astype(np.float32)
            for _ in range(n)]


class TestFit:
    def test_identical_grids_give_epsilon_identity(self, rng):
        g = rng.normal(size=(4, 3, 3)).astype(np.float32)
        model = fit([g, g.copy()], epsilon=0.5)
        cov = model.covariance()
        for i in range(3):
            for j in range(3):
                np.testing.assert_allclose(cov[i, j], 0.5 * np.eye(4), atol=1e-6)
                np.testing.assert_allclose(model.mu[i, j], g[:, i, j], atol=1e-6)

    def test_scalar_case_by_hand(self):
        # samples {0, 2}: mean 1, unbiased variance 2, plus epsilon
        grids = [np.full((1, 1, 1), 0.0, dtype=np.float32),
                 np.full((1, 1, 1), 2.0, dtype=np.float32)]
        model = fit(grids, epsilon=0.01)
        assert model.mu[0, 0, 0] == pytest.approx(1.0)
        assert model.covariance()[0, 0, 0, 0] == pytest.approx(2.01, abs=1e-6)

    def test_matches_naive_oracle_d2(self, rng):
        vecs = [rng.normal(size=2) for _ in range(5)]
        grids = [v.reshape(2, 1, 1).astype(np.float32) for v in vecs]
        model = fit(grids, epsilon=0.01)
        mu, cov = naive_covariance(vecs, 0.01)
        np.testing.assert_allclose(model.mu[0, 0], mu, atol=1e-6)
        np.testing.assert_allclose(model.covariance()[0, 0], cov, atol=1e-6)

    def test_streaming_equals_oracle_across_positions(self, rng):
        grids = random_grids(rng, 12, 3, 2, 2)
        model = fit(iter(grids), epsilon=0.02)
        for i in range(2):
            for j in range(2):
                vecs = [g[:, i, j].astype(np.float64) for g in grids]
                mu, cov = naive_covariance(vecs, 0.02)
                np.testing.assert_allclose(model.mu[i, j], mu, atol=1e-6)
                np.testing.assert_allclose(model.covariance()[i, j], cov, atol=1e-6)

    def test_permutation_invariance(self, rng):
        grids = random_grids(rng, 20, 4, 2, 3)
        a = fit(grids, epsilon=0.01)
        order = rng.permutation(len(grids))
        b = fit([grids[i] for i in order], epsilon=0.01)
        np.testing.assert_allclose(a.mu, b.mu, atol=1e-6)
        np.testing.assert_allclose(a.covariance(), b.covariance(), atol=1e-6)

    def test_spectrum_shifted_by_epsilon(self, rng):
        eps = 0.05
        grids = random_grids(rng, 8, 5, 2, 2)
        model = fit(grids, epsilon=eps)
        cov = model.covariance()
        for i in range(2):
            for j in range(2):
                # regularization shifts the spectrum up by exactly eps
                vecs = [g[:, i, j].astype(np.float64) for g in grids]
                _, oracle_cov = naive_covariance(vecs, eps)
                assert np.linalg.eigvalsh(oracle_cov).min() >= eps - 1e-9
                # stored factors are float32, so allow rounding slack there
                smallest = np.linalg.eigvalsh(cov[i, j]).min()
                assert smallest >= eps - 1e-6

    def test_single_image_rejected(self, rng):
        with pytest.raises(DataError, match="at least 2"):
            fit(random_grids(rng, 1, 3, 2, 2))

    def test_mismatched_grids_rejected(self, rng):
        grids = [rng.normal(size=(3, 2, 2)), rng.normal(size=(3, 2, 3))]
        with pytest.raises(DataError):
            fit(grids)

    def test_bad_epsilon_rejected(self, rng):
        with pytest.raises(DataError):
            fit(random_grids(rng, 3, 2, 2, 2), epsilon=0.0)

    def test_factorization_retry_bumps_epsilon(self, rng, monkeypatch):
        grids = random_grids(rng, 5, 3, 2, 2)
        real_cholesky = np.linalg.cholesky
        calls = {"n": 0}

        def flaky(a):
            calls["n"] += 1
            if calls["n"] == 1:
                raise np.linalg.LinAlgError("forced failure")
            return real_cholesky(a)

        monkeypatch.setattr(np.linalg, "cholesky", flaky)
        with pytest.warns(UserWarning, match="retrying with epsilon"):
            model = fit(grids, epsilon=0.01)
        assert model.epsilon == pytest.approx(0.1)
        smallest = min(
            np.linalg.eigvalsh(model.covariance()[i, j]).min()
            for i in range(2) for j in range(2)
        )
        assert smallest >= 0.1 - 1e-5


class TestMahalanobis:
    def test_zero_at_the_mean(self, rng):
        grids = random_grids(rng, 10, 3, 4, 4)
        model = fit(grids)
        m = mahalanobis_map(model, model.mu.transpose(2, 0, 1))
        assert m.shape == (4, 4)
        assert np.abs(m).max() < 1e-4

    def test_identity_covariance_reduces_to_euclidean(self):
        # (+-c, 0), (0, +-c) with c = sqrt(3/2): unbiased covariance is exactly I
        c = np.sqrt(1.5)
        samples = [np.array([v1, v2], dtype=np.float32).reshape(2, 1, 1)
                   for v1, v2 in ((c, 0), (-c, 0), (0, c), (0, -c))]
        model = fit(samples, epsilon=1e-9)
        np.testing.assert_allclose(model.covariance()[0, 0], np.eye(2), atol=1e-6)
        x = np.array([1.0, 0.0], dtype=np.float32).reshape(2, 1, 1)
        m = mahalanobis_map(model, x)
        assert m[0, 0] == pytest.approx(1.0, abs=1e-5)

    def test_matches_explicit_inverse_oracle(self, rng):
        for _ in range(25):
            d = int(rng.integers(2, 6))
            grids = random_grids(rng, 12, d, 2, 2)
            model = fit(grids, epsilon=0.01)
            x = rng.normal(size=(d, 2, 2)).astype(np.float32)
            m = mahalanobis_map(model, x)
            cov = model.covariance()
            for i in range(2):
                for j in range(2):
                    delta = x[:, i, j].astype(np.float64) - model.mu[i, j]
                    ref = np.sqrt(delta @ np.linalg.inv(cov[i, j]) @ delta)
                    assert abs(m[i, j] - ref) <= 1e-5 * max(ref, 1e-12)

    def test_scaling_is_exactly_linear(self, rng):
        grids = random_grids(rng, 10, 4, 3, 3)
        model = fit(grids)
        delta = rng.normal(size=(4, 3, 3)).astype(np.float32).astype(np.float64)
        mu = model.mu.transpose(2, 0, 1).astype(np.float64)
        base = mahalanobis_map(model, (mu + delta).astype(np.float32)).astype(np.float64)
        # dyadic factors scale float32 inputs exactly, isolating the property
        for t in (0.0, 0.5, 2.0, 4.0, 16.0):
            scaled = mahalanobis_map(model, (mu + t * delta).astype(np.float32))
            np.testing.assert_allclose(scaled, t * base, rtol=1e-6, atol=1e-7)
        scaled = mahalanobis_map(model, (mu + 3.7 * delta).astype(np.float32))
        np.testing.assert_allclose(scaled, 3.7 * base, rtol=1e-5, atol=1e-6)

    def test_dimension_mismatch_rejected(self, rng):
        model = fit(random_grids(rng, 5, 3, 2, 2))
        with pytest.raises(DataError):
            mahalanobis_map(model, rng.normal(size=(4, 2, 2)))
        with pytest.raises(DataError):
            mahalanobis_map(model, rng.normal(size=(3, 2, 3)))

    def test_solve_lower_batched_against_numpy(self, rng):
        ell = np.tril(rng.normal(size=(5, 7, 4, 4))) + 3.0 * np.eye(4)
        rhs = rng.normal(size=(5, 7, 4))
        y = solve_lower_batched(ell, rhs)
        ref = np.linalg.solve(ell, rhs[..., None])[..., 0]
        np.testing.assert_allclose(y, ref, atol=1e-10)


class TestWhitening:
    def test_squared_distances_follow_chi2_mean(self, rng):
        d = 6
        train = random_grids(rng, 400, d, 1, 1)
        model = fit(train, epsilon=1e-6)
        ell = model.cov_factor[0, 0].astype(np.float64)
        mu = model.mu[0, 0].astype(np.float64)
        z = rng.normal(size=(5000, d))
        samples = mu + z @ ell.T
        sq = []
        for s in samples:
            m = mahalanobis_map(model, s.reshape(d, 1, 1).astype(np.float32))
            sq.append(float(m[0, 0]) ** 2)
        assert abs(np.mean(sq) - d) / d < 0.05


class TestPerLayerAndEnsemble:
    def test_single_tap_equals_plain_fit(self, rng):
        acts = [[rng.normal(size=(3, 4, 4)).astype(np.float32)] for _ in range(6)]
        models = fit_per_layer(iter(acts))
        assert len(models) == 1
        direct = fit([a[0] for a in acts])
        np.testing.assert_allclose(models[0].mu, direct.mu, atol=1e-7)
        np.testing.assert_allclose(models[0].cov_factor, direct.cov_factor, atol=1e-7)

    def test_three_taps_native_grids(self, rng):
        shapes = ((4, 8, 8), (6, 4, 4), (8, 2, 2))
        acts = [[rng.normal(size=s).astype(np.float32) for s in shapes]
                for _ in range(5)]
        models = fit_per_layer(iter(acts))
        assert [m.grid_shape for m in models] == [(8, 8), (4, 4), (2, 2)]
        assert [m.dim for m in models] == [4, 6, 8]

    def test_empty_tap_list_is_error(self):
        with pytest.raises(DataError):
            fit_per_layer(iter([[]]))

    def test_ensemble_identity_and_sum(self):
        a = np.full((3, 3), 1.0)
        b = np.full((3, 3), 2.0)
        c = np.full((3, 3), 3.0)
        assert np.array_equal(ensemble_sum([a]), a)
        assert np.array_equal(ensemble_sum([a, np.zeros((3, 3))]), a)
        assert np.array_equal(ensemble_sum([a, b, c]), np.full((3, 3), 6.0))

    def test_ensemble_shape_mismatch(self):
        with pytest.raises(DataError):
            ensemble_sum([np.zeros((2, 2)), np.zeros((3, 3))])


class TestModelFile:
    def test_round_trip_bit_exact(self, rng, tmp_path):
        grids = random_grids(rng, 6, 4, 3, 2)
        spec = make_random_reduction(8, 4, seed=9)
        model = fit(grids, epsilon=0.01, reduction=spec,
                    preprocess=PreprocessConfig(256, 224), backbone_id="toy")
        p = tmp_path / "m.padim"
        save_model(model, p)
        back = load_model(p)
        assert back.mu.tobytes() == model.mu.tobytes()
        assert back.cov_factor.tobytes() == model.cov_factor.tobytes()
        assert back.epsilon == model.epsilon
        assert back.n_train == model.n_train
        assert back.backbone_id == "toy"
        assert back.preprocess == model.preprocess
        assert back.reduction.kind == "random"
        assert np.array_equal(back.reduction.indices, spec.indices)

    def test_corrupted_magic_is_error(self, rng, tmp_path):
        model = fit(random_grids(rng, 4, 2, 2, 2))
        p = tmp_path / "m.padim"
        save_model(model, p)
        blob = bytearray(p.read_bytes())
        blob[:4] = b"XXXX"
        p.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="bad magic"):
            load_model(p)

    def test_truncated_payload_is_error(self, rng, tmp_path):
        model = fit(random_grids(rng, 4, 2, 2, 2))
        p = tmp_path / "m.padim"
        save_model(model, p)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(DataError, match="length mismatch"):
            load_model(p)

    def test_file_size_independent_of_n_train(self, rng, tmp_path):
        a = fit(random_grids(rng, 20, 3, 4, 4))
        b = fit(random_grids(rng, 200, 3, 4, 4))
        pa, pb = tmp_path / "a.padim", tmp_path / "b.padim"
        save_model(a, pa)
        save_model(b, pb)
        assert pa.stat().st_size == pb.stat().st_size
