import numpy as np
import pytest

from robust_moments.data import GroupedDataset, SyntheticSpec, generate_synthetic
from robust_moments.features import (
    LinearFeatures,
    NystromFeatures,
    apply_features,
    build_group_kernels,
    fit_nystrom,
    load_feature_map,
    rbf_kernel,
    save_feature_map,
)


def test_rbf_kernel_values():
    x = np.array([1.0, 2.0])
    assert rbf_kernel(x, x, gamma=3.0) == pytest.approx(1.0)
    # unit squared distance at gamma 1
    assert rbf_kernel(np.array([0.0]), np.array([1.0]), 1.0) == pytest.approx(
        np.exp(-1.0), abs=1e-12
    )


def test_rbf_kernel_symmetry_and_range():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.normal(size=3), rng.normal(size=3)
        k_ab = rbf_kernel(a, b, 0.7)
        assert k_ab == pytest.approx(rbf_kernel(b, a, 0.7), abs=1e-15)
        assert 0.0 < k_ab <= 1.0


def test_rbf_kernel_dimension_mismatch():
    with pytest.raises(ValueError):
        rbf_kernel(np.ones(2), np.ones(3), 1.0)
    with pytest.raises(ValueError):
        rbf_kernel(np.ones(2), np.ones(3), gamma=0.0)


def test_group_kernels_single_point():
    ds = GroupedDataset((np.array([[2.0]]),), (np.array([1.0]),))
    km = build_group_kernels(ds, gamma=1.5)
    assert km.blocks[0].shape == (1, 1)
    assert km.blocks[0][0, 0] == pytest.approx(1.0)


def test_group_kernels_duplicate_rows():
    ds = GroupedDataset(
        (np.array([[1.0], [1.0], [2.0]]),), (np.zeros(3),)
    )
    km = build_group_kernels(ds, gamma=1.0)
    K = km.blocks[0]
    assert np.allclose(K[0], K[1])
    assert np.allclose(K[:, 0], K[:, 1])


def test_group_kernels_block_structure():
    ds, _ = generate_synthetic(SyntheticSpec(k=1, group_size=12, seed=4))
    km = build_group_kernels(ds, gamma=2.0)
    assert np.array_equal(km.cross_block(0, 0), km.blocks[0])
    assert np.array_equal(km.cross_block(1, 1), km.blocks[1])
    assert np.allclose(km.full, km.full.T)
    assert np.allclose(km.cross_block(0, 1), km.cross_block(1, 0).T)


def _spread_points(rng, n, p=2, scale=3.0):
    # well separated points keep the kernel matrix numerically full rank
    return scale * rng.uniform(-1.0, 1.0, size=(n, p))


def test_nystrom_exact_when_landmarks_are_all_points():
    rng = np.random.default_rng(1)
    X = _spread_points(rng, 30)
    fm = NystromFeatures(gamma=1.0, n_landmarks=30, random_state=0).fit(X)
    assert fm.rank_ == 30
    feats = fm.transform(X)
    K = rbf_kernel(X, X, 1.0)
    rel = np.linalg.norm(K - feats @ feats.T) / np.linalg.norm(K)
    assert rel <= 1e-6


def test_nystrom_rank_one_on_identical_points():
    X = np.ones((6, 2))
    with pytest.warns(RuntimeWarning):
        fm = NystromFeatures(gamma=1.0, n_landmarks=6, rank=3, random_state=0).fit(X)
    feats = fm.transform(X)
    assert fm.rank_ == 1
    assert np.allclose(feats, feats[0])


def test_nystrom_error_matches_dense_eigendecomposition_oracle():
    rng = np.random.default_rng(2)
    X = _spread_points(rng, 200)
    gamma = 0.8
    fm = NystromFeatures(gamma=gamma, n_landmarks=100, rank=100,
                         random_state=3).fit(X)
    feats = fm.transform(X)
    K = rbf_kernel(X, X, gamma)
    ours = np.linalg.norm(K - feats @ feats.T) / np.linalg.norm(K)

    # independent oracle: assemble K_b pinv_r(K_hat) K_b' from a dense
    # eigendecomposition of the landmark kernel matrix
    Z = fm.landmarks_
    K_hat = rbf_kernel(Z, Z, gamma)
    K_hat = 0.5 * (K_hat + K_hat.T)
    vals, vecs = np.linalg.eigh(K_hat)
    order = np.argsort(vals)[::-1][: fm.rank_]
    vals, vecs = vals[order], vecs[:, order]
    K_b = rbf_kernel(X, Z, gamma)
    approx = K_b @ (vecs / vals) @ vecs.T @ K_b.T
    oracle = np.linalg.norm(K - approx) / np.linalg.norm(K)

    assert ours == pytest.approx(oracle, abs=1e-8)
    assert ours <= oracle + 1e-8


def test_nystrom_error_nonincreasing_in_rank():
    rng = np.random.default_rng(5)
    X = _spread_points(rng, 80)
    K = rbf_kernel(X, X, 1.0)
    errors = []
    for rank in (2, 5, 10, 20, 40):
        fm = NystromFeatures(gamma=1.0, n_landmarks=40, rank=rank,
                             random_state=9).fit(X)
        feats = fm.transform(X)
        errors.append(np.linalg.norm(K - feats @ feats.T))
    assert all(a >= b - 1e-9 for a, b in zip(errors, errors[1:]))


def test_rbf_matrix_plus_ridge_is_positive_definite():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 2))
    K = rbf_kernel(X, X, 1.0)
    np.linalg.cholesky(K + 1e-10 * np.eye(50))  # raises if not PD


def test_nystrom_landmark_gram_matches_projected_kernel():
    rng = np.random.default_rng(7)
    X = _spread_points(rng, 60)
    fm = NystromFeatures(gamma=1.0, n_landmarks=25, rank=15,
                         random_state=11).fit(X)
    feats = fm.transform(fm.landmarks_)
    K_hat = rbf_kernel(fm.landmarks_, fm.landmarks_, 1.0)
    K_hat = 0.5 * (K_hat + K_hat.T)
    vals, vecs = np.linalg.eigh(K_hat)
    order = np.argsort(vals)[::-1][: fm.rank_]
    vals, vecs = vals[order], vecs[:, order]
    projected = (vecs * vals) @ vecs.T  # rank-r truncation of K_hat
    assert np.linalg.norm(feats @ feats.T - projected) <= 1e-8 * max(
        np.linalg.norm(projected), 1.0
    )


def test_nystrom_validation_errors():
    X = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.raises(ValueError):
        NystromFeatures(n_landmarks=11).fit(X)
    with pytest.raises(ValueError):
        NystromFeatures(n_landmarks=5, rank=6).fit(X)
    with pytest.raises(ValueError):
        NystromFeatures(gamma=-1.0, n_landmarks=5).fit(X)


def test_apply_features_identity_and_determinism():
    fm = LinearFeatures(dim=2)
    x = np.array([3.0, -1.0])
    assert np.array_equal(apply_features(fm, x), x)
    ds, _ = generate_synthetic(SyntheticSpec(k=1, group_size=30, seed=8))
    nf = fit_nystrom(ds, gamma=1.0, n_landmarks=10, seed=1)
    a = apply_features(nf, np.array([0.25]))
    b = apply_features(nf, np.array([0.25]))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        apply_features(fm, np.ones(3))


def test_feature_map_round_trip(tmp_path):
    ds, _ = generate_synthetic(SyntheticSpec(k=1, group_size=40, seed=9))
    fm = fit_nystrom(ds, gamma=1.3, n_landmarks=15, seed=2)
    path = tmp_path / "fm.npz"
    save_feature_map(fm, path)
    loaded = load_feature_map(path)
    X = np.linspace(-1, 1, 7).reshape(-1, 1)
    assert np.array_equal(fm.transform(X), loaded.transform(X))

    lin_path = tmp_path / "lin.npz"
    save_feature_map(LinearFeatures(dim=3), lin_path)
    assert load_feature_map(lin_path).dim == 3
