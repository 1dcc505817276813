"""Feature maps: explicit linear features, RBF kernels, and Nystroem features.

The Nystroem transformer turns an RBF kernel problem into an explicit
finite-dimensional one: with landmarks ``z_1..z_m`` and the eigenpairs
``(d_i, v_i)`` of the landmark kernel matrix, the feature of ``x`` is
``D_r^{-1/2} V_r^T (rbf(x, z_1), ..., rbf(x, z_m))`` so that inner products of
features approximate kernel values.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_matrix, check_positive


def _pairwise_sq_dists(X, Z):
    X2 = np.sum(X * X, axis=1)[:, None]
    Z2 = np.sum(Z * Z, axis=1)[None, :]
    d2 = X2 + Z2 - 2.0 * (X @ Z.T)
    return np.maximum(d2, 0.0)


def rbf_kernel(x, z, gamma=1.0):
    """Evaluate ``exp(-gamma * ||x - z||^2)``.

    Accepts single points (1-D, returns a float) or stacks of points
    (2-D, returns the full kernel matrix). Dimensions must agree.
    """
    gamma = check_positive(gamma, "gamma")
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    single = x.ndim == 1 and z.ndim == 1
    X = x.reshape(1, -1) if x.ndim == 1 else check_matrix(x, "x")
    Z = z.reshape(1, -1) if z.ndim == 1 else check_matrix(z, "z")
    if X.shape[1] != Z.shape[1]:
        raise ValueError(
            f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}"
        )
    K = np.exp(-gamma * _pairwise_sq_dists(X, Z))
    return float(K[0, 0]) if single else K


@dataclass(frozen=True)
class GroupKernelMatrices:
    """Per-group and cross-group kernel blocks of a grouped dataset.

    ``full`` is the symmetrized (N, N) kernel matrix over all samples in group
    order, ``blocks[j]`` its j-th diagonal block, and ``offsets`` the group
    start indices into the pooled ordering.
    """

    blocks: tuple
    full: np.ndarray
    offsets: np.ndarray
    gamma: float

    @property
    def n_groups(self):
        return len(self.blocks)

    def row_block(self, j):
        """Rows of ``full`` belonging to group ``j`` (shape n_j x N)."""
        return self.full[self.offsets[j] : self.offsets[j + 1], :]

    def cross_block(self, i, j):
        return self.full[
            self.offsets[i] : self.offsets[i + 1],
            self.offsets[j] : self.offsets[j + 1],
        ]


def build_group_kernels(ds, gamma=1.0):
    """Assemble :class:`GroupKernelMatrices` for an RBF kernel on ``ds``."""
    X, _, _ = ds.stacked()
    full = rbf_kernel(X, X, gamma)
    full = 0.5 * (full + full.T)  # kill float asymmetry
    offsets = np.concatenate([[0], np.cumsum(ds.group_sizes)])
    blocks = tuple(
        full[offsets[j] : offsets[j + 1], offsets[j] : offsets[j + 1]].copy()
        for j in range(ds.n_groups)
    )
    return GroupKernelMatrices(blocks=blocks, full=full, offsets=offsets, gamma=gamma)


class LinearFeatures(BaseEstimator, TransformerMixin):
    """Identity feature map: the covariates themselves are the features."""

    def __init__(self, dim=1):
        self.dim = dim

    def fit(self, X, y=None):
        X = check_matrix(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} columns, got {X.shape[1]}")
        return self

    def transform(self, X):
        X = check_matrix(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} columns, got {X.shape[1]}")
        return X


class FunctionFeatures(BaseEstimator, TransformerMixin):
    """Explicit feature map given by a vectorized callable ``func(X) -> (n, d)``."""

    def __init__(self, func, dim):
        self.func = func
        self.dim = dim

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        X = check_matrix(X)
        out = np.asarray(self.func(X), dtype=float)
        if out.ndim == 1:
            out = out.reshape(-1, 1)
        if out.shape != (X.shape[0], self.dim):
            raise ValueError(
                f"feature function returned shape {out.shape}, "
                f"expected {(X.shape[0], self.dim)}"
            )
        return out


class NystromFeatures(BaseEstimator, TransformerMixin):
    """Low-rank RBF feature map from a landmark subsample.

    Parameters
    ----------
    gamma : RBF bandwidth.
    n_landmarks : number of landmark points sampled without replacement from
        the pooled training data.
    rank : eigenpairs kept from the landmark kernel matrix; defaults to
        ``n_landmarks``. Eigenvalues below ``eigen_tol`` (relative to the
        largest) are always dropped, shrinking the rank with a warning.
    random_state : seed for the landmark draw.
    """

    def __init__(self, gamma=1.0, n_landmarks=100, rank=None, eigen_tol=1e-10,
                 random_state=None):
        self.gamma = gamma
        self.n_landmarks = n_landmarks
        self.rank = rank
        self.eigen_tol = eigen_tol
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_matrix(X)
        check_positive(self.gamma, "gamma")
        m = int(self.n_landmarks)
        if m < 1:
            raise ValueError("n_landmarks must be >= 1")
        if m > X.shape[0]:
            raise ValueError(
                f"n_landmarks={m} exceeds the {X.shape[0]} available samples"
            )
        r = m if self.rank is None else int(self.rank)
        if not 1 <= r <= m:
            raise ValueError(f"rank must be in [1, {m}], got {r}")
        rng = np.random.default_rng(self.random_state)
        idx = rng.choice(X.shape[0], size=m, replace=False)
        landmarks = X[idx]
        K = rbf_kernel(landmarks, landmarks, self.gamma)
        K = 0.5 * (K + K.T)
        eigvals, eigvecs = np.linalg.eigh(K)
        order = np.argsort(eigvals)[::-1]
        eigvals, eigvecs = eigvals[order], eigvecs[:, order]
        cutoff = self.eigen_tol * max(eigvals[0], 0.0)
        n_pos = int(np.sum(eigvals > cutoff))
        if n_pos == 0:
            raise ValueError("landmark kernel matrix has no positive eigenvalues")
        if n_pos < r:
            warnings.warn(
                f"requested rank {r} but only {n_pos} eigenvalues exceed the "
                f"tolerance; reducing rank to {n_pos}",
                RuntimeWarning,
            )
            r = n_pos
        self.landmarks_ = landmarks
        self.landmark_indices_ = idx
        self.eigenvalues_ = eigvals[:r]
        # feature(x) = D_r^{-1/2} V_r^T k(x, landmarks); stored as k_row @ projection_
        self.projection_ = eigvecs[:, :r] / np.sqrt(eigvals[:r])
        self.rank_ = r
        return self

    @property
    def dim(self):
        if not hasattr(self, "rank_"):
            raise AttributeError("NystromFeatures is not fitted")
        return self.rank_

    def transform(self, X):
        if not hasattr(self, "projection_"):
            raise AttributeError("NystromFeatures is not fitted")
        X = check_matrix(X)
        if X.shape[1] != self.landmarks_.shape[1]:
            raise ValueError(
                f"expected {self.landmarks_.shape[1]} columns, got {X.shape[1]}"
            )
        return rbf_kernel(X, self.landmarks_, self.gamma) @ self.projection_


def fit_nystrom(ds, gamma=1.0, n_landmarks=100, rank=None, seed=None,
                eigen_tol=1e-10):
    """Fit :class:`NystromFeatures` on the pooled samples of ``ds``."""
    X, _, _ = ds.stacked()
    fm = NystromFeatures(
        gamma=gamma,
        n_landmarks=n_landmarks,
        rank=rank,
        eigen_tol=eigen_tol,
        random_state=seed,
    )
    return fm.fit(X)


def apply_features(feature_map, x):
    """Evaluate a feature map at one point (1-D in, 1-D out) or a stack."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return feature_map.transform(x.reshape(1, -1))[0]
    return feature_map.transform(x)


def save_feature_map(fm, path):
    """Persist a feature map as ``.npz`` (linear and nystrom-rbf kinds only)."""
    if isinstance(fm, LinearFeatures):
        np.savez(path, kind="linear", dim=np.array(fm.dim))
    elif isinstance(fm, NystromFeatures):
        if not hasattr(fm, "projection_"):
            raise ValueError("cannot save an unfitted NystromFeatures")
        np.savez(
            path,
            kind="nystrom-rbf",
            gamma=np.array(fm.gamma),
            landmarks=fm.landmarks_,
            projection=fm.projection_,
            eigenvalues=fm.eigenvalues_,
        )
    else:
        raise TypeError(f"cannot serialize feature map of type {type(fm).__name__}")


def load_feature_map(path):
    with np.load(path, allow_pickle=False) as data:
        kind = str(data["kind"])
        if kind == "linear":
            return LinearFeatures(dim=int(data["dim"]))
        if kind == "nystrom-rbf":
            fm = NystromFeatures(gamma=float(data["gamma"]))
            fm.landmarks_ = data["landmarks"]
            fm.projection_ = data["projection"]
            fm.eigenvalues_ = data["eigenvalues"]
            fm.rank_ = fm.projection_.shape[1]
            return fm
        raise ValueError(f"unknown feature map kind {kind!r}")
