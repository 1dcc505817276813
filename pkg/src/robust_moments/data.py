"""Grouped regression datasets: containers, a synthetic multi-group generator, CSV I/O.

The synthetic benchmark draws ``2k`` groups on the interval [-1, 1]. The first
``k`` groups follow the parabola ``y = x^2`` with high Gaussian label noise,
the second ``k`` groups follow ``y = x^2 + 1`` with low noise. Within each
half, group ``j`` covers one of ``k`` equal sub-intervals of [-1, 1].

Randomness comes from ``numpy.random.default_rng`` (PCG64); the draw order is
fixed (per group: variance, covariates, noise), so a seed pins the dataset
bit-for-bit.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_matrix, check_vector


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GroupedDataset:
    """Immutable collection of per-group samples with a shared covariate dim.

    ``xs[j]`` is the (n_j, p) covariate block of group ``j`` and ``ys[j]`` the
    matching label vector. Groups are kept in a fixed order; instances are
    safe to share across threads.
    """

    xs: tuple
    ys: tuple

    def __post_init__(self):
        if len(self.xs) == 0 or len(self.xs) != len(self.ys):
            raise ValueError("need at least one group with matching x/y blocks")
        xs, ys = [], []
        dim = None
        for j, (x, y) in enumerate(zip(self.xs, self.ys)):
            x = check_matrix(x, name=f"group {j} covariates")
            y = check_vector(y, name=f"group {j} labels", length=x.shape[0])
            if x.shape[0] == 0:
                raise ValueError(f"group {j} is empty")
            if dim is None:
                dim = x.shape[1]
            elif x.shape[1] != dim:
                raise ValueError(
                    f"group {j} has covariate dim {x.shape[1]}, expected {dim}"
                )
            xs.append(_freeze(x))
            ys.append(_freeze(y))
        object.__setattr__(self, "xs", tuple(xs))
        object.__setattr__(self, "ys", tuple(ys))

    @property
    def n_groups(self):
        return len(self.xs)

    @property
    def group_sizes(self):
        return np.array([x.shape[0] for x in self.xs])

    @property
    def covariate_dim(self):
        return self.xs[0].shape[1]

    @property
    def n_samples(self):
        return int(self.group_sizes.sum())

    def stacked(self):
        """Return pooled (X, y, group_ids) arrays in group order."""
        X = np.vstack(self.xs)
        y = np.concatenate(self.ys)
        groups = np.repeat(np.arange(self.n_groups), self.group_sizes)
        return X, y, groups

    @classmethod
    def from_arrays(cls, X, y, groups):
        """Build a dataset from pooled arrays and per-sample group labels.

        Groups are ordered by ascending label; row order inside each group is
        preserved.
        """
        X = check_matrix(X)
        y = check_vector(y, length=X.shape[0])
        groups = np.asarray(groups).ravel()
        if groups.shape[0] != X.shape[0]:
            raise ValueError("groups must have one entry per sample")
        labels = np.unique(groups)
        if labels.size == 0:
            raise ValueError("no group labels present")
        xs = [X[groups == g] for g in labels]
        ys = [y[groups == g] for g in labels]
        return cls(tuple(xs), tuple(ys))


@dataclass(frozen=True)
class SyntheticSpec:
    """Configuration of the two-parabola benchmark (``2k`` groups total)."""

    k: int = 1
    group_size: int = 100
    high_noise_var_range: tuple = (1.0, 2.0)
    low_noise_var_range: tuple = (0.0, 0.1)
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.group_size < 1:
            raise ValueError(f"group_size must be >= 1, got {self.group_size}")
        for name in ("high_noise_var_range", "low_noise_var_range"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi):
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got ({lo}, {hi})")


@dataclass(frozen=True)
class GroundTruth:
    """Known conditional expectation and the noise variances actually drawn.

    For the synthetic benchmark the conditional mean of group ``j`` is
    ``x^2 + offsets[j]``.
    """

    offsets: np.ndarray
    noise_var: np.ndarray

    def conditional_mean(self, x, group):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[:, 0]
        return x**2 + self.offsets[group]


def generate_synthetic(spec):
    """Draw the two-parabola benchmark dataset described by ``spec``.

    Returns ``(GroupedDataset, GroundTruth)`` with ``2k`` groups of
    ``group_size`` scalar covariates each. Deterministic given ``spec.seed``.
    """
    if not isinstance(spec, SyntheticSpec):
        spec = SyntheticSpec(**spec) if isinstance(spec, dict) else spec
    rng = np.random.default_rng(spec.seed)
    k, n = spec.k, spec.group_size
    edges = -1.0 + 2.0 * np.arange(k + 1) / k
    xs, ys, variances, offsets = [], [], [], []
    for half, (offset, var_range) in enumerate(
        [(0.0, spec.high_noise_var_range), (1.0, spec.low_noise_var_range)]
    ):
        for j in range(k):
            var = rng.uniform(var_range[0], var_range[1])
            x = rng.uniform(edges[j], edges[j + 1], size=n)
            noise = rng.normal(0.0, math.sqrt(var), size=n)
            xs.append(x.reshape(-1, 1))
            ys.append(x**2 + offset + noise)
            variances.append(var)
            offsets.append(offset)
    ds = GroupedDataset(tuple(xs), tuple(ys))
    gt = GroundTruth(
        offsets=_freeze(np.array(offsets)), noise_var=_freeze(np.array(variances))
    )
    return ds, gt


def save_dataset(ds, path):
    """Write ``ds`` as CSV with header ``x0,...,x{p-1},y,group``.

    Floats are printed with 17 significant digits so a load round-trips the
    values exactly.
    """
    p = ds.covariate_dim
    header = [f"x{i}" for i in range(p)] + ["y", "group"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for j, (x, y) in enumerate(zip(ds.xs, ds.ys)):
            for row, label in zip(x, y):
                writer.writerow(
                    [f"{v:.17g}" for v in row] + [f"{label:.17g}", str(j)]
                )


def load_dataset(path, label_col="y", group_col="group"):
    """Parse a CSV written by :func:`save_dataset` (or matching its schema).

    Covariate columns are every column other than ``label_col`` and
    ``group_col``. Raises :class:`DatasetFormatError` naming the offending
    row/column on any malformed cell.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: file is empty") from None
        if label_col not in header or group_col not in header:
            raise DatasetFormatError(
                f"{path}: header must contain '{label_col}' and '{group_col}' "
                f"columns, got {header}"
            )
        y_idx = header.index(label_col)
        g_idx = header.index(group_col)
        x_idx = [i for i in range(len(header)) if i not in (y_idx, g_idx)]
        if not x_idx:
            raise DatasetFormatError(f"{path}: no covariate columns in header")
        rows_x, rows_y, rows_g = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            try:
                x = [float(row[i]) for i in x_idx]
                y = float(row[y_idx])
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: row {lineno} contains a non-numeric cell"
                ) from None
            if not all(math.isfinite(v) for v in x) or not math.isfinite(y):
                raise DatasetFormatError(
                    f"{path}: row {lineno} contains NaN or Inf"
                )
            try:
                g = int(row[g_idx])
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: row {lineno} has non-integer group id {row[g_idx]!r}"
                ) from None
            rows_x.append(x)
            rows_y.append(y)
            rows_g.append(g)
    if not rows_g:
        raise DatasetFormatError(f"{path}: no data rows (empty group id set)")
    return GroupedDataset.from_arrays(
        np.array(rows_x), np.array(rows_y), np.array(rows_g)
    )
