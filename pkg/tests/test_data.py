import numpy as np
import pytest

from robust_moments.data import (
    DatasetFormatError,
    GroupedDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
)


def test_k1_two_groups_cover_full_interval():
    ds, gt = generate_synthetic(SyntheticSpec(k=1, group_size=100, seed=0))
    assert ds.n_groups == 2
    for j in range(2):
        x = ds.xs[j][:, 0]
        assert x.min() >= -1.0 and x.max() <= 1.0
    assert gt.offsets.tolist() == [0.0, 1.0]
    # conditional means follow the two parabolas
    x = np.array([0.3])
    assert gt.conditional_mean(x, 0) == pytest.approx(0.09)
    assert gt.conditional_mean(x, 1) == pytest.approx(1.09)


def test_k2_interval_partition():
    ds, _ = generate_synthetic(SyntheticSpec(k=2, group_size=200, seed=1))
    assert ds.n_groups == 4
    assert ds.xs[0][:, 0].max() <= 0.0 and ds.xs[0][:, 0].min() >= -1.0
    assert ds.xs[1][:, 0].min() >= 0.0 and ds.xs[1][:, 0].max() <= 1.0
    # second half partitions [-1, 1] identically
    assert ds.xs[2][:, 0].max() <= 0.0
    assert ds.xs[3][:, 0].min() >= 0.0


def test_seed_determinism():
    a, gta = generate_synthetic(SyntheticSpec(k=3, group_size=50, seed=7))
    b, gtb = generate_synthetic(SyntheticSpec(k=3, group_size=50, seed=7))
    for xa, xb in zip(a.xs, b.xs):
        assert np.array_equal(xa, xb)
    for ya, yb in zip(a.ys, b.ys):
        assert np.array_equal(ya, yb)
    assert np.array_equal(gta.noise_var, gtb.noise_var)


def test_noise_variances_inside_configured_ranges():
    spec = SyntheticSpec(k=4, group_size=10, seed=5)
    _, gt = generate_synthetic(spec)
    assert np.all(gt.noise_var[:4] >= 1.0) and np.all(gt.noise_var[:4] <= 2.0)
    assert np.all(gt.noise_var[4:] >= 0.0) and np.all(gt.noise_var[4:] <= 0.1)


def test_large_sample_noise_mean_and_variance_concentration():
    n = 10_000
    ds, gt = generate_synthetic(SyntheticSpec(k=1, group_size=n, seed=11))
    for j in range(2):
        x = ds.xs[j][:, 0]
        noise = ds.ys[j] - (x**2 + gt.offsets[j])
        sigma = np.sqrt(gt.noise_var[j])
        assert abs(noise.mean()) <= 5.0 * sigma / np.sqrt(n) + 1e-12
        # chi-square concentration of the sample variance at 5 sigma
        tol = 5.0 * gt.noise_var[j] * np.sqrt(2.0 / (n - 1)) + 1e-12
        assert abs(noise.var(ddof=1) - gt.noise_var[j]) <= tol


def test_partition_union_and_disjointness():
    k = 5
    edges = -1.0 + 2.0 * np.arange(k + 1) / k
    ds, _ = generate_synthetic(SyntheticSpec(k=k, group_size=2000, seed=2))
    for half in range(2):
        for j in range(k):
            x = ds.xs[half * k + j][:, 0]
            assert x.min() >= edges[j] - 1e-12
            assert x.max() <= edges[j + 1] + 1e-12
            # with 2000 points, samples land well inside every sub-interval
            assert x.min() <= edges[j] + 0.05
            assert x.max() >= edges[j + 1] - 0.05


def test_invalid_spec_rejected():
    with pytest.raises(ValueError):
        SyntheticSpec(k=0)
    with pytest.raises(ValueError):
        SyntheticSpec(group_size=0)
    with pytest.raises(ValueError):
        SyntheticSpec(high_noise_var_range=(2.0, 1.0))
    with pytest.raises(ValueError):
        SyntheticSpec(low_noise_var_range=(-0.5, 0.1))


def test_grouped_dataset_invariants():
    with pytest.raises(ValueError):
        GroupedDataset((), ())
    with pytest.raises(ValueError):
        GroupedDataset((np.empty((0, 1)),), (np.empty(0),))
    with pytest.raises(ValueError):
        GroupedDataset(
            (np.ones((2, 1)), np.ones((2, 2))), (np.ones(2), np.ones(2))
        )
    with pytest.raises(ValueError):
        GroupedDataset((np.array([[np.nan]]),), (np.array([1.0]),))


def test_from_arrays_orders_groups_ascending():
    X = np.array([[1.0], [2.0], [3.0]])
    y = np.array([1.0, 2.0, 3.0])
    ds = GroupedDataset.from_arrays(X, y, [5, 0, 5])
    assert ds.n_groups == 2
    assert ds.xs[0][0, 0] == 2.0
    assert np.array_equal(ds.xs[1][:, 0], [1.0, 3.0])  # row order preserved


def test_csv_round_trip(tmp_path):
    ds, _ = generate_synthetic(SyntheticSpec(k=2, group_size=17, seed=3))
    path = tmp_path / "data.csv"
    save_dataset(ds, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "x0,y,group"
    assert len(lines) == 1 + ds.n_samples
    loaded = load_dataset(path)
    assert loaded.n_groups == ds.n_groups
    for a, b in zip(loaded.xs, ds.xs):
        assert np.array_equal(a, b)
    for a, b in zip(loaded.ys, ds.ys):
        assert np.array_equal(a, b)


def test_load_three_rows_two_groups(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text("x0,y,group\n1.0,2.0,0\n3.0,4.0,1\n5.0,6.0,0\n")
    ds = load_dataset(path)
    assert ds.n_groups == 2
    assert ds.group_sizes.tolist() == [2, 1]
    assert np.array_equal(ds.ys[0], [2.0, 6.0])


def test_load_errors_name_the_row(tmp_path):
    bad_nan = tmp_path / "nan.csv"
    bad_nan.write_text("x0,y,group\n1.0,2.0,0\n1.5,nan,0\n")
    with pytest.raises(DatasetFormatError, match="row 3"):
        load_dataset(bad_nan)

    bad_cell = tmp_path / "cell.csv"
    bad_cell.write_text("x0,y,group\n1.0,oops,0\n")
    with pytest.raises(DatasetFormatError, match="row 2"):
        load_dataset(bad_cell)

    bad_group = tmp_path / "group.csv"
    bad_group.write_text("x0,y,group\n1.0,2.0,first\n")
    with pytest.raises(DatasetFormatError, match="row 2"):
        load_dataset(bad_group)


def test_load_missing_columns_and_empty(tmp_path):
    missing = tmp_path / "missing.csv"
    missing.write_text("x0,label\n1.0,2.0\n")
    with pytest.raises(DatasetFormatError, match="header"):
        load_dataset(missing)

    empty = tmp_path / "empty.csv"
    empty.write_text("x0,y,group\n")
    with pytest.raises(DatasetFormatError, match="no data rows"):
        load_dataset(empty)


def test_save_rejects_invalid_dataset_before_write(tmp_path):
    # an empty group cannot even be constructed, so nothing reaches the disk
    with pytest.raises(ValueError):
        GroupedDataset((np.ones((1, 1)), np.empty((0, 1))), (np.ones(1), np.empty(0)))
    assert list(tmp_path.iterdir()) == []
