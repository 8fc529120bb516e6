"""Loaders, subsetting, Gaussian generation, serialization round trips."""

import numpy as np
import pytest

from optloss.data import (
    dataset_from_json,
    dataset_to_json,
    from_arrays,
    gen_gaussian,
    load_csv,
    load_idx,
    subset,
)
from optloss.hypergraph import build_conflict_graph


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_merges_duplicates(tmp_path):
    path = write(tmp_path, "d.csv", "0,1.5,2.5\n0,1.5,2.5\n1,3.0,4.0\n")
    ds = load_csv(path)
    assert ds.num_points == 2
    assert np.allclose(sorted(ds.masses), [1 / 3, 2 / 3])
    dup = int(np.argmax(ds.masses))
    assert np.array_equal(ds.points[dup], [1.5, 2.5])
    assert ds.labels[dup] == 0


def test_load_csv_same_point_different_labels_stays_split(tmp_path):
    path = write(tmp_path, "d.csv", "0,1.0,1.0\n1,1.0,1.0\n")
    ds = load_csv(path)
    assert ds.num_points == 2
    assert set(ds.labels.tolist()) == {0, 1}
    # they conflict at any budget, including zero
    graph = build_conflict_graph(ds, 0.0)
    assert [e.vertex_ids for e in graph.edges] == [(0, 1)]


def test_load_csv_normalization_and_provenance(tmp_path):
    path = write(tmp_path, "d.csv", "0,0,255\n1,128,64\n")
    raw = load_csv(path)
    assert raw.points.max() == 255.0
    assert "scale=raw" in raw.provenance
    scaled = load_csv(path, normalization="divide-255")
    assert scaled.points.max() == 1.0
    assert "scale=unit" in scaled.provenance
    assert "divide-255" in scaled.provenance


def test_load_csv_rejects_bad_files(tmp_path):
    with pytest.raises(ValueError):
        load_csv(write(tmp_path, "ragged.csv", "0,1,2\n1,3\n"))
    with pytest.raises(ValueError):
        load_csv(write(tmp_path, "text.csv", "0,1,hello\n"))
    with pytest.raises(ValueError):
        load_csv(write(tmp_path, "empty.csv", ""))
    with pytest.raises(ValueError):
        load_csv(write(tmp_path, "fraclabel.csv", "0.5,1,2\n"))


def test_labels_remapped_to_contiguous_range(tmp_path):
    path = write(tmp_path, "d.csv", "7,0,0\n3,1,0\n7,2,0\n")
    ds = load_csv(path)
    assert ds.num_classes == 2
    assert ds.class_names == ["3", "7"]
    assert ds.labels.tolist() == [1, 0, 1]


def test_subset_cap_and_order():
    pts = np.column_stack([np.arange(10.0), np.zeros(10)])
    labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1]
    ds = from_arrays(pts, labels)
    sub = subset(ds, [0, 1], per_class_cap=2)
    assert sub.num_points == 4
    assert np.array_equal(sub.points[:, 0], [0.0, 1.0, 2.0, 3.0])  # file order
    assert np.allclose(sub.masses, 0.25)


def test_subset_single_class_keeps_contract():
    pts = np.column_stack([np.arange(6.0), np.zeros(6)])
    ds = from_arrays(pts, [0, 0, 1, 1, 2, 2])
    sub = subset(ds, [1])
    assert sub.num_points == 2
    assert np.allclose(sub.masses.sum(), 1.0)


def test_subset_errors_and_warning():
    ds = from_arrays([(0.0, 0.0), (1.0, 0.0)], [0, 1])
    with pytest.raises(ValueError):
        subset(ds, [])
    with pytest.raises(ValueError):
        subset(ds, [5])
    with pytest.warns(UserWarning):
        sub = subset(ds, [0], per_class_cap=10)
    assert sub.num_points == 1


def test_gen_gaussian_reproducible_and_shaped():
    a = gen_gaussian(num_classes=3, per_class=50, variance=0.05, seed=9)
    b = gen_gaussian(num_classes=3, per_class=50, variance=0.05, seed=9)
    assert np.array_equal(a.points, b.points)
    assert a.num_points == 150
    assert a.dimension == 2
    c = gen_gaussian(num_classes=3, per_class=50, variance=0.05, seed=10)
    assert not np.array_equal(a.points, c.points)
    # class means land near the circle of radius 3
    for cls in range(3):
        mean = a.points[a.labels == cls].mean(axis=0)
        angle = 2 * np.pi * cls / 3
        assert np.linalg.norm(mean - 3 * np.array([np.cos(angle), np.sin(angle)])) < 0.15


def test_gen_gaussian_single_point_classes():
    ds = gen_gaussian(num_classes=3, per_class=1, variance=0.01, seed=4)
    assert ds.num_points == 3
    assert np.allclose(ds.masses, 1 / 3)


def test_gen_gaussian_validation():
    with pytest.raises(ValueError):
        gen_gaussian(variance=0.0)
    with pytest.raises(ValueError):
        gen_gaussian(per_class=0)


def test_json_round_trip_is_exact():
    ds = gen_gaussian(num_classes=3, per_class=20, variance=0.5, seed=77)
    restored = dataset_from_json(dataset_to_json(ds))
    assert np.array_equal(restored.points, ds.points)
    assert np.array_equal(restored.labels, ds.labels)
    assert np.array_equal(restored.masses, ds.masses)
    assert restored.class_names == ds.class_names
    assert restored.provenance == ds.provenance


def make_idx_images(path, images):
    arr = np.asarray(images, dtype=np.uint8)
    n, rows, cols = arr.shape
    header = bytes([0, 0, 0x08, 3])
    header += n.to_bytes(4, "big") + rows.to_bytes(4, "big") + cols.to_bytes(4, "big")
    path.write_bytes(header + arr.tobytes())


def make_idx_labels(path, labels):
    arr = np.asarray(labels, dtype=np.uint8)
    header = bytes([0, 0, 0x08, 1]) + len(arr).to_bytes(4, "big")
    path.write_bytes(header + arr.tobytes())


def test_idx_reader_round_trip(tmp_path):
    images = np.arange(2 * 2 * 3, dtype=np.uint8).reshape(2, 2, 3)
    labels = [4, 7]
    make_idx_images(tmp_path / "imgs", images)
    make_idx_labels(tmp_path / "labs", labels)
    ds = load_idx(tmp_path / "imgs", tmp_path / "labs")
    assert ds.num_points == 2
    assert ds.dimension == 6
    assert np.array_equal(ds.points[0], images[0].reshape(-1).astype(float))
    assert ds.class_names == ["4", "7"]
    scaled = load_idx(tmp_path / "imgs", tmp_path / "labs", normalization="divide-255")
    assert scaled.points.max() == pytest.approx(11 / 255)


def test_idx_reader_rejects_garbage(tmp_path):
    bad = tmp_path / "bad"
    bad.write_bytes(b"\x01\x02\x03\x04")
    with pytest.raises(ValueError):
        load_idx(bad, bad)


def test_dataset_validation():
    with pytest.raises(ValueError):
        from_arrays([(0.0, 0.0)], [0], masses=[0.5])  # masses must sum to 1
    with pytest.raises(ValueError):
        from_arrays([(np.inf, 0.0)], [0])
    with pytest.raises(ValueError):
        from_arrays(np.zeros((0, 2)), [])


def test_class_priors():
    ds = from_arrays([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], [0, 0, 1],
                     masses=[0.25, 0.25, 0.5], merge_duplicates=False)
    assert np.allclose(ds.class_priors(), [0.5, 0.5])
