"""Dataset ingestion and synthetic generation.

A labeled dataset is a finite-support distribution: points, integer class
labels in [0, K), and positive probability masses summing to one. Loaders
produce the empirical distribution of the file (uniform mass per row, exact
duplicate rows merged), and the Gaussian generator uses a counter-based
PRNG (Philox) with a documented sampling order so fixtures are portable.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LabeledDataset",
    "from_arrays",
    "load_csv",
    "load_idx",
    "subset",
    "gen_gaussian",
    "dataset_to_json",
    "dataset_from_json",
]

_MASS_TOL = 1e-9


@dataclass
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray
    masses: np.ndarray
    class_names: list[str] | None = None
    provenance: str = ""
    _validated: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int)
        self.masses = np.asarray(self.masses, dtype=float)
        n = self.points.shape[0]
        if n < 1 or self.points.shape[1] < 1:
            raise ValueError("dataset needs at least one point with at least one feature")
        if self.labels.shape != (n,) or self.masses.shape != (n,):
            raise ValueError("points, labels and masses must agree in length")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points contain non-finite values")
        if np.any(self.masses <= 0):
            raise ValueError("masses must be positive (drop zero-mass points first)")
        if abs(self.masses.sum() - 1.0) > _MASS_TOL:
            raise ValueError(f"masses sum to {self.masses.sum()!r}, expected 1")
        k = self.num_classes
        if self.labels.min() < 0 or self.labels.max() >= k:
            raise ValueError("labels must be contiguous integers starting at 0")
        self._validated = True

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    def class_priors(self) -> np.ndarray:
        priors = np.zeros(self.num_classes)
        np.add.at(priors, self.labels, self.masses)
        return priors


def from_arrays(points, labels, masses=None, class_names=None,
                provenance: str = "arrays", merge_duplicates: bool = True) -> LabeledDataset:
    """Build a dataset from raw arrays.

    With no masses given, rows get uniform mass 1/n. Exact duplicate
    (point, label) rows are merged with summed mass; identical points under
    different labels stay distinct vertices. Labels are remapped to
    0..K-1 in sorted order of the distinct raw labels, recorded in
    ``class_names`` unless explicit names are provided.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    labels = np.asarray(labels)
    n = points.shape[0]
    if n == 0 or labels.shape[0] == 0:
        raise ValueError("dataset needs at least one point")
    if masses is None:
        masses = np.full(n, 1.0 / n)
    masses = np.asarray(masses, dtype=float)

    raw_classes = np.unique(labels)
    remap = {c: i for i, c in enumerate(raw_classes.tolist())}
    labels = np.array([remap[c] for c in labels.tolist()], dtype=int)
    if class_names is None:
        class_names = [str(c) for c in raw_classes.tolist()]

    if merge_duplicates:
        rows = np.column_stack([points, labels.astype(float)])
        _, first, inverse = np.unique(rows, axis=0, return_index=True, return_inverse=True)
        if first.shape[0] < n:
            merged_mass = np.zeros(first.shape[0])
            np.add.at(merged_mass, inverse, masses)
            order = np.argsort(first)  # keep file order
            first = first[order]
            merged_mass = merged_mass[order]
            points = points[first]
            labels = labels[first]
            masses = merged_mass

    return LabeledDataset(points, labels, masses, class_names, provenance)


def _detect_scale(points: np.ndarray) -> str:
    top = float(np.abs(points).max())
    return "unit" if top <= 1.0 + 1e-12 else f"raw(max={top:g})"


def load_csv(path, label_column: int = 0, normalization: str = "none") -> LabeledDataset:
    """Read a numeric CSV of one label column plus feature columns.

    ``normalization`` is "none" or "divide-255". Masses are uniform over the
    file rows before duplicate merging, so a row appearing twice yields one
    vertex with twice the mass.
    """
    if normalization not in ("none", "divide-255"):
        raise ValueError(f"unknown normalization {normalization!r}")
    try:
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message=".*no data.*")
            table = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"failed to parse CSV {path}: {exc}") from exc
    if table.size == 0:
        raise ValueError(f"empty CSV file: {path}")
    if table.shape[1] < 2:
        raise ValueError("CSV needs a label column and at least one feature column")
    labels_raw = table[:, label_column]
    if not np.allclose(labels_raw, np.round(labels_raw)):
        raise ValueError("label column must contain integers")
    features = np.delete(table, label_column, axis=1)
    if normalization == "divide-255":
        features = features / 255.0
    ds = from_arrays(
        features,
        labels_raw.astype(int),
        provenance=f"csv:{path}(normalization={normalization},scale={_detect_scale(features)})",
    )
    return ds


def _read_idx(path) -> np.ndarray:
    """Parse a big-endian IDX file into a numpy array."""
    with open(path, "rb") as handle:
        raw = handle.read()
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise ValueError(f"not an IDX file: {path}")
    dtype_code, ndim = raw[2], raw[3]
    dtypes = {0x08: np.uint8, 0x09: np.int8, 0x0B: ">i2", 0x0C: ">i4",
              0x0D: ">f4", 0x0E: ">f8"}
    if dtype_code not in dtypes:
        raise ValueError(f"unsupported IDX dtype code 0x{dtype_code:02x}")
    header = 4 + 4 * ndim
    dims = [int.from_bytes(raw[4 + 4 * i: 8 + 4 * i], "big") for i in range(ndim)]
    data = np.frombuffer(raw, dtype=dtypes[dtype_code], offset=header)
    expected = int(np.prod(dims))
    if data.size != expected:
        raise ValueError(f"IDX payload size {data.size} != header says {expected}")
    return data.reshape(dims)


def load_idx(images_path, labels_path, normalization: str = "none") -> LabeledDataset:
    """Read an IDX image/label file pair (MNIST binary layout, big-endian)."""
    if normalization not in ("none", "divide-255"):
        raise ValueError(f"unknown normalization {normalization!r}")
    images = _read_idx(images_path).astype(float)
    labels = _read_idx(labels_path).astype(int)
    if images.shape[0] != labels.shape[0]:
        raise ValueError("image and label counts differ")
    flat = images.reshape(images.shape[0], -1)
    if normalization == "divide-255":
        flat = flat / 255.0
    return from_arrays(
        flat,
        labels,
        provenance=(
            f"idx:{images_path}(normalization={normalization},"
            f"scale={_detect_scale(flat)})"
        ),
    )


def subset(dataset: LabeledDataset, classes, per_class_cap: int | None = None) -> LabeledDataset:
    """Restrict to the given classes, keeping the first ``per_class_cap``
    vertices of each class in file order; masses become uniform.

    ``classes`` refer to the dataset's label ids (0..K-1).
    """
    classes = list(classes)
    if not classes:
        raise ValueError("empty class list")
    k = dataset.num_classes
    for c in classes:
        if c < 0 or c >= k:
            raise ValueError(f"class {c} not present (dataset has {k} classes)")
    keep: list[int] = []
    for c in classes:
        idx = np.nonzero(dataset.labels == c)[0]
        if idx.size == 0:
            raise ValueError(f"class {c} has no samples")
        if per_class_cap is not None:
            if per_class_cap > idx.size:
                warnings.warn(
                    f"class {c} has only {idx.size} samples, below cap {per_class_cap}"
                )
            idx = idx[:per_class_cap]
        keep.extend(int(i) for i in idx)
    keep.sort()
    names = None
    if dataset.class_names is not None:
        names = [dataset.class_names[c] for c in sorted(set(classes))]
    return from_arrays(
        dataset.points[keep],
        dataset.labels[keep],
        class_names=names,
        provenance=f"{dataset.provenance}|subset(classes={classes},cap={per_class_cap})",
        merge_duplicates=False,
    )


def gen_gaussian(num_classes: int = 3, per_class: int = 1000, variance: float = 0.05,
                 mean_radius: float = 3.0, seed: int = 0) -> LabeledDataset:
    """Spherical 2-D Gaussian mixture with class means on a circle.

    Means sit at angles 2*pi*k/K on the circle of radius ``mean_radius``.
    Sampling uses a Philox counter-based generator seeded with ``seed`` and
    draws classes sequentially, so a (num_classes, per_class, variance,
    mean_radius, seed) tuple pins the dataset exactly on any platform.
    """
    if variance <= 0:
        raise ValueError("variance must be positive")
    if num_classes < 1 or per_class < 1:
        raise ValueError("num_classes and per_class must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    sigma = float(np.sqrt(variance))
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    means = mean_radius * np.column_stack([np.cos(angles), np.sin(angles)])
    blocks = [
        means[c] + sigma * rng.standard_normal((per_class, 2))
        for c in range(num_classes)
    ]
    points = np.vstack(blocks)
    labels = np.repeat(np.arange(num_classes), per_class)
    return from_arrays(
        points,
        labels,
        provenance=(
            f"gaussian(num_classes={num_classes},per_class={per_class},"
            f"variance={variance},mean_radius={mean_radius},seed={seed})"
        ),
    )


def dataset_to_json(dataset: LabeledDataset) -> str:
    doc = {
        "points": dataset.points.tolist(),
        "labels": dataset.labels.tolist(),
        "masses": dataset.masses.tolist(),
        "class_names": dataset.class_names,
        "provenance": dataset.provenance,
    }
    return json.dumps(doc)


def dataset_from_json(text: str) -> LabeledDataset:
    doc = json.loads(text)
    return LabeledDataset(
        points=np.array(doc["points"], dtype=float),
        labels=np.array(doc["labels"], dtype=int),
        masses=np.array(doc["masses"], dtype=float),
        class_names=doc.get("class_names"),
        provenance=doc.get("provenance", ""),
    )
