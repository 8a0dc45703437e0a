"""Datasets, synthetic generators, and on-disk formats for run artifacts.

A :class:`Dataset` is stored columnar (ids, features, labels) but behaves as an
ordered collection of samples. Datasets are immutable after construction; all
"mutating" helpers return new instances.

Dataset files are CSV with header ``id,f0,...,f{d-1},label`` plus an optional
JSON sidecar ``<path>.meta.json`` carrying num_classes, split tag, and
generator metadata (e.g. which ids had their labels flipped).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DatasetParseError

TRAIN = "train"
VALIDATION = "validation"


@dataclass(frozen=True)
class Sample:
    """One labeled point: integer id, feature vector, class index."""

    id: int
    features: np.ndarray
    label: int


class Dataset:
    """Immutable labeled dataset with K classes.

    Parameters
    ----------
    ids : (n,) int array of unique sample ids.
    features : (n, d) float array.
    labels : (n,) int array with values in [0, num_classes).
    num_classes : number of classes K >= 2 (columns of every influence matrix).
    split_tag : "train" or "validation". A validation split must contain at
        least one sample of every class.
    metadata : JSON-serializable dict (e.g. {"flipped_ids": [...]}).
    """

    def __init__(self, ids, features, labels, num_classes, split_tag=TRAIN,
                 metadata=None, _coverage_check=True):
        ids = np.asarray(ids, dtype=np.int64)
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        n = features.shape[0]
        if n == 0:
            raise ValueError("empty dataset")
        if ids.shape != (n,) or labels.shape != (n,):
            raise ValueError("ids, features, labels must agree in length")
        if len(np.unique(ids)) != n:
            raise ValueError("sample ids must be unique")
        if num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if labels.min() < 0 or labels.max() >= num_classes:
            raise ValueError("labels must lie in [0, num_classes)")
        if split_tag not in (TRAIN, VALIDATION):
            raise ValueError(f"unknown split_tag {split_tag!r}")
        if split_tag == VALIDATION and _coverage_check:
            present = np.unique(labels)
            if len(present) != num_classes:
                missing = sorted(set(range(num_classes)) - set(present.tolist()))
                raise ValueError(f"validation split missing classes {missing}")
        for arr in (ids, features, labels):
            arr.setflags(write=False)
        self.ids = ids
        self.features = features
        self.labels = labels
        self.num_classes = int(num_classes)
        self.split_tag = split_tag
        self.metadata = dict(metadata or {})

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def __iter__(self):
        for i in range(len(self)):
            yield Sample(int(self.ids[i]), self.features[i], int(self.labels[i]))

    def __getitem__(self, i):
        return Sample(int(self.ids[i]), self.features[i], int(self.labels[i]))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.num_classes == other.num_classes
                and self.split_tag == other.split_tag
                and np.array_equal(self.ids, other.ids)
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and self.metadata == other.metadata)

    def sample_by_id(self, sample_id):
        idx = np.flatnonzero(self.ids == sample_id)
        if len(idx) == 0:
            raise KeyError(f"no sample with id {sample_id}")
        return self[int(idx[0])]

    def class_subset(self, k):
        """Samples with label k, order preserved (a view, not a full split)."""
        mask = self.labels == k
        if not mask.any():
            raise ValueError(f"class {k} has no samples")
        return Dataset(self.ids[mask], self.features[mask], self.labels[mask],
                       self.num_classes, self.split_tag, _coverage_check=False)

    def subset(self, indices):
        """Positional subset, order given by `indices`."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.ids[indices], self.features[indices],
                       self.labels[indices], self.num_classes, self.split_tag,
                       self.metadata, _coverage_check=False)

    def without_ids(self, drop_ids):
        """New dataset with the given sample ids removed."""
        drop = set(int(i) for i in np.atleast_1d(np.asarray(drop_ids)))
        mask = np.array([int(i) not in drop for i in self.ids])
        if mask.all():
            return self
        return Dataset(self.ids[mask], self.features[mask], self.labels[mask],
                       self.num_classes, self.split_tag, self.metadata)

    def retagged(self, split_tag):
        return Dataset(self.ids, self.features, self.labels, self.num_classes,
                       split_tag, self.metadata)


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparableNoisyGeometry:
    """Geometry of the two linearly separable point clouds.

    Two uniform disks ("circular uniform distribution") with a gap between
    them; label noise is injected afterwards by flipping labels in place.
    """

    blue_center: tuple = (-2.0, 0.0)
    orange_center: tuple = (2.0, 0.0)
    radius: float = 1.5


@dataclass(frozen=True)
class NonseparableGeometry:
    """Geometry of the overlapping (non-linearly-separable) pair.

    Blue is a uniform disk. Orange is drawn from the same circular scheme but
    with an angle-modulated radius r(phi) = r0 * (1 + a * sin(phi)), which
    smears it across the blue cloud so no hyperplane separates them.
    """

    blue_center: tuple = (0.0, 0.0)
    blue_radius: float = 2.0
    orange_center: tuple = (1.6, 0.0)
    orange_r0: float = 1.6
    orange_a: float = 0.6


def _uniform_disk(rng, n, center, radius_of_angle):
    """n points with angle ~ U[0,2pi) and radius r(phi)*sqrt(u) (uniform disk
    when r is constant)."""
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    r = radius_of_angle(phi) * np.sqrt(rng.uniform(0.0, 1.0, size=n))
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1) + np.asarray(center)


def gen_separable_noisy(n_blue, n_orange, flips_blue, flips_orange, seed,
                        geometry=SeparableNoisyGeometry(), split_tag=TRAIN):
    """Two separable clouds with exactly `flips_*` labels flipped per cloud.

    Flipped ids are recorded in ``metadata["flipped_ids"]`` so downstream
    checks never have to re-derive the noise ground truth.
    """
    if n_blue <= 0 or n_orange <= 0:
        raise ConfigurationError("cloud sizes must be positive")
    if flips_blue < 0 or flips_orange < 0:
        raise ConfigurationError("flip counts must be non-negative")
    if flips_blue > n_blue or flips_orange > n_orange:
        raise ConfigurationError("cannot flip more samples than a cloud contains")
    rng = np.random.default_rng(seed)
    g = geometry
    xb = _uniform_disk(rng, n_blue, g.blue_center, lambda phi: g.radius)
    xo = _uniform_disk(rng, n_orange, g.orange_center, lambda phi: g.radius)
    features = np.concatenate([xb, xo])
    labels = np.concatenate([np.zeros(n_blue, dtype=np.int64),
                             np.ones(n_orange, dtype=np.int64)])
    ids = np.arange(n_blue + n_orange, dtype=np.int64)
    flip_b = rng.choice(n_blue, size=flips_blue, replace=False)
    flip_o = n_blue + rng.choice(n_orange, size=flips_orange, replace=False)
    flipped = np.sort(np.concatenate([flip_b, flip_o])).astype(np.int64)
    labels = labels.copy()
    labels[flipped] = 1 - labels[flipped]
    metadata = {"generator": "separable_noisy", "seed": int(seed),
                "flipped_ids": [int(i) for i in flipped]}
    return Dataset(ids, features, labels, num_classes=2, split_tag=split_tag,
                   metadata=metadata)


def gen_nonseparable(n_per_class, seed, geometry=NonseparableGeometry(),
                     split_tag=TRAIN):
    """Two overlapping clouds with no flipped labels.

    The orange cloud's radius varies with angle, interleaving it with the blue
    disk; the best linear classifier is strictly below 1.0 on both classes.
    """
    if n_per_class < 2:
        raise ConfigurationError("n_per_class must be >= 2")
    rng = np.random.default_rng(seed)
    g = geometry
    xb = _uniform_disk(rng, n_per_class, g.blue_center, lambda phi: g.blue_radius)
    xo = _uniform_disk(rng, n_per_class, g.orange_center,
                       lambda phi: g.orange_r0 * (1.0 + g.orange_a * np.sin(phi)))
    features = np.concatenate([xb, xo])
    labels = np.concatenate([np.zeros(n_per_class, dtype=np.int64),
                             np.ones(n_per_class, dtype=np.int64)])
    ids = np.arange(2 * n_per_class, dtype=np.int64)
    metadata = {"generator": "nonseparable", "seed": int(seed), "flipped_ids": []}
    return Dataset(ids, features, labels, num_classes=2, split_tag=split_tag,
                   metadata=metadata)


def gen_class_blobs(n_per_class, centers, sigma, seed, split_tag=TRAIN):
    """K Gaussian blobs for multi-class fixtures (K > 2 tests).

    `centers` is a (K, d) array-like; `sigma` a scalar or length-K vector of
    isotropic standard deviations (unequal sigmas make selected classes
    deliberately under-perform).
    """
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] < 2:
        raise ConfigurationError("centers must be (K, d) with K >= 2")
    if n_per_class <= 0:
        raise ConfigurationError("n_per_class must be positive")
    num_classes = centers.shape[0]
    sigmas = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (num_classes,))
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for k in range(num_classes):
        feats.append(centers[k] + sigmas[k] * rng.standard_normal((n_per_class, centers.shape[1])))
        labels.append(np.full(n_per_class, k, dtype=np.int64))
    features = np.concatenate(feats)
    labels = np.concatenate(labels)
    ids = np.arange(len(labels), dtype=np.int64)
    metadata = {"generator": "class_blobs", "seed": int(seed)}
    return Dataset(ids, features, labels, num_classes=num_classes,
                   split_tag=split_tag, metadata=metadata)


# ---------------------------------------------------------------------------
# On-disk formats
# ---------------------------------------------------------------------------

def _sidecar_path(path):
    return Path(str(path) + ".meta.json")


def save_dataset(dataset, path):
    """Write CSV (header ``id,f0,...,f{d-1},label``) plus the JSON sidecar.

    Floats are written with ``repr`` so the round trip is bit-exact.
    """
    path = Path(path)
    d = dataset.dim
    header = "id," + ",".join(f"f{j}" for j in range(d)) + ",label"
    lines = [header]
    for i in range(len(dataset)):
        feats = ",".join(repr(float(v)) for v in dataset.features[i])
        lines.append(f"{int(dataset.ids[i])},{feats},{int(dataset.labels[i])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    sidecar = {"format_version": 1, "num_classes": dataset.num_classes,
               "split_tag": dataset.split_tag, "metadata": dataset.metadata}
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2) + "\n",
                                   encoding="utf-8", newline="\n")


def load_dataset(path):
    """Parse a dataset CSV (and sidecar if present); inverse of save_dataset.

    Raises DatasetParseError naming the offending 1-based line on malformed
    rows, out-of-range labels, or inconsistent feature dimension.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise DatasetParseError("file is empty")
    header = lines[0].split(",")
    if len(header) < 3 or header[0] != "id" or header[-1] != "label":
        raise DatasetParseError("header must be id,f0,...,label", line=1)
    d = len(header) - 2
    if [h for h in header[1:-1]] != [f"f{j}" for j in range(d)]:
        raise DatasetParseError("feature columns must be f0..f{d-1}", line=1)

    num_classes = None
    split_tag = TRAIN
    metadata = {}
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        num_classes = meta.get("num_classes")
        split_tag = meta.get("split_tag", TRAIN)
        metadata = meta.get("metadata", {})

    ids, feats, labels = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d + 2:
            raise DatasetParseError(
                f"expected {d + 2} fields, got {len(parts)}", line=lineno)
        try:
            ids.append(int(parts[0]))
            feats.append([float(v) for v in parts[1:-1]])
            labels.append(int(parts[-1]))
        except ValueError as exc:
            raise DatasetParseError(str(exc), line=lineno) from None
        if labels[-1] < 0 or (num_classes is not None and labels[-1] >= num_classes):
            raise DatasetParseError(
                f"label {labels[-1]} out of range [0, {num_classes})", line=lineno)
    if not ids:
        raise DatasetParseError("no data rows (header-only file)")
    if num_classes is None:
        num_classes = max(labels) + 1
    try:
        return Dataset(ids, np.asarray(feats), labels, num_classes, split_tag,
                       metadata)
    except ValueError as exc:
        raise DatasetParseError(str(exc)) from None


@dataclass
class RunManifest:
    """Root description of a run directory; round-trips losslessly via JSON."""

    seed: int
    dataset_path: str
    model_config: dict
    hyperparameters: dict = field(default_factory=dict)
    artifact_paths: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(seed=int(data["seed"]), dataset_path=data["dataset_path"],
                   model_config=dict(data["model_config"]),
                   hyperparameters=dict(data.get("hyperparameters", {})),
                   artifact_paths=dict(data.get("artifact_paths", {})))

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text(encoding="utf-8"))
