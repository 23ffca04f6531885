"""Dataset loading, preprocessing, corruption, and batch scheduling.

Datasets are immutable by convention: every transform returns a new
``LabeledDataset`` and never touches the input's arrays in place. Sample
ids are dense ``0..N-1`` integers within each split and are what the
soft-label store keys on, so they must stay stable across epochs.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "LabeledDataset",
    "CsvSchema",
    "NormStats",
    "BatchPlan",
    "load_csv",
    "zscore_normalize",
    "corrupt_labels",
    "corruption_indices",
    "gaussian_blobs",
    "train_test_split",
    "epoch_batches",
]


@dataclass(frozen=True)
class CsvSchema:
    """Column layout learned from one CSV, reusable on a sibling file.

    ``categories`` maps a column name to its category vocabulary (in
    first-appearance order) for one-hot columns, or to ``None`` for
    numeric columns. ``class_names`` fixes the label-to-index mapping.
    """

    label_name: str
    column_names: tuple[str, ...]
    categories: dict[str, tuple[str, ...] | None]
    class_names: tuple[str, ...]


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray  # (N, D) float64
    labels: np.ndarray  # (N,) int64 in [0, num_classes)
    num_classes: int
    ids: np.ndarray = field(default=None)  # (N,) int64, dense and unique
    class_names: tuple[str, ...] | None = None
    schema: CsvSchema | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValueError(
                f"labels {labels.shape} do not match {features.shape[0]} feature rows"
            )
        if features.shape[0] < 1:
            raise ValueError("dataset has no rows")
        if not np.isfinite(features).all():
            raise ValueError("features contain NaN or infinite entries")
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError(f"labels outside [0, {self.num_classes})")
        ids = self.ids
        if ids is None:
            ids = np.arange(features.shape[0], dtype=np.int64)
        else:
            ids = np.asarray(ids, dtype=np.int64)
            if ids.shape != labels.shape or len(np.unique(ids)) != ids.size:
                raise ValueError("ids must be unique and match the number of rows")
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _parse_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path, label_column, has_header: bool = True, schema: CsvSchema | None = None) -> LabeledDataset:
    """Load a UTF-8 comma-separated file into a dataset.

    ``label_column`` names the header column holding the class (or gives
    its 0-based index when there is no header). Columns where every cell
    parses as a number become single features; anything else becomes a
    one-hot block over categories in first-appearance order. Labels are
    likewise mapped to dense indices in first-appearance order.

    Pass the ``schema`` of an already-loaded file to encode a sibling
    file identically (same columns, category order, and class mapping);
    unseen categories or labels then raise with the offending row.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if has_header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: header only, no data rows")
    else:
        names = [f"col{i}" for i in range(len(rows[0]))]
    n_cols = len(names)
    for r, row in enumerate(rows):
        if len(row) != n_cols:
            raise ValueError(f"{path}: row {r + 1} has {len(row)} cells, expected {n_cols}")

    if isinstance(label_column, int):
        if not 0 <= label_column < n_cols:
            raise ValueError(f"{path}: label column index {label_column} out of range")
        label_name = names[label_column]
    else:
        if label_column not in names:
            raise ValueError(f"{path}: label column {label_column!r} not found in {names}")
        label_name = label_column
    label_idx = names.index(label_name)

    if schema is not None:
        if tuple(names) != schema.column_names or label_name != schema.label_name:
            raise ValueError(f"{path}: columns {names} do not match the given schema")

    cells = [[row[c].strip() for row in rows] for c in range(n_cols)]
    feature_cols = [c for c in range(n_cols) if c != label_idx]
    if not feature_cols:
        raise ValueError(f"{path}: no feature columns besides the label")

    categories: dict[str, tuple[str, ...] | None] = {}
    blocks: list[np.ndarray] = []
    for c in feature_cols:
        name = names[c]
        parsed = [_parse_float(v) for v in cells[c]]
        if schema is not None:
            vocab = schema.categories[name]
            numeric = vocab is None
        else:
            numeric = all(v is not None for v in parsed)
            vocab = None
        if numeric:
            bad = next((r for r, v in enumerate(parsed) if v is None), None)
            if bad is not None:
                raise ValueError(
                    f"{path}: row {bad + 1}, column {name!r}: "
                    f"cannot parse {cells[c][bad]!r} as a number"
                )
            categories[name] = None
            blocks.append(np.asarray(parsed, dtype=np.float64)[:, None])
        else:
            if vocab is None:
                vocab = tuple(dict.fromkeys(cells[c]))
            lookup = {v: i for i, v in enumerate(vocab)}
            onehot = np.zeros((len(rows), len(vocab)))
            for r, v in enumerate(cells[c]):
                if v not in lookup:
                    raise ValueError(
                        f"{path}: row {r + 1}, column {name!r}: unseen category {v!r}"
                    )
                onehot[r, lookup[v]] = 1.0
            categories[name] = vocab
            blocks.append(onehot)

    raw_labels = cells[label_idx]
    if schema is not None:
        class_names = schema.class_names
    else:
        class_names = tuple(dict.fromkeys(raw_labels))
    class_lookup = {v: i for i, v in enumerate(class_names)}
    labels = np.empty(len(rows), dtype=np.int64)
    for r, v in enumerate(raw_labels):
        if v not in class_lookup:
            raise ValueError(f"{path}: row {r + 1}: unseen label {v!r}")
        labels[r] = class_lookup[v]

    out_schema = schema or CsvSchema(
        label_name=label_name,
        column_names=tuple(names),
        categories=categories,
        class_names=class_names,
    )
    return LabeledDataset(
        features=np.hstack(blocks),
        labels=labels,
        num_classes=len(out_schema.class_names),
        class_names=out_schema.class_names,
        schema=out_schema,
    )


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray


def zscore_normalize(
    ds: LabeledDataset, stats: NormStats | None = None
) -> tuple[LabeledDataset, NormStats]:
    """Standardize features to zero mean and unit variance.

    Statistics are computed from ``ds`` unless ``stats`` is given, which
    is how a test split reuses its training split's statistics. Columns
    with zero spread map to exactly 0 rather than dividing by zero.
    """
    if stats is None:
        stats = NormStats(mean=ds.features.mean(axis=0), std=ds.features.std(axis=0))
    safe = np.where(stats.std > 0.0, stats.std, 1.0)
    features = (ds.features - stats.mean) / safe
    return replace(ds, features=features), stats


def _corruption_count(n: int, rate: float) -> int:
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"corruption rate must be in [0, 1], got {rate}")
    return int(round(rate * n))


def corruption_indices(n: int, rate: float, seed: int) -> np.ndarray:
    """The exact sample rows ``corrupt_labels`` redraws for this seed, sorted."""
    count = _corruption_count(n, rate)
    return np.sort(np.random.default_rng(seed).choice(n, size=count, replace=False))


def corrupt_labels(ds: LabeledDataset, rate: float, seed: int) -> LabeledDataset:
    """Redraw ``round(rate * N)`` labels uniformly over all classes.

    The replacement is drawn from all ``C`` classes, so a corrupted row
    may keep its original label by chance. Identical seeds corrupt
    identical rows with identical replacements. Features and ids are
    untouched.
    """
    count = _corruption_count(ds.n, rate)
    rng = np.random.default_rng(seed)
    # first draw from the seed is the row selection; corruption_indices
    # reproduces it for provenance records
    idx = rng.choice(ds.n, size=count, replace=False)
    labels = ds.labels.copy()
    labels[idx] = rng.integers(0, ds.num_classes, size=count)
    return replace(ds, labels=labels)


def gaussian_blobs(
    num_classes: int,
    dim: int,
    per_class: int,
    separation: float,
    seed: int,
) -> LabeledDataset:
    """Isotropic unit-variance Gaussian clusters with known geometry.

    Class ``c``'s mean sits at ``separation / sqrt(2)`` along axis ``c``,
    so every pair of means is exactly ``separation`` apart (this needs
    ``dim >= num_classes``). Rows are shuffled so labels are not grouped.
    """
    if num_classes < 2 or per_class < 1 or dim < 1:
        raise ValueError("counts must be positive and num_classes >= 2")
    if dim < num_classes:
        raise ValueError(f"dim must be >= num_classes, got {dim} < {num_classes}")
    if separation < 0.0:
        raise ValueError(f"separation must be nonnegative, got {separation}")
    rng = np.random.default_rng(seed)
    n = num_classes * per_class
    labels = np.repeat(np.arange(num_classes), per_class)
    means = np.zeros((num_classes, dim))
    means[np.arange(num_classes), np.arange(num_classes)] = separation / math.sqrt(2.0)
    features = rng.standard_normal((n, dim)) + means[labels]
    order = rng.permutation(n)
    return LabeledDataset(
        features=features[order], labels=labels[order], num_classes=num_classes
    )


def train_test_split(
    ds: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded shuffle split; both sides get fresh dense ids."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test fraction must be in (0, 1), got {test_fraction}")
    n_test = int(round(ds.n * test_fraction))
    if n_test < 1 or n_test >= ds.n:
        raise ValueError(f"test fraction {test_fraction} leaves an empty split for n={ds.n}")
    order = np.random.default_rng(seed).permutation(ds.n)
    test_rows, train_rows = order[:n_test], order[n_test:]

    def take(rows: np.ndarray) -> LabeledDataset:
        return LabeledDataset(
            features=ds.features[rows],
            labels=ds.labels[rows],
            num_classes=ds.num_classes,
            class_names=ds.class_names,
            schema=ds.schema,
        )

    return take(train_rows), take(test_rows)


@dataclass(frozen=True)
class BatchPlan:
    """Deterministic epoch-by-epoch batch order for one dataset."""

    num_samples: int
    batch_size: int
    seed: int

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def epoch_batches(plan: BatchPlan, epoch: int) -> list[np.ndarray]:
    """Sample-id batches for one epoch of the plan.

    Each epoch draws a fresh permutation seeded by ``(plan.seed, epoch)``,
    so any epoch's order can be reproduced without replaying the ones
    before it. Every id appears exactly once; a final short batch is kept
    rather than dropped.
    """
    if epoch < 1:
        raise ValueError(f"epoch must be >= 1, got {epoch}")
    order = np.random.default_rng([plan.seed, epoch]).permutation(plan.num_samples)
    return [
        order[start : start + plan.batch_size]
        for start in range(0, plan.num_samples, plan.batch_size)
    ]
