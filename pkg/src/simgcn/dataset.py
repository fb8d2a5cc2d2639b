"""Feature/label loading, synthetic data, stratified folds and label masks.

File formats:

* feature CSV -- no header, one sample per row, comma-separated decimals,
  written with 17 significant digits so a save/load round trip is bit-exact
* label CSV   -- no header, rows ``index,class_name`` with indices 0..n-1
* fold plans and masks serialize to small JSON documents

All randomized operations are pure functions of (inputs, seed).
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateLabels,
    EmptyInput,
    InsufficientClassSize,
    InvalidConfig,
    ParseError,
)
from .serialize import format_float, read_json, write_json


@dataclass
class FeatureMatrix:
    """n x d array of finite embedding coordinates."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise InvalidConfig(f"feature matrix must be 2-D, got shape {self.values.shape}")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise InvalidConfig(f"feature matrix must be at least 1x1, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            i, j = np.argwhere(~np.isfinite(self.values))[0]
            raise InvalidConfig(f"non-finite feature value at row {i}, column {j}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass
class LabelVector:
    """Per-sample class ids in [0, C) plus the class-name table."""

    labels: np.ndarray
    class_names: list

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_names = list(self.class_names)
        if self.labels.ndim != 1 or self.labels.size < 1:
            raise InvalidConfig("labels must be a non-empty 1-D array")
        if self.C < 2:
            raise DegenerateLabels("need at least two classes")
        if self.labels.min() < 0 or self.labels.max() >= self.C:
            raise InvalidConfig("label id outside [0, C)")
        present = np.bincount(self.labels, minlength=self.C)
        if np.any(present == 0):
            missing = int(np.argmin(present))
            raise InvalidConfig(f"class {self.class_names[missing]!r} has no members")

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def C(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.C)


@dataclass
class LabelMask:
    """Boolean visibility mask: True entries are labeled during training."""

    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 1:
            raise InvalidConfig("mask must be 1-D")

    @property
    def labeled_count(self) -> int:
        return int(self.mask.sum())

    @property
    def n(self) -> int:
        return self.mask.size


@dataclass
class SplitPlan:
    """Stratified fold assignment for every node."""

    fold_count: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        if self.fold_count < 2:
            raise InvalidConfig("fold_count must be >= 2")
        if self.assignments.min() < 0 or self.assignments.max() >= self.fold_count:
            raise InvalidConfig("fold assignment outside [0, fold_count)")

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)


# ---------------------------------------------------------------------------
# loaders / writers


def _read_lines(path) -> list:
    if not os.path.exists(path):
        raise ParseError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    lines = raw.split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    return lines


def load_features(path) -> FeatureMatrix:
    """Parse a headerless feature CSV; errors carry row/column positions."""
    lines = _read_lines(path)
    if not lines:
        raise EmptyInput(f"no rows in {path}")
    rows = [line.split(",") for line in lines]
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"ragged input: row {i} has {len(row)} cells, expected {width}")
    try:
        values = np.array(rows, dtype=np.float64)
    except ValueError:
        for i, row in enumerate(rows):
            for j, cell in enumerate(row):
                try:
                    float(cell)
                except ValueError:
                    hint = " (header row?)" if i == 0 else ""
                    raise ParseError(
                        f"non-numeric value {cell.strip()!r} at row {i}, column {j}{hint}"
                    ) from None
        raise
    if not np.all(np.isfinite(values)):
        i, j = np.argwhere(~np.isfinite(values))[0]
        raise ParseError(f"non-finite value at row {i}, column {j}")
    return FeatureMatrix(values)


def save_features(features: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in features.values:
            fh.write(",".join(format_float(v) for v in row))
            fh.write("\n")


def load_labels(path) -> LabelVector:
    """Parse ``index,class_name`` rows; indices must run 0..n-1 in order."""
    lines = _read_lines(path)
    if not lines:
        raise EmptyInput(f"no rows in {path}")
    names: list = []
    name_to_id: dict = {}
    labels = np.empty(len(lines), dtype=np.int64)
    for i, line in enumerate(lines):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"row {i}: expected 'index,class_name', got {line!r}")
        idx_text, name = parts[0].strip(), parts[1].strip()
        try:
            idx = int(idx_text)
        except ValueError:
            raise ParseError(f"row {i}: non-integer index {idx_text!r}") from None
        if idx != i:
            raise ParseError(f"row {i}: expected index {i}, found {idx} (gap or duplicate)")
        if not name:
            raise ParseError(f"row {i}: empty class name")
        if name not in name_to_id:
            name_to_id[name] = len(names)
            names.append(name)
        labels[i] = name_to_id[name]
    if len(names) < 2:
        raise DegenerateLabels(f"only one class ({names[0]!r}) in {path}")
    return LabelVector(labels, names)


def save_labels(labels: LabelVector, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, c in enumerate(labels.labels):
            fh.write(f"{i},{labels.class_names[c]}\n")


# ---------------------------------------------------------------------------
# splits and masks


def make_folds(labels: LabelVector, fold_count: int, seed: int) -> SplitPlan:
    """Stratified fold assignment.

    Within each class, members are shuffled by the seeded generator and dealt
    round-robin; the starting fold rotates with the class id so remainders
    spread across folds.
    """
    if fold_count < 2:
        raise InvalidConfig(f"fold_count must be >= 2, got {fold_count}")
    counts = labels.class_counts()
    for c, cnt in enumerate(counts):
        if cnt < fold_count:
            raise InsufficientClassSize(
                f"class {labels.class_names[c]!r} has {cnt} members, fewer than {fold_count} folds"
            )
    rng = np.random.default_rng(seed)
    assignments = np.empty(labels.n, dtype=np.int64)
    for c in range(labels.C):
        members = np.flatnonzero(labels.labels == c)
        perm = rng.permutation(members)
        start = c % fold_count
        for pos, node in enumerate(perm):
            assignments[node] = (start + pos) % fold_count
    return SplitPlan(fold_count, assignments, seed)


def make_label_mask(labels: LabelVector, labeled_fraction: float, seed: int) -> LabelMask:
    """Stratified visibility mask: per class, round(fraction * count) members
    are marked labeled, never fewer than one."""
    if not 0.0 < labeled_fraction < 1.0:
        raise InvalidConfig(f"labeled_fraction must be in (0,1), got {labeled_fraction}")
    rng = np.random.default_rng(seed)
    mask = np.zeros(labels.n, dtype=bool)
    for c in range(labels.C):
        members = np.flatnonzero(labels.labels == c)
        n_lab = max(1, round(labeled_fraction * members.size))
        perm = rng.permutation(members)
        mask[perm[:n_lab]] = True
    return LabelMask(mask)


def synth_blobs(
    classes: int,
    per_class: int,
    dims: int,
    center_distance: float,
    noise_std: float,
    seed: int,
):
    """Gaussian blobs with axis-aligned class centers.

    Class c sits at center_distance along coordinate axis c, which requires
    dims >= classes. Returns (FeatureMatrix, LabelVector) in class-block
    order, bit-identical for identical arguments.
    """
    if classes < 2:
        raise InvalidConfig(f"classes must be >= 2, got {classes}")
    if per_class < 1:
        raise InvalidConfig(f"per_class must be >= 1, got {per_class}")
    if dims < 1:
        raise InvalidConfig(f"dims must be >= 1, got {dims}")
    if dims < classes:
        raise InvalidConfig(f"dims ({dims}) must be >= classes ({classes})")
    if center_distance <= 0:
        raise InvalidConfig("center_distance must be > 0")
    if noise_std <= 0:
        raise InvalidConfig("noise_std must be > 0")
    rng = np.random.default_rng(seed)
    n = classes * per_class
    values = rng.normal(0.0, noise_std, size=(n, dims))
    for c in range(classes):
        values[c * per_class : (c + 1) * per_class, c] += center_distance
    labels = np.repeat(np.arange(classes, dtype=np.int64), per_class)
    names = [f"class_{c}" for c in range(classes)]
    return FeatureMatrix(values), LabelVector(labels, names)


def standardize_features(features: FeatureMatrix) -> FeatureMatrix:
    """Per-column z-score; constant columns are left centered at zero."""
    mean = features.values.mean(axis=0)
    std = features.values.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return FeatureMatrix((features.values - mean) / std)


# ---------------------------------------------------------------------------
# JSON persistence for splits and masks


def save_folds(plan: SplitPlan, path) -> None:
    write_json(
        {"seed": plan.seed, "fold_count": plan.fold_count, "assignments": plan.assignments},
        path,
    )


def load_folds(path) -> SplitPlan:
    doc = read_json(path)
    return SplitPlan(int(doc["fold_count"]), np.asarray(doc["assignments"]), int(doc["seed"]))


def save_mask(mask: LabelMask, path, seed: int, fraction: float) -> None:
    write_json({"seed": seed, "fraction": fraction, "mask": mask.mask}, path)


def load_mask(path) -> LabelMask:
    doc = read_json(path)
    return LabelMask(np.asarray(doc["mask"], dtype=bool))
