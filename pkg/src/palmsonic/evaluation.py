"""Dataset manifests, deterministic splits, and the metric suite.

The split follows the 0.8/0.1/0.1 protocol with floor sizing: train gets
floor(0.8*N), validation floor(0.1*N), and test the remainder, so reported
test accuracy never benefits from a shrunken denominator. Infested is the
positive class everywhere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifiers import LABELS, POSITIVE

__all__ = [
    "ManifestRecord",
    "DatasetManifest",
    "DatasetSplit",
    "ConfusionMatrix",
    "Metrics",
    "split",
    "confusion",
    "metrics",
    "load_manifest",
    "save_manifest",
]

SPLIT_RATIOS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class ManifestRecord:
    clip_id: str
    audio_path: str
    label: str
    timestamp: str = ""

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r} for clip {self.clip_id!r}")


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple

    def __post_init__(self):
        records = tuple(self.records)
        ids = [r.clip_id for r in records]
        if len(set(ids)) != len(ids):
            raise ValueError("clip ids must be unique")
        object.__setattr__(self, "records", records)

    def class_counts(self) -> dict:
        counts = {label: 0 for label in LABELS}
        for r in self.records:
            counts[r.label] += 1
        return counts

    def labels_by_id(self) -> dict:
        return {r.clip_id: r.label for r in self.records}

    def validate_paths(self) -> list:
        """Clip ids whose audio paths do not resolve."""
        return [r.clip_id for r in self.records if not Path(r.audio_path).exists()]


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    val: tuple
    test: tuple
    seed: int
    ratios: tuple = SPLIT_RATIOS


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    precision_defined: bool = True
    recall_defined: bool = True


def split(manifest, seed: int, stratify: bool = False) -> DatasetSplit:
    """Shuffle clip ids with a seeded generator, then cut 0.8/0.1/0.1.

    With stratify=True the floor rule applies per class before the parts are
    merged; the default mirrors a plain shuffled split.
    """
    ids = [r.clip_id for r in manifest.records]
    if len(ids) < 3:
        raise ValueError("need at least 3 clips to split")
    rng = np.random.default_rng(seed)
    if not stratify:
        train, val, test = _partition(ids, rng)
    else:
        train, val, test = [], [], []
        for label in LABELS:
            class_ids = [r.clip_id for r in manifest.records if r.label == label]
            if not class_ids:
                continue
            tr, va, te = _partition(class_ids, rng)
            train += tr
            val += va
            test += te
    return DatasetSplit(train=tuple(train), val=tuple(val), test=tuple(test), seed=seed)


def _partition(ids, rng):
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n = len(ids)
    n_train = int(np.floor(0.8 * n))
    n_val = int(np.floor(0.1 * n))
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )


def confusion(preds, labels) -> ConfusionMatrix:
    """Count TP/FP/TN/FN with infested as the positive class."""
    preds = list(preds)
    labels = list(labels)
    if len(preds) != len(labels):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(labels)} labels")
    if not preds:
        raise ValueError("cannot build a confusion matrix from empty inputs")
    tp = fp = tn = fn = 0
    for pred, truth in zip(preds, labels):
        predicted_positive = pred.label == POSITIVE
        actually_positive = truth == POSITIVE
        if predicted_positive and actually_positive:
            tp += 1
        elif predicted_positive:
            fp += 1
        elif actually_positive:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, precision, recall, F1; undefined ratios become 0, flagged."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision_defined = (cm.tp + cm.fp) > 0
    recall_defined = (cm.tp + cm.fn) > 0
    precision = cm.tp / (cm.tp + cm.fp) if precision_defined else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if recall_defined else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        precision_defined=precision_defined,
        recall_defined=recall_defined,
    )


MANIFEST_HEADER = ["clip_id", "path", "label", "timestamp"]


def save_manifest(manifest: DatasetManifest, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for r in manifest.records:
            writer.writerow([r.clip_id, r.audio_path, r.label, r.timestamp])
    return path


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ValueError(f"{path}: expected header {','.join(MANIFEST_HEADER)}")
        records = []
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}: malformed row {row!r}")
            records.append(ManifestRecord(*row))
    return DatasetManifest(records=tuple(records))
