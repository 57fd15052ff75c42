"""Datasets, stratified splits and minority oversampling."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DegenerateClass, MalformedCSV, MolpixError, TooFewRecords, UnknownTask
from .smiles import parse_smiles

log = logging.getLogger(__name__)

CLASSIFICATION = "classification"
REGRESSION = "regression"
N_FOLDS = 5
MIN_RECORDS = 50
MAX_OVERSAMPLED_RATIO = 1.25


@dataclass(frozen=True)
class Record:
    id: str
    smiles: str
    label: float


@dataclass
class Dataset:
    records: list[Record]
    kind: str
    name: str = "custom"
    task: str = ""
    skipped: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if self.kind not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task kind {self.kind!r}")
        for r in self.records:
            if not math.isfinite(r.label):
                raise ValueError(f"record {r.id} has a non-finite label")
            if self.kind == CLASSIFICATION and r.label not in (0.0, 1.0):
                raise ValueError(f"record {r.id}: classification labels must be 0 or 1, got {r.label}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.float64)

    @property
    def smiles(self) -> list[str]:
        return [r.smiles for r in self.records]

    def subset(self, keep: list[int]) -> "Dataset":
        return Dataset([self.records[i] for i in keep], self.kind, self.name, self.task, Counter(self.skipped))


def holdout_fraction(name: str) -> float:
    """Held-out test share: 1/6 for Tox21 subtasks and HIV, 1/10 otherwise."""
    key = name.lower()
    return 1 / 6 if key.startswith("tox21") or key == "hiv" else 1 / 10


def _column(fieldnames: list[str], wanted: str) -> str | None:
    for f in fieldnames:
        if f.strip().lower() == wanted:
            return f
    return None


def load_csv(path: str | Path, task: str, name: str = "custom", kind: str | None = None,
             validate_smiles: bool = True) -> Dataset:
    """Read ``id,smiles,<task>...``; rows with an empty task cell are dropped.

    ``kind`` is inferred when omitted: labels all in {0, 1} means
    classification. Unparseable SMILES are skipped and counted per error type.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise MalformedCSV(f"{path}: missing header row")
        smiles_col = _column(reader.fieldnames, "smiles")
        if smiles_col is None:
            raise MalformedCSV(f"{path}: no 'smiles' column in header {reader.fieldnames}")
        id_col = _column(reader.fieldnames, "id")
        if task not in reader.fieldnames:
            raise UnknownTask(f"task {task!r} not among columns {reader.fieldnames}")
        rows: list[tuple[str, str, float]] = []
        skipped: Counter = Counter()
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise MalformedCSV(f"{path}:{lineno}: wrong number of fields")
            cell = row[task].strip()
            if cell == "":
                skipped["missing label"] += 1
                continue
            try:
                value = float(cell)
            except ValueError:
                raise MalformedCSV(f"{path}:{lineno}: label {cell!r} is not numeric") from None
            smi = row[smiles_col].strip()
            rid = row[id_col].strip() if id_col else str(lineno - 1)
            if validate_smiles:
                try:
                    parse_smiles(smi)
                except MolpixError as exc:
                    skipped[type(exc).__name__] += 1
                    log.warning("%s:%d skipped %s: %s", path, lineno, rid, exc)
                    continue
            rows.append((rid, smi, value))
    if kind is None:
        kind = CLASSIFICATION if rows and all(v in (0.0, 1.0) for _, _, v in rows) else REGRESSION
    records = [Record(i, s, v) for i, s, v in rows]
    return Dataset(records, kind, name, task, skipped)


@dataclass(frozen=True)
class SplitPlan:
    test: list[int]
    folds: list[tuple[list[int], list[int]]]
    seed: int

    @property
    def pool(self) -> list[int]:
        return sorted(i for _, val in self.folds for i in val)


def _deal(order: list[int], k: int) -> list[list[int]]:
    """Deal a sequence round-robin into k piles."""
    return [order[f::k] for f in range(k)]


def make_splits(d: Dataset, seed: int, min_records: int = MIN_RECORDS,
                test_share: float | None = None, n_folds: int = N_FOLDS) -> SplitPlan:
    """Carve a test set, then partition the rest into ``n_folds`` validation folds.

    For classification both steps are stratified: positives and negatives are
    shuffled separately and laid end to end before dealing, so every fold gets
    its proportional share of positives to within one sample.
    """
    n = len(d)
    if n < min_records:
        raise TooFewRecords(f"{n} records, need at least {min_records}")
    share = holdout_fraction(d.name) if test_share is None else test_share
    n_test = int(math.floor(n * share + 1e-9))
    rng = np.random.default_rng(seed)
    labels = d.labels

    if d.kind == CLASSIFICATION:
        pos = [int(i) for i in rng.permutation(np.flatnonzero(labels == 1))]
        neg = [int(i) for i in rng.permutation(np.flatnonzero(labels == 0))]
        if not pos or not neg:
            raise DegenerateClass("dataset contains a single class")
        test_pos = int(round(n_test * len(pos) / n))
        test = pos[:test_pos] + neg[: n_test - test_pos]
        pool_order = pos[test_pos:] + neg[n_test - test_pos:]
    else:
        order = [int(i) for i in rng.permutation(n)]
        test, pool_order = order[:n_test], order[n_test:]

    piles = _deal(pool_order, n_folds)
    folds = []
    for f in range(n_folds):
        val = sorted(piles[f])
        train = sorted(i for g in range(n_folds) if g != f for i in piles[g])
        folds.append((train, val))
    plan = SplitPlan(sorted(test), folds, seed)
    if d.kind == CLASSIFICATION:
        for name, idx in [("test", plan.test)] + [
                (f"fold {f} {part}", ix) for f, (tr, va) in enumerate(folds) for part, ix in (("train", tr), ("validation", va))]:
            if idx and len(set(labels[idx])) < 2:
                raise DegenerateClass(f"{name} split would contain a single class")
    return plan


def oversample(indices, labels, max_ratio: float = MAX_OVERSAMPLED_RATIO) -> list[int]:
    """Replicate minority-class indices floor(majority/minority) times.

    When floor replication still leaves the majority more than ``max_ratio``
    times larger, the leading minority indices receive one more copy each
    until the ratio is within bound. The result is sorted so the caller's
    shuffle alone decides order.
    """
    indices = [int(i) for i in indices]
    labels = np.asarray(labels)
    pos = [i for i in indices if labels[i] == 1]
    neg = [i for i in indices if labels[i] == 0]
    if not pos or not neg:
        return sorted(indices)
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    k = len(majority) // len(minority)
    extra = max(0, math.ceil(len(majority) / max_ratio) - k * len(minority))
    out = [i for i in majority] + [i for i in minority for _ in range(k)] + sorted(minority)[:extra]
    return sorted(out)


def sample_weights(indices, labels) -> dict[int, int]:
    """Replication count of each index after oversampling."""
    return dict(Counter(oversample(indices, labels)))
