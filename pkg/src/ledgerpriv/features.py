"""Gap-window features computed from attacker-visible ledgers.

Each transaction is described by the ``window`` inter-transaction gaps that
end at it, taken over the ledger's whole interleaved stream (the attacker
cannot tell which device inside a shared ledger issued what).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from ._rng import rng_for
from .errors import ConfigError, DataError, ParseError
from .ledger import LedgerChain

_SPLIT_STREAM = 4
_BALANCE_STREAM = 5


@dataclass(frozen=True)
class FeatureConfig:
    window: int = 5
    log_scale: bool = True
    pad_value: float = 0.0

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("window must be >= 1")


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    label: str
    ledger_id: str
    t_id: str


@dataclass
class LabeledDataset:
    """Feature matrix ``X`` with integer label codes into ``vocabulary``."""

    X: np.ndarray
    y: np.ndarray
    vocabulary: tuple[str, ...]
    ledger_ids: np.ndarray
    t_ids: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            self.X = self.X.reshape(len(self.y), -1)
        self.y = np.asarray(self.y, dtype=np.intp)
        if len(self.X) != len(self.y):
            raise DataError(f"{len(self.X)} feature rows but {len(self.y)} labels")
        self.vocabulary = tuple(self.vocabulary)
        self.ledger_ids = np.asarray(self.ledger_ids, dtype=object)
        self.t_ids = np.asarray(self.t_ids, dtype=object)
        if self.y.size and (self.y.min() < 0 or self.y.max() >= len(self.vocabulary)):
            raise DataError("label code outside vocabulary")

    @classmethod
    def from_labels(cls, X, labels: Sequence[str], ledger_ids=None, t_ids=None,
                    vocabulary: Sequence[str] | None = None) -> LabeledDataset:
        vocab = tuple(sorted(set(labels))) if vocabulary is None else tuple(vocabulary)
        index = {lab: i for i, lab in enumerate(vocab)}
        try:
            y = np.array([index[lab] for lab in labels], dtype=np.intp)
        except KeyError as exc:
            raise DataError(f"label {exc.args[0]!r} not in vocabulary") from None
        n = len(labels)
        ledger_ids = [""] * n if ledger_ids is None else ledger_ids
        t_ids = [""] * n if t_ids is None else t_ids
        return cls(X, y, vocab, ledger_ids, t_ids)

    def __len__(self):
        return len(self.y)

    @property
    def width(self) -> int:
        return self.X.shape[1]

    @property
    def labels(self) -> list[str]:
        return [self.vocabulary[c] for c in self.y]

    def subset(self, index) -> LabeledDataset:
        index = np.asarray(index, dtype=np.intp)
        return LabeledDataset(self.X[index], self.y[index], self.vocabulary,
                              self.ledger_ids[index], self.t_ids[index])

    def label_counts(self) -> dict[str, int]:
        counts = np.bincount(self.y, minlength=len(self.vocabulary))
        return {lab: int(c) for lab, c in zip(self.vocabulary, counts)}

    @property
    def examples(self) -> Iterator[FeatureVector]:
        for row, code, ledger_id, t_id in zip(self.X, self.y, self.ledger_ids, self.t_ids):
            yield FeatureVector(tuple(float(v) for v in row), self.vocabulary[code],
                                ledger_id, t_id)


def gap_windows(timestamps, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Left-padded windows of the gaps ending at each timestamp (most recent last)."""
    t = np.asarray(timestamps, dtype=float)
    w = config.window
    gaps = np.diff(t)
    if config.log_scale:
        gaps = np.log1p(gaps)
    padded = np.concatenate((np.full(w, config.pad_value), gaps))
    # row i is padded[i : i + w]: the last w of gaps 0..i-1
    idx = np.arange(len(t))[:, None] + np.arange(w)[None, :]
    return padded[idx]


def ledger_features(chains: Sequence[LedgerChain],
                    config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Feature rows for all transactions, ledger by ledger; uses timestamps only."""
    blocks = [gap_windows(chain.timestamps(), config) for chain in chains if chain.transactions]
    if not blocks:
        return np.empty((0, config.window))
    return np.vstack(blocks)


def extract(chains: Sequence[LedgerChain], labels: Mapping[str, str],
            config: FeatureConfig = FeatureConfig(),
            vocabulary: Sequence[str] | None = None) -> LabeledDataset:
    """Label every transaction's gap window with its true device type."""
    X = ledger_features(chains, config)
    names, ledger_ids, t_ids = [], [], []
    for chain in chains:
        for tx in chain.transactions:
            try:
                names.append(labels[tx.t_id])
            except KeyError:
                raise DataError(f"no label for transaction {tx.t_id}") from None
            ledger_ids.append(chain.ledger_id)
            t_ids.append(tx.t_id)
    return LabeledDataset.from_labels(X, names, ledger_ids, t_ids, vocabulary)


def split_kfold(dataset: LabeledDataset, k: int, seed: int):
    """Stratified shuffled k-fold split; returns ``[(train, test), ...]``.

    Examples are shuffled within each label, labels are laid end to end, and
    the concatenation is dealt round-robin into folds. Fold sizes then differ
    by at most one and every label is spread as evenly as possible.
    """
    n = len(dataset)
    if k < 2:
        raise ConfigError("k must be >= 2")
    if k > n:
        raise ConfigError(f"k={k} exceeds dataset size {n}")
    rng = rng_for(seed, _SPLIT_STREAM)
    order = []
    for code in range(len(dataset.vocabulary)):
        members = np.flatnonzero(dataset.y == code)
        order.append(members[rng.permutation(members.size)])
    order = np.concatenate(order) if order else np.empty(0, dtype=np.intp)
    fold_of = np.empty(n, dtype=np.intp)
    fold_of[order] = np.arange(n) % k
    folds = []
    for f in range(k):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        folds.append((dataset.subset(train), dataset.subset(test)))
    return folds


def balance_labels(dataset: LabeledDataset, per_label: int | None = None,
                   seed: int = 0) -> LabeledDataset:
    """Randomly keep at most ``per_label`` examples of each label.

    ``per_label=None`` uses the smallest non-zero label count, giving an
    exactly balanced dataset. Kept examples stay in their original order.
    """
    counts = np.bincount(dataset.y, minlength=len(dataset.vocabulary))
    present = counts[counts > 0]
    if present.size == 0:
        return dataset
    cap = int(present.min()) if per_label is None else int(per_label)
    if cap < 1:
        raise ConfigError("per_label must be >= 1")
    rng = rng_for(seed, _BALANCE_STREAM)
    keep = []
    for code in range(len(dataset.vocabulary)):
        members = np.flatnonzero(dataset.y == code)
        if members.size > cap:
            members = rng.choice(members, cap, replace=False)
        keep.append(members)
    return dataset.subset(np.sort(np.concatenate(keep)))


def export_dataset(dataset: LabeledDataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([f"f{i + 1}" for i in range(dataset.width)] + ["label", "ledger_id", "t_id"])
    for row, code, ledger_id, t_id in zip(dataset.X, dataset.y, dataset.ledger_ids,
                                          dataset.t_ids):
        writer.writerow([repr(float(v)) for v in row]
                        + [dataset.vocabulary[code], ledger_id, t_id])
    return out.getvalue()


def import_dataset(text: str) -> LabeledDataset:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or header[-3:] != ["label", "ledger_id", "t_id"] or len(header) < 4:
        raise ParseError("dataset header must be f1..fw,label,ledger_id,t_id", 1)
    width = len(header) - 3
    rows, labels, ledgers, tids = [], [], [], []
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != width + 3:
            raise ParseError(f"expected {width + 3} columns, got {len(row)}", lineno)
        try:
            rows.append([float(v) for v in row[:width]])
        except ValueError:
            raise ParseError("non-numeric feature value", lineno) from None
        labels.append(row[width])
        ledgers.append(row[width + 1])
        tids.append(row[width + 2])
    X = np.array(rows, dtype=float).reshape(len(rows), width)
    return LabeledDataset.from_labels(X, labels, ledgers, tids)
