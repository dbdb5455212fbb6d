"""CART decision tree with Gini impurity, written from scratch.

Splits are chosen by exact rational comparison of the weighted child
impurity, so results do not depend on floating-point summation order.
Ties go to the lowest feature index, then the lowest threshold; leaf ties go
to the lowest vocabulary index. Examples with ``x[feature] <= threshold``
go left.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, DomainError
from .features import LabeledDataset

LEAF = -1
_NEAR = 1e-9


def gini(labels: Iterable[Hashable]) -> float:
    counts = Counter(labels)
    n = sum(counts.values())
    if n == 0:
        raise DomainError("gini of an empty multiset")
    return 1.0 - sum((c / n) ** 2 for c in counts.values())


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    impurity: float


def _purity_score(A, n):
    # sum of squared class counts over n, as an exact fraction
    return Fraction(int(A), int(n))


def _best_on_feature(col, y_onehot_sorted_cum, sorted_vals, n):
    """Best threshold on one feature: ``(exact score, position)`` or None."""
    cand = np.flatnonzero(sorted_vals[:-1] < sorted_vals[1:])
    if cand.size == 0:
        return None
    left = y_onehot_sorted_cum[cand]
    right = y_onehot_sorted_cum[-1] - left
    n_l = cand + 1
    n_r = n - n_l
    A_l = (left * left).sum(axis=1)
    A_r = (right * right).sum(axis=1)
    approx = A_l / n_l + A_r / n_r
    top = approx.max()
    best = None
    for j in np.flatnonzero(approx >= top - _NEAR * max(1.0, abs(top))):
        nl, nr = int(n_l[j]), int(n_r[j])
        score = Fraction(int(A_l[j]) * nr + int(A_r[j]) * nl, nl * nr)
        if best is None or score > best[0]:
            best = (score, int(cand[j]))
    return best


def _midpoint(lo, hi):
    mid = (lo + hi) / 2.0
    return float(lo) if mid >= hi else float(mid)


def best_split(X, y, n_classes: int | None = None) -> Split | None:
    """Exhaustive CART split minimizing weighted child Gini impurity.

    Candidate thresholds are midpoints between consecutive distinct values of
    each feature. Returns None when no candidate lowers the impurity.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.intp)
    n = len(y)
    if n < 2:
        return None
    if X.ndim == 1:
        X = X.reshape(n, -1)
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y] = 1
    totals = onehot.sum(axis=0)
    parent = _purity_score((totals * totals).sum(), n)

    best = None
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        found = _best_on_feature(col, np.cumsum(onehot[order], axis=0), sv, n)
        if found is None:
            continue
        score, pos = found
        if best is None or score > best[0]:
            best = (score, f, _midpoint(sv[pos], sv[pos + 1]))
    if best is None or best[0] <= parent:
        return None
    score, f, thr = best
    return Split(f, thr, float(1 - score / n))


@dataclass(frozen=True)
class TrainConfig:
    max_depth: int = 20
    min_samples_split: int = 2
    # CART here is deterministic; the seed is carried for interface symmetry
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.min_samples_split < 1:
            raise ConfigError("min_samples_split must be >= 1")


@dataclass
class DecisionTree:
    """Flat node arrays; ``feature[i] == LEAF`` marks leaf ``i``."""

    vocabulary: tuple[str, ...]
    width: int
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    counts: list[np.ndarray | None] = field(default_factory=list)

    def __len__(self):
        return len(self.feature)

    def _add(self, feature=LEAF, threshold=0.0, counts=None):
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(counts)
        return len(self.feature) - 1

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] == LEAF

    def depth(self, i: int = 0) -> int:
        if self.is_leaf(i):
            return 0
        return 1 + max(self.depth(self.left[i]), self.depth(self.right[i]))

    def leaves(self) -> list[int]:
        return [i for i in range(len(self)) if self.is_leaf(i)]

    def distribution(self, leaf: int) -> dict[str, int]:
        return {lab: int(c) for lab, c in zip(self.vocabulary, self.counts[leaf]) if c}

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.width:
            raise DomainError(f"expected vectors of width {self.width}")
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        active = feature[node] != LEAF
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, feature[nd]] <= threshold[nd]
            node[r] = np.where(go_left, left[nd], right[nd])
            active = feature[node] != LEAF
        return node

    def predict_codes(self, X) -> np.ndarray:
        majority = np.array([np.argmax(c) if c is not None else -1 for c in self.counts])
        return majority[self.apply(X)]

    def predict_labels(self, X) -> list[str]:
        return [self.vocabulary[c] for c in self.predict_codes(X)]

    def to_json(self) -> str:
        nodes = []
        for i in range(len(self)):
            if self.is_leaf(i):
                nodes.append({"leaf": self.distribution(i)})
            else:
                nodes.append({"feature": self.feature[i], "threshold": self.threshold[i],
                              "left": self.left[i], "right": self.right[i]})
        return json.dumps({"vocabulary": list(self.vocabulary), "width": self.width,
                           "nodes": nodes}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> DecisionTree:
        try:
            data = json.loads(text)
            tree = cls(tuple(data["vocabulary"]), int(data["width"]))
            index = {lab: i for i, lab in enumerate(tree.vocabulary)}
            for node in data["nodes"]:
                if "leaf" in node:
                    counts = np.zeros(len(index), dtype=np.int64)
                    for lab, c in node["leaf"].items():
                        counts[index[lab]] = c
                    i = tree._add(counts=counts)
                else:
                    i = tree._add(int(node["feature"]), float(node["threshold"]))
                    tree.left[i] = int(node["left"])
                    tree.right[i] = int(node["right"])
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"malformed tree JSON: {exc}") from None
        return tree


def train(dataset: LabeledDataset, config: TrainConfig = TrainConfig()) -> DecisionTree:
    if len(dataset) == 0:
        raise DomainError("cannot train on an empty dataset")
    X, y = dataset.X, dataset.y
    n_classes = len(dataset.vocabulary)
    tree = DecisionTree(dataset.vocabulary, dataset.width)

    def grow(index, depth):
        counts = np.bincount(y[index], minlength=n_classes)
        split = None
        if depth < config.max_depth and len(index) >= config.min_samples_split \
                and np.count_nonzero(counts) > 1:
            split = best_split(X[index], y[index], n_classes)
        if split is None:
            return tree._add(counts=counts)
        node = tree._add(split.feature, split.threshold)
        mask = X[index, split.feature] <= split.threshold
        tree.left[node] = grow(index[mask], depth + 1)
        tree.right[node] = grow(index[~mask], depth + 1)
        return node

    grow(np.arange(len(dataset)), 0)
    return tree


def predict(tree: DecisionTree, vector: Sequence[float]) -> str:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (tree.width,):
        raise DomainError(f"expected a vector of width {tree.width}, got shape {vector.shape}")
    return tree.predict_labels(vector[None, :])[0]


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    total: int
    confusion: dict[str, dict[str, int]]

    @property
    def recall(self) -> dict[str, float]:
        return {true: row.get(true, 0) / sum(row.values())
                for true, row in self.confusion.items()}


def score(true_labels: Sequence[str], predicted: Sequence[str]) -> ClassificationReport:
    if len(true_labels) == 0:
        raise DomainError("cannot score an empty dataset")
    if len(true_labels) != len(predicted):
        raise DomainError("label and prediction counts differ")
    confusion: dict[str, dict[str, int]] = {}
    correct = 0
    for (t, p), c in sorted(Counter(zip(true_labels, predicted)).items()):
        confusion.setdefault(t, {})[p] = c
        if t == p:
            correct += c
    return ClassificationReport(correct / len(true_labels), len(true_labels), confusion)


def evaluate(tree: DecisionTree, dataset: LabeledDataset) -> ClassificationReport:
    if len(dataset) == 0:
        raise DomainError("cannot evaluate on an empty dataset")
    return score(dataset.labels, tree.predict_labels(dataset.X))
