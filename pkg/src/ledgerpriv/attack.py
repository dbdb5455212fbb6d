"""Informed and blind device-classification attacks on populated ledgers."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import obfuscate
from .classifier import ClassificationReport, TrainConfig, evaluate, train
from .errors import ConfigError, DomainError
from .features import FeatureConfig, LabeledDataset, balance_labels, extract, split_kfold
from .ledger import LedgerChain, device_type_labels, populate
from .obfuscate import ObfuscationConfig
from .trace import TraceSet

DAY = 86400.0


class AttackKind(str, enum.Enum):
    INFORMED = "informed"
    BLIND = "blind"


@dataclass(frozen=True)
class AttackScenario:
    kind: AttackKind
    trained_types: frozenset[str] = frozenset()
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "trained_types", frozenset(self.trained_types))
        if self.kind is AttackKind.BLIND and not self.trained_types:
            raise ConfigError("a blind scenario needs a non-empty trained_types set")
        if self.kind is AttackKind.INFORMED and self.folds < 2:
            raise ConfigError("informed scenarios need folds >= 2")


@dataclass(frozen=True)
class ScenarioReport:
    """Accuracy of one attack, aggregated over folds or trials."""

    accuracies: tuple[float, ...]
    recall: dict[str, float] = field(default_factory=dict)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def max_accuracy(self) -> float:
        return max(self.accuracies)

    @property
    def variance(self) -> float:
        return float(np.var(self.accuracies))

    @classmethod
    def from_reports(cls, reports: Sequence[ClassificationReport]) -> ScenarioReport:
        pooled: dict[str, dict[str, int]] = {}
        for rep in reports:
            for true, row in rep.confusion.items():
                acc = pooled.setdefault(true, {})
                for pred, c in row.items():
                    acc[pred] = acc.get(pred, 0) + c
        recall = {t: row.get(t, 0) / sum(row.values()) for t, row in sorted(pooled.items())}
        return cls(tuple(r.accuracy for r in reports), recall)

    @classmethod
    def combine(cls, reports: Sequence[ScenarioReport]) -> ScenarioReport:
        """One component per report (its mean), e.g. to aggregate trials."""
        return cls(tuple(r.mean_accuracy for r in reports))


def build_dataset(trace: TraceSet, config: ObfuscationConfig,
                  feature_config: FeatureConfig = FeatureConfig(),
                  ) -> tuple[list[LedgerChain], LabeledDataset]:
    """Obfuscate, populate ledgers and extract labeled features."""
    obfuscated, assignment = obfuscate.apply(config, trace)
    chains = populate(obfuscated, assignment, key_seed=config.seed)
    return chains, extract(chains, device_type_labels(chains), feature_config)


def run_informed(dataset: LabeledDataset, folds: int = 10,
                 train_config: TrainConfig = TrainConfig(), seed: int = 0) -> ScenarioReport:
    """Stratified k-fold cross validation; the attacker trained on every home device type."""
    reports = []
    for train_set, test_set in split_kfold(dataset, folds, seed):
        if len(train_set) == 0:
            raise DomainError("empty training fold")
        reports.append(evaluate(train(train_set, train_config), test_set))
    return ScenarioReport.from_reports(reports)


def run_blind(train_dataset: LabeledDataset, test_dataset: LabeledDataset,
              train_config: TrainConfig = TrainConfig()) -> ScenarioReport:
    """Train on the attacker's lab, score on every target transaction.

    Transactions of device types absent from the lab can never be predicted
    correctly and count as errors.
    """
    if len(train_dataset) == 0:
        raise DomainError("blind attacker has an empty training set")
    tree = train(train_dataset, train_config)
    return ScenarioReport.from_reports([evaluate(tree, test_dataset)])


def _lab_dataset(lab_trace, scenario, config, feature_config):
    keep = [d for d, t in lab_trace.device_types().items() if t in scenario.trained_types]
    if not keep:
        raise ConfigError("lab trace has no devices of the trained types")
    return build_dataset(lab_trace.filter_devices(keep), config, feature_config)[1]


def run_daily(trace: TraceSet, scenario: AttackScenario, obfuscation: ObfuscationConfig,
              days: int, *, lab_trace: TraceSet | None = None,
              feature_config: FeatureConfig = FeatureConfig(),
              train_config: TrainConfig = TrainConfig(),
              balance: bool = True) -> list[ScenarioReport]:
    """Run ``scenario`` independently on each one-day window of ``trace``.

    Every day reuses the same seeds, so identical days give identical
    reports. Blind scenarios train on ``lab_trace`` restricted to the
    scenario's trained types.
    """
    if days < 1:
        raise ConfigError("days must be >= 1")
    if trace.duration < days * DAY:
        raise ConfigError(f"trace covers {trace.duration:.0f} s, need {days * DAY:.0f} s")
    if scenario.kind is AttackKind.BLIND and lab_trace is None:
        raise ConfigError("blind daily runs need a lab trace")

    lab = None
    if scenario.kind is AttackKind.BLIND:
        lab = _lab_dataset(lab_trace, scenario, obfuscation, feature_config)
        if balance:
            lab = balance_labels(lab, seed=scenario.seed)

    reports = []
    for day in range(days):
        window = trace.window(day * DAY, (day + 1) * DAY)
        _, data = build_dataset(window, obfuscation, feature_config)
        if balance:
            data = balance_labels(data, seed=scenario.seed)
        if scenario.kind is AttackKind.INFORMED:
            reports.append(run_informed(data, scenario.folds, train_config, scenario.seed))
        else:
            reports.append(run_blind(lab, data, train_config))
    return reports
