"""Obfuscation sweeps: every grid point runs obfuscate -> populate -> extract -> attack.

Results go to ``results.csv`` (``scenario,param,trial,accuracy`` with one
``summary`` row per grid point and scenario) and ``summary.csv`` in the
output directory. Grid points are written as they finish; with
``resume=True`` points already complete on disk are reused.
"""
from __future__ import annotations

import csv
import io
import itertools
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._rng import rng_for
from ._toml import loads as toml_loads
from .attack import AttackKind, ScenarioReport, build_dataset, run_blind, run_informed
from .classifier import TrainConfig
from .errors import ConfigError, LedgerPrivError
from .features import FeatureConfig, balance_labels
from .obfuscate import ObfuscationConfig
from .trace import TraceSet, builtin_profiles, default_home, parse_trace, synth_trace

log = logging.getLogger(__name__)

RESULT_FIELDS = ("scenario", "param", "trial", "accuracy")
SUMMARY_FIELDS = ("scenario", "max_delay_s", "devices_per_ledger", "packets_per_transaction",
                  "trials", "mean_accuracy", "max_accuracy", "variance")
SUMMARY_TRIAL = "summary"

_LAB_STREAM = 6
_LAB_SEED_STREAM = 7


@dataclass
class ExperimentSpec:
    trace_path: str | None = None
    lab_trace_path: str | None = None
    duration: float = 6 * 3600.0
    jitter: float = 0.01
    devices: Mapping[str, int] | None = None
    max_delays: Sequence[float] = (0.0,)
    devices_per_ledger: Sequence[int] = (1,)
    packets_per_transaction: Sequence[int] = (1,)
    scenarios: Sequence[str] = ("informed",)
    trials: int = 5
    seed: int = 0
    folds: int = 10
    lab_fraction: float = 0.6
    window: int = 5
    max_depth: int = 20
    min_samples_split: int = 2
    balance: bool = True
    out: str = "sweep_out"

    def __post_init__(self):
        self.max_delays = tuple(float(d) for d in self.max_delays)
        self.devices_per_ledger = tuple(int(k) for k in self.devices_per_ledger)
        self.packets_per_transaction = tuple(int(n) for n in self.packets_per_transaction)
        self.scenarios = tuple(self.scenarios)
        for s in self.scenarios:
            AttackKind(s)
        if not (self.max_delays and self.devices_per_ledger and self.packets_per_transaction):
            raise ConfigError("every grid axis needs at least one value")
        for point in self.grid():
            ObfuscationConfig(*point)
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 < self.lab_fraction <= 1:
            raise ConfigError("lab_fraction must be in (0, 1]")
        if self.trace_path is None and not self.duration > 0:
            raise ConfigError("duration must be positive")

    def grid(self) -> list[tuple[float, int, int]]:
        return list(itertools.product(self.max_delays, self.devices_per_ledger,
                                      self.packets_per_transaction))

    @property
    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(window=self.window)

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(self.max_depth, self.min_samples_split, self.seed)


_SECTIONS = {
    "trace": {"path": "trace_path", "lab_path": "lab_trace_path", "duration_s": "duration",
              "jitter": "jitter", "devices": "devices"},
    "grid": {"max_delay_s": "max_delays", "devices_per_ledger": "devices_per_ledger",
             "packets_per_transaction": "packets_per_transaction"},
    "attack": {"folds": "folds", "lab_fraction": "lab_fraction", "window": "window",
               "max_depth": "max_depth", "min_samples_split": "min_samples_split",
               "balance": "balance"},
}
_TOP = {"seed": "seed", "trials": "trials", "scenarios": "scenarios", "out": "out"}


def load_spec(text: str, base_dir: str | os.PathLike | None = None) -> ExperimentSpec:
    """Parse a TOML experiment spec; relative trace paths resolve against ``base_dir``."""
    raw = toml_loads(text)
    kwargs = {}
    for key, value in raw.items():
        if key in _TOP:
            kwargs[_TOP[key]] = value
        elif key in _SECTIONS and isinstance(value, dict):
            for sub, v in value.items():
                if sub not in _SECTIONS[key]:
                    raise ConfigError(f"unknown key {key}.{sub}")
                kwargs[_SECTIONS[key][sub]] = v
        else:
            raise ConfigError(f"unknown key {key!r}")
    for name in ("max_delays", "devices_per_ledger", "packets_per_transaction", "scenarios"):
        if name in kwargs and not isinstance(kwargs[name], list):
            kwargs[name] = [kwargs[name]]
    if base_dir is not None:
        for name in ("trace_path", "lab_trace_path"):
            if kwargs.get(name):
                kwargs[name] = str(Path(base_dir, kwargs[name]))
    try:
        return ExperimentSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class SweepRow:
    max_delay: float
    devices_per_ledger: int
    packets_per_transaction: int
    scenario: str
    trial: int
    accuracy: float

    @property
    def point(self):
        return (self.max_delay, self.devices_per_ledger, self.packets_per_transaction)


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    errors: dict[tuple[float, int, int], str] = field(default_factory=dict)

    def summary(self) -> dict[tuple, ScenarioReport]:
        groups: dict[tuple, list[float]] = {}
        for r in self.rows:
            groups.setdefault(r.point + (r.scenario,), []).append(r.accuracy)
        return {key: ScenarioReport(tuple(accs)) for key, accs in groups.items()}

    def accuracies(self, scenario, max_delay, k, n) -> list[float]:
        return [r.accuracy for r in self.rows
                if r.scenario == scenario and r.point == (max_delay, k, n)]


def format_param(point) -> str:
    d, k, n = point
    return f"delay={d!r};k={k};n={n}"


def parse_param(text: str) -> tuple[float, int, int]:
    try:
        parts = dict(p.split("=", 1) for p in text.split(";"))
        return float(parts["delay"]), int(parts["k"]), int(parts["n"])
    except (ValueError, KeyError):
        raise ConfigError(f"bad grid parameter {text!r}") from None


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _point_lines(rows: Sequence[SweepRow], scenarios) -> list[list[str]]:
    lines = []
    for scenario in scenarios:
        accs = [r for r in rows if r.scenario == scenario]
        for r in accs:
            lines.append([scenario, format_param(r.point), str(r.trial), _fmt(r.accuracy)])
        if accs:
            mean = float(np.mean([r.accuracy for r in accs]))
            lines.append([scenario, format_param(accs[0].point), SUMMARY_TRIAL, _fmt(mean)])
    return lines


def read_results(text: str) -> SweepResult:
    """Per-trial rows of a results CSV (summary rows are skipped)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != RESULT_FIELDS:
        raise ConfigError("results file must start with header scenario,param,trial,accuracy")
    result = SweepResult()
    for row in reader:
        if not row or row[2] == SUMMARY_TRIAL:
            continue
        d, k, n = parse_param(row[1])
        result.rows.append(SweepRow(d, k, n, row[0], int(row[2]), float(row[3])))
    return result


def write_summary(result: SweepResult) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SUMMARY_FIELDS)
    for (d, k, n, scenario), rep in result.summary().items():
        writer.writerow([scenario, repr(d), k, n, len(rep.accuracies), _fmt(rep.mean_accuracy),
                         _fmt(rep.max_accuracy), _fmt(rep.variance)])
    return out.getvalue()


class _Sweeper:
    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.home = self._home_trace()
        self.lab = self._lab_trace() if AttackKind.BLIND.value in spec.scenarios else None

    def _home_trace(self) -> TraceSet:
        spec = self.spec
        if spec.trace_path:
            return parse_trace(Path(spec.trace_path).read_text(encoding="utf-8"))
        profiles = builtin_profiles(spec.jitter)
        return synth_trace(profiles, spec.devices or default_home(profiles), spec.duration,
                           spec.seed)

    def _lab_trace(self) -> TraceSet:
        spec = self.spec
        if spec.lab_trace_path:
            return parse_trace(Path(spec.lab_trace_path).read_text(encoding="utf-8"))
        if spec.trace_path:
            raise ConfigError("blind sweeps over a trace file need trace.lab_path")
        profiles = builtin_profiles(spec.jitter)
        lab_seed = int(rng_for(spec.seed, _LAB_SEED_STREAM).integers(2**63))
        return synth_trace(profiles, default_home(profiles), spec.duration, lab_seed)

    def trial(self, point, trial) -> dict[str, float]:
        spec = self.spec
        seed = spec.seed + trial
        config = ObfuscationConfig(*point, seed=seed)
        chains, home = build_dataset(self.home, config, spec.feature_config)
        out = {}
        for scenario in spec.scenarios:
            if scenario == AttackKind.INFORMED.value:
                data = balance_labels(home, seed=seed) if spec.balance else home
                rep = run_informed(data, spec.folds, spec.train_config, seed)
            else:
                rep = self._blind(config, chains, home, seed)
            out[scenario] = rep.mean_accuracy
        return out

    def _blind(self, config, chains, home, seed) -> ScenarioReport:
        """Random lab inventory, attacked ledger drawn at random from the home."""
        spec = self.spec
        rng = rng_for(seed, _LAB_STREAM)
        types = self.lab.device_types()
        catalog = sorted(set(types.values()))
        size = max(1, int(round(spec.lab_fraction * len(catalog))))
        trained = set(rng.choice(catalog, size, replace=False).tolist())
        lab_trace = self.lab.filter_devices(d for d, t in types.items() if t in trained)
        _, lab = build_dataset(lab_trace, config, spec.feature_config)
        target = sorted(c.ledger_id for c in chains)[rng.integers(len(chains))]
        test = home.subset(np.flatnonzero(home.ledger_ids == target))
        if spec.balance:
            lab = balance_labels(lab, seed=seed)
            test = balance_labels(test, seed=seed)
        return run_blind(lab, test, spec.train_config)


def _completed(path: Path, spec: ExperimentSpec) -> dict[tuple, list[SweepRow]]:
    if not path.exists():
        return {}
    try:
        previous = read_results(path.read_text(encoding="utf-8"))
    except (ConfigError, ValueError, IndexError):
        log.warning("ignoring unreadable %s", path)
        return {}
    done: dict[tuple, list[SweepRow]] = {}
    for r in previous.rows:
        if r.scenario in spec.scenarios and r.trial < spec.trials:
            done.setdefault(r.point, []).append(r)
    need = len(spec.scenarios) * spec.trials
    return {p: rows for p, rows in done.items() if len(rows) == need}


def run_sweep(spec: ExperimentSpec, out_dir: str | os.PathLike | None = None,
              resume: bool = False) -> SweepResult:
    """Run every grid point x trial x scenario; rows are ordered by grid index."""
    out = Path(out_dir if out_dir is not None else spec.out)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.csv"
    done = _completed(results_path, spec) if resume else {}

    sweeper = _Sweeper(spec)
    result = SweepResult()
    with open(results_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_FIELDS)
        for point in spec.grid():
            if point in done:
                rows = sorted(done[point], key=lambda r: (spec.scenarios.index(r.scenario),
                                                          r.trial))
            else:
                try:
                    rows = []
                    per_trial = [sweeper.trial(point, t) for t in range(spec.trials)]
                    for scenario in spec.scenarios:
                        rows += [SweepRow(*point, scenario, t, accs[scenario])
                                 for t, accs in enumerate(per_trial)]
                except LedgerPrivError as exc:
                    log.error("grid point %s failed: %s", format_param(point), exc)
                    result.errors[point] = str(exc)
                    continue
                log.info("grid point %s done", format_param(point))
            result.rows += rows
            writer.writerows(_point_lines(rows, spec.scenarios))
            fh.flush()
    (out / "summary.csv").write_text(write_summary(result), encoding="utf-8")
    return result
