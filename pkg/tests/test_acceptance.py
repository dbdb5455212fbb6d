"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary and printed)
and then asserts, so a failing criterion fails the run.
"""
import dataclasses
import math
import time
from collections import Counter

import numpy as np
import pytest

from conftest import ACCEPTANCE
from oracles import brute_force_split

from ledgerpriv.attack import build_dataset, run_informed
from ledgerpriv.classifier import best_split
from ledgerpriv.features import LabeledDataset, balance_labels, extract
from ledgerpriv.harness import ExperimentSpec, run_sweep
from ledgerpriv.ledger import device_type_labels, per_device_ledgers, populate, verify_chain
from ledgerpriv.obfuscate import ObfuscationConfig, apply
from ledgerpriv.trace import PacketRecord, TraceSet, builtin_profiles, default_home, synth_trace

DAY = 86400.0
SEED = 0


def verdict(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[f"criterion {number}"] = line
    print(line)
    assert ok, line


def _informed(trace, config):
    _, data = build_dataset(trace, config)
    return run_informed(balance_labels(data, seed=config.seed), 10, seed=config.seed).mean_accuracy


@pytest.fixture(scope="module")
def day_trace():
    profiles = builtin_profiles(0.01)
    start = time.perf_counter()
    trace = synth_trace(profiles, default_home(profiles), DAY, SEED)
    return trace, time.perf_counter() - start


@pytest.fixture(scope="module")
def baseline(day_trace):
    trace, synth_s = day_trace
    start = time.perf_counter()
    acc = _informed(trace, ObfuscationConfig(seed=SEED))
    return acc, synth_s + time.perf_counter() - start


def test_criterion_01_baseline_attack(day_trace, baseline):
    trace, _ = day_trace
    acc, seconds = baseline
    n_types = len(set(trace.device_types().values()))
    verdict(1, n_types >= 15 and acc >= 0.85 and seconds <= 120,
            f"24 h, {n_types} types, informed 10-fold accuracy {acc:.3f} (>= 0.85) "
            f"in {seconds:.1f} s (<= 120 s)")


def test_criterion_02_delay_defense(day_trace, baseline):
    trace, _ = day_trace
    base, _ = baseline
    acc = {d: float(np.mean([_informed(trace, ObfuscationConfig(d, seed=s)) for s in range(3)]))
           for d in (0.5, 2.0, 30.0)}
    drop = base - acc[30.0]
    spread = abs(acc[0.5] - acc[2.0])
    verdict(2, drop >= 0.10 and spread <= 0.05,
            f"baseline {base:.3f}; delay 30 s {acc[30.0]:.3f} (drop {100 * drop:.1f} >= 10 pts); "
            f"delay 0.5 s {acc[0.5]:.3f} vs 2 s {acc[2.0]:.3f} (gap {100 * spread:.1f} <= 5 pts)")


# Sweeps share the harness defaults (6 h synthetic home, balanced labels).
@pytest.fixture(scope="module")
def ledger_sweep(tmp_path_factory):
    spec = ExperimentSpec(devices_per_ledger=(1, 17), scenarios=("informed", "blind"),
                          trials=10, seed=SEED)
    return run_sweep(spec, tmp_path_factory.mktemp("ledger")).summary()


@pytest.fixture(scope="module")
def combined_sweep(tmp_path_factory):
    spec = ExperimentSpec(max_delays=(30.0,), devices_per_ledger=(17,),
                          packets_per_transaction=(3,), scenarios=("informed", "blind"),
                          trials=10, seed=SEED)
    return run_sweep(spec, tmp_path_factory.mktemp("combined")).summary()


def test_criterion_03_multi_device_ledgers(ledger_sweep):
    k1 = ledger_sweep[(0.0, 1, 1, "informed")]
    k17 = ledger_sweep[(0.0, 17, 1, "informed")]
    verdict(3, len(k17.accuracies) >= 5 and k17.mean_accuracy <= 0.65
            and k17.mean_accuracy < k1.mean_accuracy,
            f"informed k=17 {k17.mean_accuracy:.3f} (<= 0.65) vs k=1 {k1.mean_accuracy:.3f} "
            f"over {len(k17.accuracies)} trials")


def test_criterion_04_combined_defense(ledger_sweep, combined_sweep):
    inf0 = ledger_sweep[(0.0, 1, 1, "informed")].mean_accuracy
    bl0 = ledger_sweep[(0.0, 1, 1, "blind")].mean_accuracy
    inf = combined_sweep[(30.0, 17, 3, "informed")].mean_accuracy
    bl = combined_sweep[(30.0, 17, 3, "blind")].mean_accuracy
    verdict(4, inf <= 0.40 and bl <= 0.35 and inf0 - inf >= 0.40 and bl0 - bl >= 0.40,
            f"delay 30, k 17, n 3: informed {inf:.3f} (<= 0.40, baseline {inf0:.3f}); "
            f"blind {bl:.3f} (<= 0.35, baseline {bl0:.3f})")


def test_criterion_05_label_shuffled_floor():
    profiles = builtin_profiles()
    trace = synth_trace(profiles, default_home(profiles), 3600.0, SEED)
    _, data = build_dataset(trace, ObfuscationConfig())
    rng = np.random.default_rng(SEED)
    classes = [f"class{i:02d}" for i in range(20)]
    shuffled = LabeledDataset.from_labels(data.X, list(rng.choice(classes, len(data))))
    acc = run_informed(shuffled, 10, seed=SEED).mean_accuracy
    verdict(5, abs(acc - 1 / 20) <= 0.05,
            f"20 label-shuffled classes over {len(data)} transactions: accuracy {acc:.3f} "
            f"(0.05 +/- 0.05)")


def test_criterion_06_oracle_equivalence():
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        n = int(rng.integers(2, 51))
        w = int(rng.integers(1, 4))
        # Coarse grids force duplicated values and tied splits.
        X = rng.integers(0, int(rng.integers(2, 12)), (n, w)) / 4.0
        y = rng.integers(0, int(rng.integers(2, 5)), n)
        got = best_split(X, y)
        ref = brute_force_split(X.tolist(), y.tolist())
        if ref is None:
            mismatches += got is not None
        else:
            mismatches += got is None or (got.feature, got.threshold) != (ref[0], ref[1]) \
                or not math.isclose(got.impurity, float(ref[2]), abs_tol=1e-12)
    seconds = time.perf_counter() - start
    verdict(6, mismatches == 0 and seconds <= 10,
            f"{200 - mismatches}/200 splits match the exhaustive oracle in {seconds:.2f} s")


MUTABLE = ("t_id", "p_t_id", "timestamp", "output", "pk", "sign")


def _mutate(tx, field, rng):
    value = getattr(tx, field)
    if field == "timestamp":
        new = value + float(rng.choice([-1, 1])) * float(rng.uniform(1e-6, 5.0))
    else:
        i = int(rng.integers(len(value)))
        new = value[:i] + format((int(value[i], 16) + int(rng.integers(1, 16))) % 16, "x") \
            + value[i + 1:]
    return dataclasses.replace(tx, **{field: new})


def test_criterion_07_ledger_integrity():
    profiles = builtin_profiles()
    trace = synth_trace(profiles, default_home(profiles), 1800.0, SEED)
    chains = []
    for k in (1, 4, 17):
        obfuscated, assignment = apply(ObfuscationConfig(1.0, k, 2, seed=k), trace)
        chains += populate(obfuscated, assignment, key_seed=k)
    valid = sum(verify_chain(c) for c in chains)
    rng = np.random.default_rng(SEED)
    caught = 0
    for _ in range(1000):
        chain = chains[int(rng.integers(len(chains)))]
        i = int(rng.integers(len(chain)))
        field = MUTABLE[int(rng.integers(len(MUTABLE)))]
        txs = list(chain.transactions)
        txs[i] = _mutate(txs[i], field, rng)
        caught += not verify_chain(dataclasses.replace(chain, transactions=txs))
    verdict(7, valid == len(chains) and caught == 1000,
            f"{valid}/{len(chains)} chains verify; {caught}/1000 single-field mutations detected")


def _random_trace(rng):
    n_dev = int(rng.integers(1, 8))
    records = [PacketRecord(float(t), f"d{d}", f"T{d % 3}", 0)
               for d in range(n_dev)
               for t in rng.uniform(0, 500, int(rng.integers(0, 40)))]
    return TraceSet.from_records(records, 500.0)


def _check_invariants(trace, cfg):
    out, assignment = apply(cfg, trace)
    before = Counter(r.device_id for r in trace.records)
    after = Counter(r.device_id for r in out.records)
    n = cfg.packets_per_transaction
    if any(after[d] != math.ceil(c / n) for d, c in before.items()):
        return False
    if len(out) != sum(after.values()):
        return False
    src = [r.timestamp for r in trace.records]
    if any(not 0 <= r.timestamp - src[r.payload_size] <= cfg.max_delay for r in out.records):
        return False
    ts = [r.timestamp for r in out.records]
    if ts != sorted(ts):
        return False
    ids = trace.device_ids()
    members = Counter(assignment.values())
    return (set(assignment) == set(ids) and max(members.values(), default=0) <= cfg.devices_per_ledger
            and len(members) == math.ceil(len(ids) / cfg.devices_per_ledger))


def test_criterion_08_identity_and_invariants(day_trace):
    trace = day_trace[0].window(0, 7200)
    chains = populate(trace, per_device_ledgers(trace.device_ids()), key_seed=SEED)
    base = extract(chains, device_type_labels(chains))
    _, ident = build_dataset(trace, ObfuscationConfig(seed=SEED))
    a = base.X[np.argsort(base.t_ids, kind="stable")]
    b = ident.X[np.argsort(ident.t_ids, kind="stable")]
    exact = a.shape == b.shape and a.tobytes() == b.tobytes() \
        and sorted(base.t_ids) == sorted(ident.t_ids)

    rng = np.random.default_rng(SEED)
    held = 0
    for i in range(1000):
        raw = _random_trace(rng)
        # Tag every packet with its index so delayed records can be paired up.
        trace_i = TraceSet(tuple(dataclasses.replace(r, payload_size=j)
                                 for j, r in enumerate(raw.records)), raw.duration)
        if not len(trace_i):
            held += 1
            continue
        cfg = ObfuscationConfig(float(rng.choice([0.0, 0.5, 2.0, 30.0])),
                                int(rng.integers(1, 9)), int(rng.integers(1, 5)), seed=i)
        held += _check_invariants(trace_i, cfg)
    verdict(8, exact and held == 1000,
            f"identity pipeline bit-exact: {exact}; invariants hold on {held}/1000 random traces")


def test_criterion_09_determinism(tmp_path):
    spec = ExperimentSpec(duration=1800.0, max_delays=(0.0, 2.0), devices_per_ledger=(1, 4),
                          packets_per_transaction=(1, 3), scenarios=("informed", "blind"),
                          trials=2, seed=SEED)
    run_sweep(spec, tmp_path / "a")
    run_sweep(spec, tmp_path / "b")
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("results.csv", "summary.csv"))
    verdict(9, same, f"two runs of an {len(spec.grid())}-point sweep give byte-identical CSVs")


def test_criterion_10_blind_variance_trend(ledger_sweep):
    k1 = ledger_sweep[(0.0, 1, 1, "blind")]
    k17 = ledger_sweep[(0.0, 17, 1, "blind")]
    verdict(10, len(k1.accuracies) >= 10 and k17.variance < k1.variance,
            f"blind variance k=17 {k17.variance:.4f} < k=1 {k1.variance:.4f} "
            f"over {len(k1.accuracies)} trials")
