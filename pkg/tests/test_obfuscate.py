import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from ledgerpriv.errors import ConfigError
from ledgerpriv.obfuscate import (ObfuscationConfig, apply, assign_multi_device,
                                  consolidate_packets, delay_transform, load_config)
from ledgerpriv.trace import PacketRecord, TraceSet


def _trace(rows, duration=None):
    return TraceSet.from_records([PacketRecord(t, d, "X") for t, d in rows], duration)


traces = st.lists(
    st.tuples(st.floats(0, 1000, allow_nan=False), st.sampled_from(["a", "b", "c", "d", "e"])),
    min_size=1, max_size=60,
).map(_trace)


def test_zero_delay_is_identity(small_home):
    assert delay_transform(small_home, 0.0, seed=3) == small_home


def test_delay_bound_30s(small_home):
    tagged = TraceSet(tuple(PacketRecord(r.timestamp, r.device_id, r.device_type, i)
                            for i, r in enumerate(small_home.records)), small_home.duration)
    out = delay_transform(tagged, 30.0, seed=3)
    src = [r.timestamp for r in tagged.records]
    assert all(src[r.payload_size] <= r.timestamp <= src[r.payload_size] + 30
               for r in out.records)
    ts = [r.timestamp for r in out.records]
    assert ts == sorted(ts)


def test_delay_reorders_for_some_seed():
    trace = _trace([(10.0, "a"), (10.1, "b")])
    inversions = sum(delay_transform(trace, 2.0, seed).records[0].device_id == "b"
                     for seed in range(1000))
    assert inversions >= 1
    # order flips when d_a - d_b > 0.1, probability (1.9/2)^2/2 ~= 0.45
    assert 350 < inversions < 550


def test_delay_negative_rejected(small_home):
    with pytest.raises(ConfigError):
        delay_transform(small_home, -1.0, seed=0)


@settings(max_examples=60, deadline=None)
@given(traces, st.floats(0, 50), st.integers(0, 2**63))
def test_delay_monotone_bound(trace, max_delay, seed):
    # tag each record by position through payload_size to pair input and output
    tagged = TraceSet(tuple(PacketRecord(r.timestamp, r.device_id, r.device_type, i)
                            for i, r in enumerate(trace.records)), trace.duration)
    out = delay_transform(tagged, max_delay, seed)
    assert out == delay_transform(tagged, max_delay, seed)
    src = {r.payload_size: r.timestamp for r in tagged.records}
    assert len(out) == len(tagged)
    for r in out.records:
        d = r.timestamp - src[r.payload_size]
        assert -1e-9 <= d <= max_delay + 1e-9


def test_assign_identity_and_full():
    ids = [f"dev{i}" for i in range(17)]
    single = assign_multi_device(ids, 1, seed=4)
    assert len(set(single.values())) == 17
    assert len(set(assign_multi_device(ids, 17, seed=4).values())) == 1


def test_assign_group_sizes():
    groups = Counter(assign_multi_device(list("abcde"), 2, seed=0).values())
    assert sorted(groups.values(), reverse=True) == [2, 2, 1]


def test_assign_errors():
    with pytest.raises(ConfigError):
        assign_multi_device([], 1, 0)
    with pytest.raises(ConfigError):
        assign_multi_device(["a"], 0, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(1, 20), st.integers(0, 2**63))
def test_assign_partition(n_devices, k, seed):
    ids = [f"d{i}" for i in range(n_devices)]
    assignment = assign_multi_device(ids, k, seed)
    assert set(assignment) == set(ids)
    sizes = Counter(assignment.values())
    assert len(sizes) == math.ceil(n_devices / k)
    assert set(sizes.values()) <= {k, n_devices % k}
    assert assignment == assign_multi_device(ids, k, seed)


def test_consolidate_examples():
    base = _trace([(0, "a"), (0.2, "a"), (58, "a"), (58.2, "a")])
    assert [r.timestamp for r in consolidate_packets(base, 2).records] == [0, 58]
    trail = _trace([(0, "a"), (0.2, "a"), (58, "a")])
    assert [r.timestamp for r in consolidate_packets(trail, 2).records] == [0, 58]
    assert consolidate_packets(base, 1) == base
    with pytest.raises(ConfigError):
        consolidate_packets(base, 0)


@settings(max_examples=60, deadline=None)
@given(traces, st.integers(1, 7))
def test_consolidation_count(trace, n):
    out = consolidate_packets(trace, n)
    before = Counter(r.device_id for r in trace.records)
    after = Counter(r.device_id for r in out.records)
    assert after == {d: math.ceil(c / n) for d, c in before.items()}
    ts = [r.timestamp for r in out.records]
    assert ts == sorted(ts)


def test_apply_identity(small_home):
    out, assignment = apply(ObfuscationConfig(0.0, 1, 1, seed=9), small_home)
    assert out == small_home
    assert len(set(assignment.values())) == len(small_home.device_ids())


def test_apply_deterministic(small_home):
    config = ObfuscationConfig(30.0, 17, 3, seed=2)
    assert apply(config, small_home) == apply(config, small_home)
    out, assignment = apply(config, small_home)
    assert len(set(assignment.values())) == 1
    assert len(out) < len(small_home)


def test_config_validation_and_file():
    with pytest.raises(ConfigError):
        ObfuscationConfig(max_delay=-1)
    with pytest.raises(ConfigError):
        ObfuscationConfig(devices_per_ledger=0)
    with pytest.raises(ConfigError):
        ObfuscationConfig(packets_per_transaction=0)
    config = ObfuscationConfig(2.0, 4, 3, 77)
    assert load_config(config.to_toml()) == config
    assert load_config("max_delay_s = 30\n") == ObfuscationConfig(30.0)
    with pytest.raises(ConfigError):
        load_config("bogus = 1\n")
    with pytest.raises(ConfigError):
        load_config("devices_per_ledger = 1.5\n")
    with pytest.raises(ConfigError):
        load_config("max_delay_s = \n")
