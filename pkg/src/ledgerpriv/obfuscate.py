"""Timestamp obfuscation defenses.

Three transforms applied between the packet trace and ledger population:

* random release delay of every transaction, uniform in ``[0, max_delay]``;
* multi-packet transactions, collapsing runs of ``n`` packets per device;
* multi-device ledgers, randomly grouping ``k`` devices per shared ledger.

:func:`apply` composes them as consolidate -> delay -> assign.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ._rng import rng_for
from ._toml import loads as toml_loads
from .errors import ConfigError
from .trace import PacketRecord, TraceSet

_DELAY_STREAM = 2
_ASSIGN_STREAM = 3


@dataclass(frozen=True)
class ObfuscationConfig:
    max_delay: float = 0.0
    devices_per_ledger: int = 1
    packets_per_transaction: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (self.max_delay >= 0 and math.isfinite(self.max_delay)):
            raise ConfigError("max_delay must be a finite value >= 0")
        if self.devices_per_ledger < 1:
            raise ConfigError("devices_per_ledger must be >= 1")
        if self.packets_per_transaction < 1:
            raise ConfigError("packets_per_transaction must be >= 1")

    @property
    def is_identity(self) -> bool:
        return (self.max_delay == 0 and self.devices_per_ledger == 1
                and self.packets_per_transaction == 1)

    def to_toml(self) -> str:
        return (f"max_delay_s = {self.max_delay!r}\n"
                f"devices_per_ledger = {self.devices_per_ledger}\n"
                f"packets_per_transaction = {self.packets_per_transaction}\n"
                f"seed = {self.seed}\n")


_CONFIG_KEYS = {
    "max_delay_s": ("max_delay", float),
    "devices_per_ledger": ("devices_per_ledger", int),
    "packets_per_transaction": ("packets_per_transaction", int),
    "seed": ("seed", int),
}


def load_config(text: str) -> ObfuscationConfig:
    """Read a flat ``key = value`` config; missing keys take defaults."""
    raw = toml_loads(text)
    kwargs = {}
    for key, value in raw.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown obfuscation key {key!r}")
        name, kind = _CONFIG_KEYS[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        if kind is int and value != int(value):
            raise ConfigError(f"{key} must be an integer")
        kwargs[name] = kind(value)
    return ObfuscationConfig(**kwargs)


def delay_transform(trace: TraceSet, max_delay: float, seed: int) -> TraceSet:
    if not max_delay >= 0:
        raise ConfigError("max_delay must be >= 0")
    if max_delay == 0:
        return trace
    rng = rng_for(seed, _DELAY_STREAM)
    delays = rng.uniform(0.0, max_delay, len(trace.records))
    moved = [PacketRecord(r.timestamp + float(d), r.device_id, r.device_type, r.payload_size)
             for r, d in zip(trace.records, delays)]
    return TraceSet.from_records(moved, trace.duration + max_delay, trace.epoch)


def assign_multi_device(device_ids: Sequence[str], k: int, seed: int) -> dict[str, str]:
    """Shuffle devices and cut the order into ledgers of ``k`` (last may be short)."""
    if k < 1:
        raise ConfigError("devices_per_ledger must be >= 1")
    ids = list(dict.fromkeys(device_ids))
    if not ids:
        raise ConfigError("no devices to assign")
    order = rng_for(seed, _ASSIGN_STREAM).permutation(len(ids))
    return {ids[j]: f"L{pos // k:04d}" for pos, j in enumerate(order)}


def consolidate_packets(trace: TraceSet, n: int) -> TraceSet:
    """Per device, every run of ``n`` consecutive packets becomes one record
    carrying the run's first timestamp."""
    if n < 1:
        raise ConfigError("packets_per_transaction must be >= 1")
    if n == 1:
        return trace
    seen: dict[str, int] = {}
    kept = []
    for r in trace.records:
        i = seen.get(r.device_id, 0)
        seen[r.device_id] = i + 1
        if i % n == 0:
            kept.append(r)
    return TraceSet(tuple(kept), trace.duration, trace.epoch)


def apply(config: ObfuscationConfig, trace: TraceSet,
          device_ids: Sequence[str] | None = None) -> tuple[TraceSet, dict[str, str]]:
    """Run all three defenses; returns the transformed trace and the ledger assignment."""
    if device_ids is None:
        device_ids = trace.device_ids()
    out = consolidate_packets(trace, config.packets_per_transaction)
    out = delay_transform(out, config.max_delay, config.seed)
    assignment = assign_multi_device(device_ids, config.devices_per_ledger, config.seed)
    return out, assignment

