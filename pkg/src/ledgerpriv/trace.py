"""Packet traces: the canonical CSV format and a synthetic generator.

A trace is the list of device communications that the ledger is later
populated from. Traces are either read from CSV
(``timestamp_s,device_id,device_type[,payload_size]``) or synthesized from
per-device inter-packet gap cycles.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._rng import rng_for
from .errors import ConfigError, ParseError

HEADER = ("timestamp_s", "device_id", "device_type")
PAYLOAD_COLUMN = "payload_size"
DEFAULT_JITTER = 0.01

_SYNTH_STREAM = 1


@dataclass(frozen=True, slots=True)
class PacketRecord:
    timestamp: float
    device_id: str
    device_type: str
    payload_size: int | None = None

    def __post_init__(self):
        if not self.timestamp >= 0:
            raise ValueError(f"negative or NaN timestamp {self.timestamp!r}")
        if not self.device_type:
            raise ValueError("device_type must be non-empty")
        if self.payload_size is not None and self.payload_size < 0:
            raise ValueError("payload_size must be non-negative")


@dataclass(frozen=True)
class DeviceProfile:
    """Repeating inter-packet gap pattern of one kind of device.

    ``name`` distinguishes variants sharing a ``device_type`` label; it
    defaults to the device type.
    """

    device_type: str
    gap_cycle: tuple[float, ...]
    jitter_fraction: float = DEFAULT_JITTER
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "gap_cycle", tuple(float(g) for g in self.gap_cycle))
        if not self.name:
            object.__setattr__(self, "name", self.device_type)
        if not self.gap_cycle or any(not g > 0 for g in self.gap_cycle):
            raise ConfigError(f"{self.name}: gap_cycle must be non-empty and positive")
        if not 0 <= self.jitter_fraction < 1:
            raise ConfigError(f"{self.name}: jitter_fraction must be in [0, 1)")


@dataclass(frozen=True)
class TraceSet:
    records: tuple[PacketRecord, ...]
    duration: float
    epoch: float = field(default=0.0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        prev = -math.inf
        for r in self.records:
            if r.timestamp < prev:
                raise ValueError("records must be sorted by timestamp")
            prev = r.timestamp
        if self.records and self.records[-1].timestamp > self.duration:
            raise ValueError("record timestamp exceeds trace duration")

    @classmethod
    def from_records(cls, records: Iterable[PacketRecord], duration: float | None = None,
                     epoch: float = 0.0) -> TraceSet:
        """Sort ``records`` (stable) and wrap them; duration defaults to the last timestamp."""
        ordered = sorted(records, key=lambda r: r.timestamp)
        last = ordered[-1].timestamp if ordered else 0.0
        if duration is None:
            duration = last
        return cls(tuple(ordered), max(float(duration), last), epoch)

    def __len__(self):
        return len(self.records)

    def device_ids(self) -> list[str]:
        """Device ids in order of first appearance."""
        return list(dict.fromkeys(r.device_id for r in self.records))

    def device_types(self) -> dict[str, str]:
        return {r.device_id: r.device_type for r in self.records}

    def timestamps(self) -> np.ndarray:
        return np.fromiter((r.timestamp for r in self.records), float, len(self.records))

    def filter_devices(self, device_ids: Iterable[str]) -> TraceSet:
        keep = set(device_ids)
        return TraceSet(tuple(r for r in self.records if r.device_id in keep),
                        self.duration, self.epoch)

    def window(self, start: float, stop: float) -> TraceSet:
        """Records in ``[start, stop)`` rebased so that ``start`` becomes 0."""
        recs = [PacketRecord(r.timestamp - start, r.device_id, r.device_type, r.payload_size)
                for r in self.records if start <= r.timestamp < stop]
        return TraceSet(tuple(recs), stop - start, self.epoch + start)


def format_timestamp(t: float) -> str:
    # shortest round-trip repr, padded to at least six decimals
    return np.format_float_positional(t, unique=True, trim="k", min_digits=6)


def parse_trace(csv_text: str) -> TraceSet:
    """Parse CSV trace text into a sorted :class:`TraceSet`.

    Lines starting with ``#`` before the header are comments; a
    ``# duration_s=<seconds>`` comment sets the trace duration, which
    otherwise defaults to the last timestamp.
    """
    lines = csv_text.splitlines()
    duration = None
    start = 0
    while start < len(lines) and (lines[start].startswith("#") or not lines[start].strip()):
        text = lines[start].lstrip("#").strip()
        if text.startswith("duration_s="):
            try:
                duration = float(text.split("=", 1)[1])
            except ValueError:
                raise ParseError(f"bad duration comment {lines[start]!r}", start + 1) from None
        start += 1
    if start == len(lines):
        raise ParseError("missing header", start + 1)

    reader = csv.reader(lines[start:])
    header = tuple(c.strip() for c in next(reader))
    has_payload = header == HEADER + (PAYLOAD_COLUMN,)
    if header != HEADER and not has_payload:
        raise ParseError(f"unexpected header {','.join(header)!r}", start + 1)

    width = len(header)
    records = []
    for offset, row in enumerate(reader):
        lineno = start + 2 + offset
        if not row:
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} columns, got {len(row)}", lineno)
        try:
            ts = float(row[0])
        except ValueError:
            raise ParseError(f"non-numeric timestamp {row[0]!r}", lineno) from None
        if not math.isfinite(ts) or ts < 0:
            raise ParseError(f"invalid timestamp {row[0]!r}", lineno)
        if not row[1] or not row[2]:
            raise ParseError("empty device_id or device_type", lineno)
        payload = None
        if has_payload and row[3] != "":
            try:
                payload = int(row[3])
            except ValueError:
                raise ParseError(f"non-integer payload_size {row[3]!r}", lineno) from None
            if payload < 0:
                raise ParseError("negative payload_size", lineno)
        records.append(PacketRecord(ts, row[1], row[2], payload))
    return TraceSet.from_records(records, duration)


def serialize_trace(trace: TraceSet) -> str:
    has_payload = any(r.payload_size is not None for r in trace.records)
    out = io.StringIO()
    out.write(f"# duration_s={format_timestamp(trace.duration)}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HEADER + ((PAYLOAD_COLUMN,) if has_payload else ()))
    for r in trace.records:
        row = [format_timestamp(r.timestamp), r.device_id, r.device_type]
        if has_payload:
            row.append("" if r.payload_size is None else str(r.payload_size))
        writer.writerow(row)
    return out.getvalue()


_TABLE = [
    ("Smart_Things", (0.207, 58)),
    ("Amazon_Echo", (0.217, 30, 0.004, 30)),
    ("TPLink_Camera", (0.12, 61)),
    ("Samsung_Camera", (0.165, 30)),
    ("Drop_Camera", (1.03, 0.2)),
    ("Insteon_Camera2", (0.00005,) * 9 + (0.216, 300)),
    ("Baby_Monitor", (600, 0.28)),
    ("TPLink_Smartplug", (0.24, 236)),
    ("TPLink_Smartplug", (0.12, 236)),
    ("iHome", (60, 0.205)),
    ("Nest_Smockalarm", (0.207, 0.015)),
    ("Netatmo_Weather", (1.72, 0.33)),
    ("Sleep_Sensor", (10, 0.276)),
    ("Lifx_Smartbulb", (1.92, 60)),
    ("Triby_Speaker", (120, 0.3, 120, 0.3, 56, 0.3)),
    ("Pix_Photoframe", (0.31, 65, 650)),
    ("HP_Printer", (90,)),
]


def builtin_profiles(jitter_fraction: float = DEFAULT_JITTER) -> list[DeviceProfile]:
    """Smart-home device timing signatures, one profile per device.

    The second TPLink_Smartplug variant is named ``TPLink_Smartplug_2`` but
    keeps the ``TPLink_Smartplug`` label.
    """
    profiles = []
    seen: dict[str, int] = {}
    for device_type, cycle in _TABLE:
        seen[device_type] = seen.get(device_type, 0) + 1
        name = device_type if seen[device_type] == 1 else f"{device_type}_{seen[device_type]}"
        profiles.append(DeviceProfile(device_type, cycle, jitter_fraction, name))
    return profiles


def default_home(profiles: Sequence[DeviceProfile] | None = None) -> dict[str, int]:
    """One device per profile."""
    profiles = builtin_profiles() if profiles is None else profiles
    return {p.name: 1 for p in profiles}


def _device_timestamps(profile, duration, rng, phase_offsets):
    cycle = np.asarray(profile.gap_cycle)
    phase = rng.uniform(0.0, cycle[0]) if phase_offsets else 0.0
    # enough whole cycles to pass the end of the trace even at maximum shrink
    per_cycle = cycle.sum() * (1 - profile.jitter_fraction)
    n_cycles = int(math.ceil(max(duration - phase, 0.0) / per_cycle)) + 1
    gaps = np.tile(cycle, n_cycles)
    if profile.jitter_fraction > 0:
        u = rng.uniform(-profile.jitter_fraction, profile.jitter_fraction, gaps.size)
        gaps = gaps * (1 + u)
    times = np.concatenate(([phase], phase + np.cumsum(gaps)))
    return times[times <= duration]


def synth_trace(profiles: Sequence[DeviceProfile], device_counts: Mapping[str, int],
                duration: float, seed: int, *, phase_offsets: bool = True) -> TraceSet:
    """Generate a merged trace of ``device_counts`` devices over ``duration`` seconds.

    ``device_counts`` keys are profile names (or device types, which resolve
    to the first profile of that type). Device ``i`` of the request draws its
    jitter and phase from its own sub-stream of ``seed``. Device ids are
    ``<name>-<copy index>``.
    """
    if not duration > 0:
        raise ConfigError("duration must be positive")
    by_name: dict[str, DeviceProfile] = {}
    for p in profiles:
        by_name.setdefault(p.device_type, p)
    for p in profiles:
        by_name[p.name] = p

    parts = []
    index = 0
    for name, count in device_counts.items():
        if name not in by_name:
            raise ConfigError(f"unknown device type {name!r}")
        if count < 0:
            raise ConfigError(f"negative device count for {name!r}")
        profile = by_name[name]
        for copy in range(count):
            rng = rng_for(seed, _SYNTH_STREAM, index)
            index += 1
            times = _device_timestamps(profile, duration, rng, phase_offsets)
            device_id = f"{name}-{copy}"
            parts.extend(PacketRecord(float(t), device_id, profile.device_type) for t in times)
    return TraceSet.from_records(parts, duration)
