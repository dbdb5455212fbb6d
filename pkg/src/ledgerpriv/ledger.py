"""Hash-chained transaction ledgers and block formation.

Every packet becomes one transaction ``T_ID | P.T_ID | timestamp | Output |
PK | Sign``. Transactions of a ledger are chained through ``p_t_id``; a
device uses a fresh public key for every transaction and ``output`` commits
to the hash of the next one. Signatures are simulated with a hash; see
:class:`HashSigner`.

Hashes are SHA-256 over UTF-8 text, rendered as lowercase hex. The canonical
transaction text is ``p_t_id|timestamp|output|pk`` (the signed message) and
``t_id`` hashes that text followed by ``|sign``. Timestamps are rendered with
``repr`` so that any change to the float changes the hash.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import ConfigError, ParseError
from .trace import TraceSet

GENESIS = "0" * 64
DEFAULT_BLOCKSIZE = 100
EXPORT_FIELDS = ("t_id", "p_t_id", "ledger_id", "timestamp", "output", "pk", "sign")
LABEL_FIELDS = ("t_id", "device_id", "device_type")


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


class Signer(Protocol):
    def sign(self, pk: str, message: str) -> str: ...

    def verify(self, pk: str, message: str, signature: str) -> bool: ...


class HashSigner:
    """Stand-in signer: ``sign = sha256(pk | message)``.

    Only timestamps matter to the attack, so no key material is modelled.
    """

    def sign(self, pk: str, message: str) -> str:
        return sha256_hex(f"{pk}|{message}")

    def verify(self, pk: str, message: str, signature: str) -> bool:
        return self.sign(pk, message) == signature


DEFAULT_SIGNER = HashSigner()


@dataclass(frozen=True, slots=True)
class Transaction:
    t_id: str
    p_t_id: str
    timestamp: float
    output: str
    pk: str
    sign: str
    # ground truth, never part of the hashed or exported form
    true_device_id: str | None = field(default=None, compare=False)
    true_device_type: str | None = field(default=None, compare=False)

    def message(self) -> str:
        return unsigned_body(self.p_t_id, self.timestamp, self.output, self.pk)

    def visible(self) -> tuple:
        return (self.t_id, self.p_t_id, self.timestamp, self.output, self.pk, self.sign)


def unsigned_body(p_t_id: str, timestamp: float, output: str, pk: str) -> str:
    return f"{p_t_id}|{float(timestamp)!r}|{output}|{pk}"


def transaction_id(message: str, sign: str) -> str:
    return sha256_hex(f"{message}|{sign}")


@dataclass
class KeyState:
    """Per-device key rotation state; ``counter`` counts issued transactions."""

    device_id: str
    key_seed: int
    counter: int = 0
    _upcoming: str | None = field(default=None, repr=False, compare=False)

    def key(self, counter: int) -> str:
        return sha256_hex(f"{self.key_seed}|{self.device_id}|{counter}")

    def next_keys(self) -> tuple[str, str]:
        """Return ``(pk, output)`` for the next transaction and advance."""
        pk = self._upcoming if self._upcoming is not None else self.key(self.counter)
        self.counter += 1
        self._upcoming = self.key(self.counter)
        return pk, sha256_hex(self._upcoming)


@dataclass
class LedgerChain:
    ledger_id: str
    transactions: list[Transaction]
    member_devices: frozenset[str] = frozenset()

    def __len__(self):
        return len(self.transactions)

    def timestamps(self) -> list[float]:
        return [tx.timestamp for tx in self.transactions]


@dataclass(frozen=True)
class Block:
    block_id: str
    prev_block_id: str
    transactions: tuple[Transaction, ...]


def _new_transaction(prev, timestamp, keys, device_id, device_type, signer):
    pk, output = keys.next_keys()
    message = unsigned_body(prev, timestamp, output, pk)
    sign = signer.sign(pk, message)
    return Transaction(transaction_id(message, sign), prev, timestamp, output, pk, sign,
                       device_id, device_type)


def populate(trace: TraceSet, assignment: Mapping[str, str], key_seed: int,
             signer: Signer = DEFAULT_SIGNER) -> list[LedgerChain]:
    """One transaction per packet, chained per ledger in timestamp order.

    Ledgers are returned in order of first appearance in the trace.
    """
    keys: dict[str, KeyState] = {}
    chains: dict[str, LedgerChain] = {}
    members: dict[str, set[str]] = {}
    for rec in trace.records:
        try:
            ledger_id = assignment[rec.device_id]
        except KeyError:
            raise ConfigError(f"device {rec.device_id!r} has no ledger assignment") from None
        chain = chains.get(ledger_id)
        if chain is None:
            chain = chains[ledger_id] = LedgerChain(ledger_id, [])
            members[ledger_id] = set()
        state = keys.get(rec.device_id)
        if state is None:
            state = keys[rec.device_id] = KeyState(rec.device_id, key_seed)
        prev = chain.transactions[-1].t_id if chain.transactions else GENESIS
        chain.transactions.append(
            _new_transaction(prev, rec.timestamp, state, rec.device_id, rec.device_type, signer))
        members[ledger_id].add(rec.device_id)
    for ledger_id, chain in chains.items():
        chain.member_devices = frozenset(members[ledger_id])
    return list(chains.values())


def per_device_ledgers(device_ids: Iterable[str]) -> dict[str, str]:
    """Baseline assignment: every device keeps its own ledger."""
    return {d: f"L{i:04d}" for i, d in enumerate(device_ids)}


def verify_chain(chain: LedgerChain, signer: Signer = DEFAULT_SIGNER) -> bool:
    prev_id = GENESIS
    prev_ts = float("-inf")
    for tx in chain.transactions:
        if tx.p_t_id != prev_id or tx.timestamp < prev_ts:
            return False
        message = tx.message()
        if not signer.verify(tx.pk, message, tx.sign):
            return False
        if transaction_id(message, tx.sign) != tx.t_id:
            return False
        prev_id, prev_ts = tx.t_id, tx.timestamp
    return True


def _block_id(prev_block_id: str, transactions: Sequence[Transaction]) -> str:
    return sha256_hex("|".join([prev_block_id, *(tx.t_id for tx in transactions)]))


def form_blocks(chains: Sequence[LedgerChain], blocksize: int = DEFAULT_BLOCKSIZE) -> list[Block]:
    """Partition the global timestamp-ordered stream into blocks of ``blocksize``."""
    if blocksize < 1:
        raise ConfigError("blocksize must be at least 1")
    stream = [(tx.timestamp, li, ti, tx)
              for li, chain in enumerate(chains)
              for ti, tx in enumerate(chain.transactions)]
    stream.sort(key=lambda item: item[:3])
    txs = [item[3] for item in stream]
    blocks = []
    prev = GENESIS
    for start in range(0, len(txs), blocksize):
        part = tuple(txs[start:start + blocksize])
        block = Block(_block_id(prev, part), prev, part)
        blocks.append(block)
        prev = block.block_id
    return blocks


def verify_blocks(blocks: Sequence[Block]) -> bool:
    prev = GENESIS
    for block in blocks:
        if block.prev_block_id != prev or _block_id(prev, block.transactions) != block.block_id:
            return False
        prev = block.block_id
    return True


def export_ledger(chains: Sequence[LedgerChain]) -> str:
    """JSON-lines, one attacker-visible transaction per line."""
    lines = []
    for chain in chains:
        for tx in chain.transactions:
            row = {"t_id": tx.t_id, "p_t_id": tx.p_t_id, "ledger_id": chain.ledger_id,
                   "timestamp": tx.timestamp, "output": tx.output, "pk": tx.pk, "sign": tx.sign}
            lines.append(json.dumps(row))
    return "".join(line + "\n" for line in lines)


def import_ledger(text: str) -> list[LedgerChain]:
    chains: dict[str, LedgerChain] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            tx = Transaction(row["t_id"], row["p_t_id"], float(row["timestamp"]),
                             row["output"], row["pk"], row["sign"])
            ledger_id = str(row["ledger_id"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"bad ledger record: {exc}", lineno) from None
        chains.setdefault(ledger_id, LedgerChain(ledger_id, [])).transactions.append(tx)
    return list(chains.values())


def export_labels(chains: Sequence[LedgerChain]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(LABEL_FIELDS)
    for chain in chains:
        for tx in chain.transactions:
            writer.writerow([tx.t_id, tx.true_device_id, tx.true_device_type])
    return out.getvalue()


def import_labels(text: str) -> dict[str, tuple[str, str]]:
    """``t_id -> (device_id, device_type)``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != LABEL_FIELDS:
        raise ParseError("labels file must start with header t_id,device_id,device_type", 1)
    labels = {}
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", lineno)
        labels[row[0]] = (row[1], row[2])
    return labels


def device_type_labels(chains: Sequence[LedgerChain]) -> dict[str, str]:
    """Ground-truth ``t_id -> device_type`` from populated chains."""
    return {tx.t_id: tx.true_device_type for chain in chains for tx in chain.transactions}
