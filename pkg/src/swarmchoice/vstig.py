"""Versioned local-communication tuple space (virtual stigmergy).

Every robot keeps a local store of (key, value, lamport, writer) entries.
Each access (read or write) broadcasts the current entry to the local
neighborhood; receiving a newer entry adopts and rebroadcasts it, an older
one triggers a repair rebroadcast of the local copy.  Two writes with the
same lamport clock from different writers are a communication conflict,
resolved by keeping the larger value (writer id breaks ties), which makes
the merge a commutative, associative join.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

KEY_AGG_A = "agg_A"
KEY_AGG_B = "agg_B"
KEY_IDS = {KEY_AGG_A: 0, KEY_AGG_B: 1}
_ID_KEYS = {v: k for k, v in KEY_IDS.items()}

# uint8 key id, float64 value, uint64 lamport, uint32 writer
_WIRE = struct.Struct("<BdQI")
WIRE_SIZE = _WIRE.size


@dataclass(frozen=True)
class StigEntry:
    key: str
    value: float
    lamport: int
    writer: int


def merge_entries(a: StigEntry, b: StigEntry) -> StigEntry:
    """Winning entry of two versions: higher lamport, then value, then writer."""
    if (a.lamport, a.value, a.writer) >= (b.lamport, b.value, b.writer):
        return a
    return b


def encode_entry(entry: StigEntry) -> bytes:
    return _WIRE.pack(KEY_IDS[entry.key], entry.value, entry.lamport, entry.writer)


def decode_entry(data: bytes) -> StigEntry:
    key_id, value, lamport, writer = _WIRE.unpack(data)
    return StigEntry(_ID_KEYS[key_id], value, lamport, writer)


@dataclass
class StigStore:
    """One robot's view of the tuple space plus its broadcast queue."""

    owner: int
    entries: dict[str, StigEntry] = field(default_factory=dict)
    conflict_count: int = 0
    outbox: list[StigEntry] = field(default_factory=list)

    def _local(self, key: str) -> StigEntry:
        return self.entries.get(key) or StigEntry(key, 0.0, 0, self.owner)

    def put(self, key: str, value: float, self_id: int | None = None) -> StigEntry:
        writer = self.owner if self_id is None else self_id
        entry = StigEntry(key, value, self._local(key).lamport + 1, writer)
        self.entries[key] = entry
        self.outbox.append(entry)
        return entry

    def get(self, key: str) -> float:
        entry = self._local(key)
        self.outbox.append(entry)  # reads broadcast too ("each access")
        return entry.value

    def peek(self, key: str) -> float:
        """Read without broadcasting (observer/metrics use only)."""
        return self._local(key).value

    def on_receive(self, incoming: StigEntry) -> None:
        local = self._local(incoming.key)
        if incoming.lamport > local.lamport:
            self.entries[incoming.key] = incoming
            self.outbox.append(incoming)
        elif incoming.lamport < local.lamport:
            self.outbox.append(local)  # repair the stale sender
        elif incoming.lamport == 0 or incoming.writer == local.writer:
            pass  # duplicate (or both sides empty): nothing to resolve
        else:
            self.conflict_count += 1
            winner = merge_entries(local, incoming)
            self.entries[incoming.key] = winner
            self.outbox.append(winner)

    def update_belief(self, key: str, avg_bel: float, weight: float) -> float:
        """Blend a fresh averaged belief into the shared aggregate."""
        old = self.get(key)
        new = old + weight * (avg_bel - old)
        self.put(key, new)
        return new

    def drain(self) -> list[StigEntry]:
        out, self.outbox = self.outbox, []
        return out


def stig_put(store: StigStore, key: str, value: float, self_id: int) -> StigEntry:
    return store.put(key, value, self_id)


def stig_get(store: StigStore, key: str, self_id: int | None = None) -> float:
    return store.get(key)


def stig_on_receive(store: StigStore, incoming: StigEntry) -> StigStore:
    store.on_receive(incoming)
    return store


def stig_update_belief(store: StigStore, key: str, avg_bel: float, weight: float, self_id: int | None = None) -> float:
    return store.update_belief(key, avg_bel, weight)


def exchange_round(stores: list[StigStore], adjacency) -> int:
    """One synchronous broadcast round over a static graph; returns messages moved."""
    batches = [store.drain() for store in stores]
    moved = 0
    for sender, batch in enumerate(batches):
        if not batch:
            continue
        for receiver in range(len(stores)):
            if receiver == sender or not adjacency[sender][receiver]:
                continue
            for entry in batch:
                stores[receiver].on_receive(entry)
                moved += 1
    return moved


def exchange_to_fixpoint(stores: list[StigStore], adjacency, max_rounds: int = 10_000) -> int:
    """Run exchange rounds until no messages remain; returns rounds used."""
    for rounds in range(max_rounds):
        if exchange_round(stores, adjacency) == 0:
            return rounds
    raise RuntimeError("no fixpoint within max_rounds")
