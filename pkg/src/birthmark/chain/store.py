"""Append-only, hash-chained record store with an image-hash index.

The log is a byte stream of 40-byte envelopes + payloads (153 bytes per
full record); the index maps image hashes to byte offsets.  Hot nodes may
prune payloads older than a horizon but keep index stubs pointing at the
cold tier; cold nodes never prune.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, Optional, Tuple

from .. import wire

RECORD_BYTES_FULL = 153  # parent + metadata + 20-byte ids + envelope
PRUNED = "pruned"  # lookup sentinel: see a cold node

# index sidecar entry: image_hash(32) || offset u64 LE
_INDEX_ENTRY = struct.Struct("<32sQ")


@dataclass
class StoreStats:
    records: int
    log_bytes: int
    pruned: int

    def to_json_dict(self) -> dict:
        return {"records": self.records, "log_bytes": self.log_bytes, "pruned": self.pruned}


def projected_growth(records_per_day: float, record_bytes: int = RECORD_BYTES_FULL) -> dict:
    """Storage arithmetic for capacity planning."""
    per_year = records_per_day * 365 * record_bytes
    return {
        "records_per_day": records_per_day,
        "record_bytes": record_bytes,
        "bytes_per_day": records_per_day * record_bytes,
        "bytes_per_year": per_year,
        "gb_per_year": per_year / 1e9,
    }


class RecordStore:
    """Single-writer append-only store; reads are lock-free."""

    def __init__(self, log_path: Optional[Path] = None):
        self.log_path = Path(log_path) if log_path else None
        self._log = bytearray()
        self._index: Dict[bytes, int] = {}  # image_hash -> byte offset
        self._pruned: set = set()
        self._count = 0
        self._link = wire.GENESIS_LINK
        if self.log_path and self.log_path.exists():
            self._replay(self.log_path.read_bytes())

    def _replay(self, data: bytes) -> None:
        self._log = bytearray(data)
        for record, index, link, offset in wire.iter_log(data):
            self._index[record.image_hash] = offset
            self._count = index + 1
            payload = record.encode()
            self._link = wire.chain_link(link, payload)

    # -- writes -----------------------------------------------------------

    def append(self, chain_record: wire.ChainRecord) -> int:
        """Append one finalized record; returns its chain index."""
        payload = chain_record.encode()
        blob = wire.encode_enveloped(chain_record, self._count, self._link)
        offset = len(self._log)
        self._log.extend(blob)
        self._index[chain_record.image_hash] = offset
        self._link = wire.chain_link(self._link, payload)
        self._count += 1
        if self.log_path:
            with open(self.log_path, "ab") as fh:
                fh.write(blob)
        return self._count - 1

    def bulk_load(self, chain_records) -> None:
        """Synthetic-fixture loader used by benchmarks."""
        for record in chain_records:
            self.append(record)

    def prune_before(self, epoch_horizon: int) -> int:
        """Hot-node pruning: drop payload access for old records, keep stubs."""
        pruned = 0
        for record, _index, _link, offset in wire.iter_log(bytes(self._log)):
            if record.posting_timestamp < epoch_horizon and record.image_hash not in self._pruned:
                self._pruned.add(record.image_hash)
                pruned += 1
        return pruned

    # -- reads -------------------------------------------------------------

    def contains(self, image_hash: bytes) -> bool:
        return image_hash in self._index

    def get(self, image_hash: bytes):
        """ChainRecord, PRUNED sentinel, or None."""
        offset = self._index.get(image_hash)
        if offset is None:
            return None
        if image_hash in self._pruned:
            return PRUNED
        # bounded slice: never copy the whole log for a point lookup
        header = bytes(self._log[offset : offset + wire.ENVELOPE_LEN])
        (payload_len,) = struct.unpack_from("<H", header, 6)
        blob = bytes(self._log[offset : offset + wire.ENVELOPE_LEN + payload_len])
        record, _index, _link, _next = wire.decode_enveloped(blob, 0)
        return record

    def records(self) -> Iterator[wire.ChainRecord]:
        for record, _index, _link, _offset in wire.iter_log(bytes(self._log)):
            yield record

    def log_bytes(self) -> bytes:
        return bytes(self._log)

    def __len__(self) -> int:
        return self._count

    def stats(self) -> StoreStats:
        return StoreStats(records=self._count, log_bytes=len(self._log), pruned=len(self._pruned))

    # -- integrity -----------------------------------------------------------

    def verify_log(self) -> bool:
        """Replay the hash chain; any mutation of a finalized record breaks it."""
        link = wire.GENESIS_LINK
        expected_index = 0
        try:
            for record, index, stored_link, _offset in wire.iter_log(bytes(self._log)):
                if index != expected_index or stored_link != link:
                    return False
                link = wire.chain_link(link, record.encode())
                expected_index += 1
        except Exception:
            return False
        return link == self._link

    # -- index sidecar ---------------------------------------------------------

    def save_index(self, path) -> None:
        with open(path, "wb") as fh:
            for image_hash, offset in self._index.items():
                fh.write(_INDEX_ENTRY.pack(image_hash, offset))

    @staticmethod
    def load_index(path) -> Dict[bytes, int]:
        data = Path(path).read_bytes()
        out: Dict[bytes, int] = {}
        for i in range(0, len(data), _INDEX_ENTRY.size):
            image_hash, offset = _INDEX_ENTRY.unpack_from(data, i)
            out[image_hash] = offset
        return out
