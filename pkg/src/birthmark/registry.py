"""Shared submission-server registry (servers.json).

Schema: a JSON array of entries
    {"server_id": str, "region": str, "load_rank": int, "updated_at": int}
where load_rank 0 is the busiest server and ranks are recomputed from raw
submission counts every time an entry is published.  Cameras exclude the
top quartile of ranks (the busiest 25%) when selecting servers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional


@dataclass
class RegistryEntry:
    server_id: str
    region: str
    load_rank: int
    updated_at: int
    load: int = 0  # raw submission count, used to recompute ranks

    def to_json_dict(self) -> dict:
        return {
            "server_id": self.server_id,
            "region": self.region,
            "load_rank": self.load_rank,
            "updated_at": self.updated_at,
            "load": self.load,
        }


class ServerRegistry:
    """In-memory registry with optional servers.json persistence."""

    def __init__(self, entries: Optional[Iterable[RegistryEntry]] = None):
        self._entries: dict = {}
        for entry in entries or ():
            self._entries[entry.server_id] = entry
        self._rerank()

    def _rerank(self) -> None:
        ordered = sorted(self._entries.values(), key=lambda e: (-e.load, e.server_id))
        for rank, entry in enumerate(ordered):
            entry.load_rank = rank

    def publish(self, server_id: str, region: str, load: int, now: int) -> RegistryEntry:
        entry = self._entries.get(server_id)
        if entry is None:
            entry = RegistryEntry(server_id, region, 0, int(now), load)
            self._entries[server_id] = entry
        entry.region = region
        entry.load = load
        entry.updated_at = int(now)
        self._rerank()
        return entry

    def entries(self) -> List[RegistryEntry]:
        return sorted(self._entries.values(), key=lambda e: e.load_rank)

    def eligible(self) -> List[RegistryEntry]:
        """Everyone outside the busiest quartile, least busy first."""
        ordered = self.entries()
        cutoff = len(ordered) // 4
        return [e for e in ordered if e.load_rank >= cutoff][::-1]

    def __len__(self) -> int:
        return len(self._entries)

    def save(self, path) -> None:
        data = [e.to_json_dict() for e in self.entries()]
        Path(path).write_text(json.dumps(data, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ServerRegistry":
        raw = json.loads(Path(path).read_text())
        entries = [
            RegistryEntry(
                server_id=item["server_id"],
                region=item["region"],
                load_rank=item["load_rank"],
                updated_at=item["updated_at"],
                load=item.get("load", 0),
            )
            for item in raw
        ]
        return cls(entries)
