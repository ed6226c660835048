"""Deterministic in-process message bus with scripted faults.

Deliveries are synchronous function calls; the bus exists to (a) record
every payload into the taint ledger, (b) enforce outage/drop scripts,
and (c) keep a delivery trace.  Determinism comes from the single
scheduler thread and seeded randomness in the roles themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from ..camera import ServerUnreachable
from .taint import TaintLedger

SIM_EPOCH = 1_763_164_800  # 2025-11-15 00:00:00 UTC


class SimClock:
    def __init__(self, start: float = SIM_EPOCH):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        self._now += seconds
        return self._now


@dataclass
class FaultScript:
    """Mutable outage state, toggled by scenario steps."""

    down_servers: Set[str] = field(default_factory=set)
    down_roles: Set[str] = field(default_factory=set)
    dropped_links: Set[Tuple[str, str]] = field(default_factory=set)

    def server_down(self, server_id: str) -> bool:
        return server_id in self.down_servers

    def blocked(self, src: str, dst: str) -> bool:
        return dst in self.down_roles or (src, dst) in self.dropped_links


@dataclass
class Delivery:
    time: float
    src: str
    dst: str
    nbytes: int


class MessageBus:
    def __init__(self, clock: SimClock, taint: TaintLedger, faults: Optional[FaultScript] = None):
        self.clock = clock
        self.taint = taint
        self.faults = faults or FaultScript()
        self.trace: List[Delivery] = []

    def deliver(self, src: str, dst: str, payload: bytes) -> None:
        """Record a delivery; raises ServerUnreachable if the link is cut."""
        if self.faults.blocked(src, dst):
            raise ServerUnreachable(f"{dst} unreachable from {src}")
        self.taint.observe(dst, payload)
        self.trace.append(Delivery(self.clock.now(), src, dst, len(payload)))
