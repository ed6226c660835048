"""Validator node: dual-approval admission, lookups, custody chains.

Admission enforces the chain-side pairing rule: a record finalizes only
with two MA-signed, server-bound approvals from distinct submission
servers, both verifying against the recomputed record hash.  Validation
data is discarded after finalization unless the debug flag keeps it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

from .. import crypto, wire
from ..errors import BrokenChain, CorruptChain
from .store import PRUNED, RecordStore

PAIRING_TIMEOUT = 600.0  # unpaired approvals expire after 10 minutes
DEFAULT_PRUNE_HORIZON_DAYS = 180


class Admit(enum.Enum):
    PENDING = "Pending"
    FINALIZABLE = "Finalizable"
    REJECTED_SAME_SERVER = "SameServer"
    REJECTED_BAD_MA_SIG = "BadMASig"
    REJECTED_BAD_SERVER_SIG = "BadServerSig"
    REJECTED_DUPLICATE = "Duplicate"
    REJECTED_UNKNOWN_SERVER = "UnknownServer"


class Lookup(enum.Enum):
    FOUND = "found"
    NOT_FOUND = "not_found"
    PRUNED_SEE_COLD = "pruned"


@dataclass
class AdmitResult:
    status: Admit
    candidate: Optional["Candidate"] = None


@dataclass(frozen=True)
class Candidate:
    """A fully paired record awaiting quorum finalization."""

    chain_record: wire.ChainRecord
    approvals: Tuple[wire.Approval, wire.Approval]

    @property
    def key(self) -> bytes:
        return crypto.sha256(self.chain_record.encode())


@lru_cache(maxsize=65536)
def _verify_cached(message: bytes, signature: bytes, public: bytes) -> bool:
    # pure-function memo: many validators re-check identical signatures
    return crypto.verify(message, signature, public)


@dataclass
class PendingEntry:
    record: wire.BirthmarkRecord
    approval: wire.Approval
    arrival: float


class ValidatorNode:
    def __init__(
        self,
        node_id: str,
        ma_public_keys: dict,
        server_public_keys: dict,
        role: str = "cold",
        honest: bool = True,
        log_path=None,
        keep_validation_data: bool = False,
        pairing_timeout: float = PAIRING_TIMEOUT,
    ):
        self.node_id = node_id
        self.keypair = crypto.SigningKeypair.generate()
        self.ma_public_keys = dict(ma_public_keys)
        self.server_public_keys = dict(server_public_keys)
        self.role = role
        self.honest = honest
        self.store = RecordStore(log_path)
        self.pending: Dict[bytes, PendingEntry] = {}
        self.finalizable: List[Candidate] = []
        self.keep_validation_data = keep_validation_data
        self.kept_bundles: List[bytes] = []
        self.pairing_timeout = pairing_timeout

    # -- admission -----------------------------------------------------------

    def _expire_pending(self, now: float) -> None:
        expired = [
            rhash
            for rhash, entry in self.pending.items()
            if now - entry.arrival > self.pairing_timeout
        ]
        for rhash in expired:
            del self.pending[rhash]

    def check_approval(self, record: wire.BirthmarkRecord, approval: wire.Approval) -> Admit:
        """Signature checks shared by admission and candidate validation."""
        rhash = wire.record_hash(record)
        ma_ok = False
        for ma_public in self.ma_public_keys.values():
            if _verify_cached(
                wire.ma_approval_message(rhash, approval.server_id),
                approval.ma_signature,
                ma_public,
            ):
                ma_ok = True
                break
        if not ma_ok:
            return Admit.REJECTED_BAD_MA_SIG
        server_public = self.server_public_keys.get(approval.server_id)
        if server_public is None:
            return Admit.REJECTED_UNKNOWN_SERVER
        if not _verify_cached(rhash, approval.server_signature, server_public):
            return Admit.REJECTED_BAD_SERVER_SIG
        return Admit.FINALIZABLE

    def admit(self, record: wire.BirthmarkRecord, approval: wire.Approval, now: float) -> AdmitResult:
        """One approval half arrives; pair it or hold it."""
        self._expire_pending(now)

        if self.store.contains(record.image_hash):
            return AdmitResult(Admit.REJECTED_DUPLICATE)

        sig_status = self.check_approval(record, approval)
        if sig_status != Admit.FINALIZABLE:
            return AdmitResult(sig_status)

        rhash = wire.record_hash(record)
        partner = self.pending.get(rhash)
        if partner is None:
            self.pending[rhash] = PendingEntry(record=record, approval=approval, arrival=now)
            return AdmitResult(Admit.PENDING)

        if partner.approval.server_id == approval.server_id:
            return AdmitResult(Admit.REJECTED_SAME_SERVER)

        del self.pending[rhash]
        chain_record = wire.ChainRecord(
            record=record,
            posting_server_ids=f"{partner.approval.server_id}/{approval.server_id}",
            posting_timestamp=wire.posting_epoch(now),
        )
        candidate = Candidate(chain_record=chain_record, approvals=(partner.approval, approval))
        if self.keep_validation_data:
            self.kept_bundles.append(wire.encode_validation_bundle(list(candidate.approvals)))
        self.finalizable.append(candidate)
        return AdmitResult(Admit.FINALIZABLE, candidate)

    def handle_chain_submit(self, message: bytes, now: float) -> AdmitResult:
        record, approval = wire.decode_chain_submit(message)
        return self.admit(record, approval, now)

    # -- candidate validation during consensus ---------------------------------

    def candidate_valid(self, candidate: Candidate) -> bool:
        """Re-run admission checks against local state for a proposed candidate."""
        record = candidate.chain_record.record
        if self.store.contains(record.image_hash):
            return False
        a, b = candidate.approvals
        if a.server_id == b.server_id:
            return False
        ids = candidate.chain_record.posting_server_ids
        if ids != f"{a.server_id}/{b.server_id}":
            return False
        for approval in candidate.approvals:
            rhash = wire.record_hash(record)
            if approval.record_hash != rhash:
                return False
            if self.check_approval(record, approval) != Admit.FINALIZABLE:
                return False
        return True

    def take_finalizable(self) -> List[Candidate]:
        out, self.finalizable = self.finalizable, []
        return out

    def finalize(self, candidates: List[Candidate]) -> None:
        """Append quorum-approved candidates in canonical order."""
        for candidate in sorted(candidates, key=lambda c: c.key):
            if not self.store.contains(candidate.chain_record.image_hash):
                self.store.append(candidate.chain_record)

    # -- queries ----------------------------------------------------------------

    def lookup(self, image_hash: bytes) -> Tuple[Lookup, Optional[wire.ChainRecord]]:
        result = self.store.get(image_hash)
        if result is None:
            return Lookup.NOT_FOUND, None
        if result == PRUNED:
            return Lookup.PRUNED_SEE_COLD, None
        return Lookup.FOUND, result

    def custody_chain(self, image_hash: bytes) -> List[wire.ChainRecord]:
        """Follow parent links to the root; returns root..leaf order."""
        chain: List[wire.ChainRecord] = []
        seen = set()
        cursor = image_hash
        while True:
            if cursor in seen:
                raise CorruptChain("parent links form a cycle")
            seen.add(cursor)
            result = self.store.get(cursor)
            if result is None or result == PRUNED:
                raise BrokenChain(cursor)
            chain.append(result)
            parent = result.record.parent_image_hash
            if parent is None:
                break
            cursor = parent
        chain.reverse()
        return chain

    def prune(self, now: float, horizon_days: int = DEFAULT_PRUNE_HORIZON_DAYS) -> int:
        """Hot nodes drop old payloads but keep lookup stubs."""
        if self.role != "hot":
            return 0
        horizon_epoch = wire.posting_epoch(now - horizon_days * 86400)
        return self.store.prune_before(horizon_epoch)
