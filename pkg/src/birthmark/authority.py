"""Manufacturer Authority: key tables, device legitimacy, server-bound approvals.

The MA can answer exactly one question about a device: "is this sensor
fingerprint in the legitimate set?"  Its persistent state is the
fingerprint set, the revocation set, the key tables (keys plus per-key
enrollment counts), and a month-precision validation log.  No device
serials, owner identities, image hashes, or per-device counters are ever
stored; the validate entry point takes a certificate and a requesting
server id and nothing else.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Set, Tuple

import numpy as np

from . import audit as audit_mod
from . import crypto, wire
from .errors import AuthenticationFailed, BirthmarkError, InvalidValue

DEFAULT_K_MIN = 1000
K_WARNING_FLOOR = 100  # privacy degrades below this anonymity set size
DEFAULT_ANOMALY_RATE = 1000  # validations per slot per hour
DEFAULT_GRACE_SECONDS = 3600
VALIDATION_LOG_RETENTION_YEARS = 3

# Rejection codes returned by validate()
REJECT_BAD_TOKEN = "BadToken"
REJECT_UNKNOWN_KEY = "UnknownKey"
REJECT_REVOKED = "Revoked"
REJECT_NOT_LEGITIMATE = "NotLegitimate"
REJECT_BAD_CREDENTIALS = "BadCredentials"
REJECT_DEVIATION_POLICY = "DeviationPolicy"
REJECT_AUDIT_FAILED = "AuditFailed"


@dataclass
class MaApproval:
    """MA half of an approval: signature bound to one server id."""

    record_hash: bytes
    server_id: str
    ma_signature: bytes


@dataclass
class MaRejection:
    code: str
    detail: str = ""


@dataclass
class KeyTable:
    table_id: int
    keys: List[bytes]
    counts: List[int] = field(default_factory=list)
    bootstrap: bool = True  # allow handing out under-filled keys while seeding

    def __post_init__(self):
        if not self.counts:
            self.counts = [0] * len(self.keys)


@dataclass
class SlotAssignment:
    table_id: int
    key_index: int
    key: bytes


@dataclass
class OtaNotice:
    """Targeted key replacement broadcast on the OTA channel."""

    table_id: int
    key_index: int
    new_key: bytes


def _month_of(unix_seconds: float) -> str:
    # purely arithmetic month bucketing keeps the log clock-library free
    days = int(unix_seconds) // 86400
    year = 1970
    while True:
        leap = year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)
        ydays = 366 if leap else 365
        if days < ydays:
            break
        days -= ydays
        year += 1
    lengths = [31, 29 if (year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)) else 28,
               31, 30, 31, 30, 31, 31, 30, 31, 30, 31]
    month = 1
    for n in lengths:
        if days < n:
            break
        days -= n
        month += 1
    return f"{year:04d}-{month:02d}"


class ManufacturerAuthority:
    """One MA per validator_id; multi-manufacturer pooling is out of scope."""

    def __init__(
        self,
        validator_id: str,
        table_sizes: Optional[List[int]] = None,
        slots_per_device: int = 2,
        k_min: int = DEFAULT_K_MIN,
        bootstrap: bool = True,
        anomaly_rate_per_hour: int = DEFAULT_ANOMALY_RATE,
        grace_seconds: int = DEFAULT_GRACE_SECONDS,
        audit_probability: float = 0.10,
        deviation_threshold: float = audit_mod.DEFAULT_THRESHOLD,
        rng: Optional[np.random.Generator] = None,
    ):
        self.validator_id = validator_id
        self.keypair = crypto.SigningKeypair.generate()
        self.k_min = k_min
        self.slots_per_device = slots_per_device
        self.anomaly_rate_per_hour = anomaly_rate_per_hour
        self.grace_seconds = grace_seconds
        self.audit_probability = audit_probability
        self.deviation_threshold = deviation_threshold
        self._rng = rng if rng is not None else np.random.default_rng()

        self.tables: Dict[int, KeyTable] = {}
        for i, size in enumerate(table_sizes or [8, 8]):
            self.tables[i] = KeyTable(
                table_id=i,
                keys=[crypto.new_token_key() for _ in range(size)],
                bootstrap=bootstrap,
            )

        self.legitimate: Set[bytes] = set()
        self.revoked: Set[bytes] = set()
        # (month, table_id, result) triples; the only persistent validation trace
        self.validation_log: List[Tuple[str, int, str]] = []
        # transient sliding-window counters for volume anomaly detection;
        # never persisted (persistent log stays month/table/result only)
        self._slot_activity: Dict[Tuple[int, int], deque] = {}
        self.compromise_flags: List[Tuple[int, int]] = []
        # rotated-out keys still honored until their grace expiry
        self._retired: Dict[Tuple[int, int], List[Tuple[bytes, float]]] = {}
        # invoked stochastically during validation; wired by the harness
        # because the MA itself never holds pixel data
        self.audit_hook: Optional[Callable[[wire.ManufacturerCertificate], Optional[bool]]] = None

    @property
    def public_key(self) -> bytes:
        return self.keypair.public_bytes

    # -- provisioning ------------------------------------------------------

    def provision_device(self, nuc_hash: bytes, device_public: bytes):
        """Register a fingerprint and hand out key-table slots.

        Returns (DeviceCert, [SlotAssignment...]).  Only the per-key
        enrollment count changes; no device identifier is retained.
        """
        if nuc_hash in self.revoked:
            raise BirthmarkError("fingerprint is revoked")
        eligible_tables = []
        for table in self.tables.values():
            if table.bootstrap:
                eligible_tables.append(table)
            elif any(c >= self.k_min for c in table.counts):
                eligible_tables.append(table)
        if not eligible_tables:
            raise BirthmarkError("no key table can satisfy the anonymity minimum")

        n_slots = min(self.slots_per_device, len(eligible_tables))
        chosen = self._rng.choice(len(eligible_tables), size=n_slots, replace=False)
        assignments = []
        for idx in sorted(int(i) for i in chosen):
            table = eligible_tables[idx]
            if table.bootstrap:
                key_index = int(self._rng.integers(0, len(table.keys)))
            else:
                candidates = [i for i, c in enumerate(table.counts) if c >= self.k_min]
                key_index = int(candidates[int(self._rng.integers(0, len(candidates)))])
            table.counts[key_index] += 1
            assignments.append(SlotAssignment(table.table_id, key_index, table.keys[key_index]))

        self.legitimate.add(nuc_hash)
        cert = wire.DeviceCert(
            device_public=device_public,
            ma_signature=crypto.sign_device_attestation(device_public, self.keypair),
        )
        return cert, assignments

    def revoke(self, nuc_hash: bytes) -> None:
        """Blocks future validations of a fingerprint; idempotent."""
        self.revoked.add(nuc_hash)

    def rotate_key(self, table_id: int, key_index: int, now: float) -> OtaNotice:
        """Replace a compromised slot key; old key honored for the grace window."""
        table = self.tables.get(table_id)
        if table is None or not 0 <= key_index < len(table.keys):
            raise BirthmarkError(f"unknown key slot ({table_id}, {key_index})")
        old = table.keys[key_index]
        new_key = crypto.new_token_key()
        table.keys[key_index] = new_key
        self._retired.setdefault((table_id, key_index), []).append(
            (old, now + self.grace_seconds)
        )
        return OtaNotice(table_id=table_id, key_index=key_index, new_key=new_key)

    # -- validation --------------------------------------------------------

    def _log(self, table_id: int, result: str, now: float) -> None:
        self.validation_log.append((_month_of(now), table_id, result))

    def _candidate_keys(self, table_id: int, key_index: int, now: float) -> List[bytes]:
        table = self.tables.get(table_id)
        if table is None or not 0 <= key_index < len(table.keys):
            return []
        keys = [table.keys[key_index]]
        for old, expiry in self._retired.get((table_id, key_index), ()):
            if now < expiry:
                keys.append(old)
        return keys

    def _note_activity(self, table_id: int, key_index: int, now: float) -> None:
        window = self._slot_activity.setdefault((table_id, key_index), deque())
        window.append(now)
        while window and window[0] <= now - 3600:
            window.popleft()
        if len(window) >= self.anomaly_rate_per_hour:
            slot = (table_id, key_index)
            if slot not in self.compromise_flags:
                self.compromise_flags.append(slot)

    def validate(
        self,
        cert: wire.ManufacturerCertificate,
        requesting_server_id: str,
        now: float,
        transport_peer_id: Optional[str] = None,
    ):
        """Decrypt the token, answer the membership query, sign an approval.

        The request is the certificate plus the requesting server id;
        there is no way to pass an image hash through this interface.
        ``transport_peer_id`` is the authenticated transport identity and
        must match the claimed server id (a server cannot request an
        approval on another server's behalf).
        """
        if transport_peer_id is not None and transport_peer_id != requesting_server_id:
            self._log(cert.key_table_id, "rejected", now)
            return MaRejection(
                REJECT_BAD_CREDENTIALS,
                f"claimed {requesting_server_id} but transport peer is {transport_peer_id}",
            )

        keys = self._candidate_keys(cert.key_table_id, cert.key_index, now)
        if not keys:
            self._log(cert.key_table_id, "rejected", now)
            return MaRejection(REJECT_UNKNOWN_KEY, "no such key slot")

        nuc_hash = None
        for key in keys:
            try:
                nuc_hash = crypto.decrypt_token(cert.encrypted_token, key)
                break
            except AuthenticationFailed:
                continue
        if nuc_hash is None:
            self._log(cert.key_table_id, "rejected", now)
            return MaRejection(REJECT_BAD_TOKEN, "token does not authenticate under slot key")

        self._note_activity(cert.key_table_id, cert.key_index, now)

        if nuc_hash in self.revoked:
            self._log(cert.key_table_id, "rejected", now)
            return MaRejection(REJECT_REVOKED, "fingerprint revoked")
        if nuc_hash not in self.legitimate:
            self._log(cert.key_table_id, "rejected", now)
            return MaRejection(REJECT_NOT_LEGITIMATE, "fingerprint not in legitimate set")

        policy = self._check_deviation_policy(cert)
        if policy is not None:
            self._log(cert.key_table_id, "rejected", now)
            return policy

        self._log(cert.key_table_id, "approved", now)
        message = wire.ma_approval_message(cert.record_hash, requesting_server_id)
        return MaApproval(
            record_hash=cert.record_hash,
            server_id=requesting_server_id,
            ma_signature=crypto.sign(message, self.keypair),
        )

    def _check_deviation_policy(self, cert: wire.ManufacturerCertificate):
        """Self-consistency of the deviation report carried in the cert.

        Full patch replay needs pixel data the MA never sees; it runs
        stochastically through the harness-wired audit hook.
        """
        if not cert.deviation_data:
            return None
        try:
            report = audit_mod.DeviationReport.decode(cert.deviation_data)
        except BirthmarkError:
            return MaRejection(REJECT_DEVIATION_POLICY, "malformed deviation report")
        if report.reported_score > self.deviation_threshold:
            return MaRejection(
                REJECT_DEVIATION_POLICY,
                f"reported score {report.reported_score:.3f} exceeds threshold",
            )
        if self.audit_hook is not None and self._rng.random() < self.audit_probability:
            outcome = self.audit_hook(cert)
            if outcome is False:
                return MaRejection(REJECT_AUDIT_FAILED, "stochastic audit failed")
        return None

    # -- state inspection ---------------------------------------------------

    def trim_log(self, now: float) -> None:
        cutoff_year = int(_month_of(now)[:4]) - VALIDATION_LOG_RETENTION_YEARS
        self.validation_log = [
            entry for entry in self.validation_log if int(entry[0][:4]) > cutoff_year
        ]

    def dump_persistent_state(self) -> dict:
        """Everything the MA role persists; used by audits and taint checks."""
        return {
            "validator_id": self.validator_id,
            "legitimate_fingerprints": sorted(h.hex() for h in self.legitimate),
            "revoked_fingerprints": sorted(h.hex() for h in self.revoked),
            "tables": {
                str(t.table_id): {"keys": len(t.keys), "counts": list(t.counts)}
                for t in self.tables.values()
            },
            "validation_log": [list(entry) for entry in self.validation_log],
        }

    def save_state(self, path) -> None:
        Path(path).write_text(json.dumps(self.dump_persistent_state(), indent=2) + "\n")

    # full state including key material, for the admin CLI's state dir;
    # this file lives inside the MA's own secure boundary
    def to_state_dict(self) -> dict:
        state = self.dump_persistent_state()
        state["signing_key"] = self.keypair.private_scalar_hex()
        state["table_keys"] = {
            str(t.table_id): [k.hex() for k in t.keys] for t in self.tables.values()
        }
        state["config"] = {
            "k_min": self.k_min,
            "slots_per_device": self.slots_per_device,
            "anomaly_rate_per_hour": self.anomaly_rate_per_hour,
            "grace_seconds": self.grace_seconds,
        }
        return state

    @classmethod
    def from_state_dict(cls, state: dict) -> "ManufacturerAuthority":
        config = state.get("config", {})
        ma = cls(validator_id=state["validator_id"], table_sizes=[], **config)
        ma.keypair = crypto.SigningKeypair.from_scalar_hex(state["signing_key"])
        for table_id_str, keys_hex in state["table_keys"].items():
            table_id = int(table_id_str)
            counts = state["tables"][table_id_str]["counts"]
            ma.tables[table_id] = KeyTable(
                table_id=table_id,
                keys=[bytes.fromhex(k) for k in keys_hex],
                counts=list(counts),
            )
        ma.legitimate = {bytes.fromhex(h) for h in state["legitimate_fingerprints"]}
        ma.revoked = {bytes.fromhex(h) for h in state["revoked_fingerprints"]}
        ma.validation_log = [tuple(entry) for entry in state["validation_log"]]
        return ma

    def save_full_state(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_state_dict(), indent=2) + "\n")

    @classmethod
    def load_full_state(cls, path) -> "ManufacturerAuthority":
        return cls.from_state_dict(json.loads(Path(path).read_text()))

    def stats(self) -> dict:
        months: Dict[str, int] = {}
        for month, _table, result in self.validation_log:
            if result == "approved":
                months[month] = months.get(month, 0) + 1
        return {
            "validator_id": self.validator_id,
            "devices": len(self.legitimate),
            "revoked": len(self.revoked),
            "tables": len(self.tables),
            "min_anonymity_set": min(
                (min(t.counts) for t in self.tables.values() if t.counts), default=0
            ),
            "approvals_by_month": dict(sorted(months.items())),
            "compromise_flags": list(self.compromise_flags),
        }

    def anonymity_warnings(self) -> list:
        """Slots whose anonymity set has degraded below the warning floor."""
        warnings = []
        for table in self.tables.values():
            for index, count in enumerate(table.counts):
                if 0 < count < K_WARNING_FLOOR:
                    warnings.append((table.table_id, index, count))
        return warnings
