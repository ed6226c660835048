"""Submission server: verifies camera-side bindings, brokers MA approval,
co-signs, and forwards approval halves to chain validators.

The server never holds key-table material and never decrypts tokens; its
log deliberately retains (arrival time, image hash, token digest) triples
so the documented triple-compromise correlation attack works exactly when
every store is breached, and only then.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from . import audit as audit_mod
from . import crypto, wire
from .authority import MaApproval, MaRejection
from .errors import BirthmarkError, DecodeError

DEFAULT_LOG_RETENTION_DAYS = 90

REJECT_BAD_DEVICE_CERT = "BadDeviceCert"
REJECT_BAD_SIGNATURE = "BadSignature"
REJECT_BINDING_MISMATCH = "BindingMismatch"
REJECT_MA = "MA"
REJECT_MALFORMED = "Malformed"


@dataclass
class ServerRejection:
    code: str
    detail: str = ""

    def __str__(self) -> str:
        return f"Rejected({self.code}: {self.detail})" if self.detail else f"Rejected({self.code})"


@dataclass
class ForwardedApproval:
    record: wire.BirthmarkRecord
    approval: wire.Approval


@dataclass
class LogEntry:
    arrival: float
    image_hash: bytes
    token_digest: bytes


class SubmissionServer:
    """Stateless request handler plus an append-only submission log.

    ``ma_transport`` sends VALIDATE bytes to the MA addressed by
    validator_id and returns the response bytes; ``chain_transport``
    broadcasts CHAIN_SUBMIT bytes to every validator.  Both are wired by
    the harness (or by direct calls in unit tests).
    """

    def __init__(
        self,
        server_id: str,
        region: str,
        ma_public_keys: dict,
        ma_transport: Optional[Callable[[str, bytes], bytes]] = None,
        chain_transport: Optional[Callable[[bytes], None]] = None,
        log_retention_days: int = DEFAULT_LOG_RETENTION_DAYS,
    ):
        self.server_id = server_id
        self.region = region
        self.keypair = crypto.SigningKeypair.generate()
        self.ma_public_keys = dict(ma_public_keys)
        self.ma_transport = ma_transport
        self.chain_transport = chain_transport
        self.log_retention_days = log_retention_days
        self.log: List[LogEntry] = []
        self.submissions_handled = 0

    @property
    def public_key(self) -> bytes:
        return self.keypair.public_bytes

    # -- submission handling -------------------------------------------------

    def check_packet(self, packet: wire.CameraPacket) -> Optional[ServerRejection]:
        """The four camera-side binding checks, in order."""
        ma_public = self.ma_public_keys.get(packet.certificate.validator_id)
        if ma_public is None:
            return ServerRejection(REJECT_BAD_DEVICE_CERT, "unknown validator id")
        dev = packet.device_cert
        if not crypto.verify_device_attestation(dev.device_public, dev.ma_signature, ma_public):
            return ServerRejection(REJECT_BAD_DEVICE_CERT, "attestation does not verify")
        if not crypto.verify(
            packet.certificate.encode(), packet.camera_signature, dev.device_public
        ):
            return ServerRejection(REJECT_BAD_SIGNATURE, "camera signature invalid")
        if wire.record_hash(packet.record) != packet.certificate.record_hash:
            return ServerRejection(REJECT_BINDING_MISMATCH, "record does not match certificate")
        if crypto.sha256(packet.certificate.encrypted_token) != packet.certificate.token_excerpt:
            return ServerRejection(REJECT_BINDING_MISMATCH, "token excerpt mismatch")
        level_issue = self._check_level_consistency(packet)
        if level_issue is not None:
            return level_issue
        return None

    def _check_level_consistency(self, packet: wire.CameraPacket) -> Optional[ServerRejection]:
        """Record level must match what the deviation report declares.

        The MA only sees the certificate, so the record-side check has to
        happen here.
        """
        declared = packet.certificate.deviation_data
        level = packet.record.modification_level
        if not declared:
            if level != 0:
                return ServerRejection(
                    REJECT_BINDING_MISMATCH, "non-zero level without a deviation report"
                )
            return None
        try:
            report = audit_mod.DeviationReport.decode(declared)
        except BirthmarkError:
            return ServerRejection(REJECT_MALFORMED, "deviation report does not decode")
        if level == 0:
            return ServerRejection(REJECT_BINDING_MISMATCH, "level 0 with declared operations")
        if level == 1 and not report.operations:
            return ServerRejection(REJECT_BINDING_MISMATCH, "level 1 without declared operations")
        return None

    def handle_submission(self, packet_bytes: bytes, now: float = 0.0):
        """Full submission path; returns ForwardedApproval or ServerRejection."""
        try:
            r = wire._Reader(packet_bytes)
            if r.u8("message tag") != wire.MSG_SUBMIT:
                raise DecodeError("not a SUBMIT message", 0)
            n = r.u16("packet length")
            packet = wire.CameraPacket.decode(r.take(n, "camera packet"))
            r.expect_end("SUBMIT message")
        except DecodeError as exc:
            return ServerRejection(REJECT_MALFORMED, str(exc))

        rejection = self.check_packet(packet)
        if rejection is not None:
            return rejection

        self.submissions_handled += 1
        self.log.append(
            LogEntry(
                arrival=now,
                image_hash=packet.record.image_hash,
                token_digest=crypto.sha256(packet.certificate.encrypted_token),
            )
        )

        outcome = self._request_ma_approval(packet.certificate)
        if isinstance(outcome, MaRejection):
            return ServerRejection(REJECT_MA, f"{outcome.code}: {outcome.detail}")

        approval = wire.Approval(
            server_id=self.server_id,
            record_hash=outcome.record_hash,
            ma_signature=outcome.ma_signature,
            server_signature=crypto.sign(outcome.record_hash, self.keypair),
        )
        forwarded = ForwardedApproval(record=packet.record, approval=approval)
        if self.chain_transport is not None:
            self.chain_transport(wire.encode_chain_submit(packet.record, approval))
        return forwarded

    def _request_ma_approval(self, cert: wire.ManufacturerCertificate):
        request = wire.encode_validate(cert, self.server_id)
        response = self.ma_transport(cert.validator_id, request)
        tag = response[0] if response else 0
        if tag == wire.MSG_APPROVAL:
            rhash, server_id, sig = wire.decode_ma_approval(response)
            return MaApproval(record_hash=rhash, server_id=server_id, ma_signature=sig)
        if tag == wire.MSG_REJECTION:
            code, detail = wire.decode_ma_rejection(response)
            return MaRejection(code, detail)
        return MaRejection("Malformed", "unrecognized MA response")

    # -- registry ------------------------------------------------------------

    def publish_load(self, registry, now: float):
        """Append this server's registry entry for the current interval."""
        return registry.publish(self.server_id, self.region, self.submissions_handled, now)

    # -- log hygiene -----------------------------------------------------------

    def trim_log(self, now: float) -> None:
        cutoff = now - self.log_retention_days * 86400
        self.log = [entry for entry in self.log if entry.arrival >= cutoff]

    def dump_state(self) -> dict:
        """Everything a compromised server would yield (no key-table keys)."""
        return {
            "server_id": self.server_id,
            "region": self.region,
            "log": [
                {
                    "arrival": entry.arrival,
                    "image_hash": entry.image_hash.hex(),
                    "token_digest": entry.token_digest.hex(),
                }
                for entry in self.log
            ],
        }
