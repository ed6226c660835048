"""Emulated camera agent.

Holds a simulated sensor identity (a manufacturing NUC map or a
PRNU-seeded keypair), builds signed authentication packets, rotates its
submission-server selection daily, submits every capture to two servers,
and queues packets across outages so photography is never blocked.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from . import audit as audit_mod
from . import crypto, wire
from .authority import OtaNotice, SlotAssignment
from .errors import InsufficientFrames, InvalidInput, NotProvisioned
from .registry import ServerRegistry

PRNU_FRAME_COUNT = 20
PRNU_BLUR_SIGMA = 1.5
PRNU_FINGERPRINT_CONTEXT = b"BM-v1-prnu-fingerprint:"

SELECTION_REFRESH_SECONDS = 86400
SELECTION_SIZE = 3

RETRY_BASE_SECONDS = 2.0
RETRY_FACTOR = 2.0
RETRY_CAP_SECONDS = 600.0
RETRY_JITTER = 0.2


# ---------------------------------------------------------------------------
# Sensor identities
# ---------------------------------------------------------------------------

@dataclass
class SensorIdentity:
    kind: str  # "ManufacturingCalibrated" | "PrnuSeeded"
    nuc_hash: bytes
    keypair: crypto.SigningKeypair
    device_cert: Optional[wire.DeviceCert] = None
    nuc_map: Optional[np.ndarray] = None  # calibrated kind only


def make_calibrated_sensor(seed: int, shape: Tuple[int, int] = (64, 64)) -> SensorIdentity:
    """Synthetic factory-calibrated sensor: a seeded f32 gain matrix."""
    rng = np.random.default_rng(seed)
    nuc_map = (1.0 + rng.normal(0.0, 0.02, size=shape)).astype(np.float32)
    nuc_hash = crypto.sha256(nuc_map.tobytes())
    return SensorIdentity(
        kind="ManufacturingCalibrated",
        nuc_hash=nuc_hash,
        keypair=crypto.SigningKeypair.generate(),
        nuc_map=nuc_map,
    )


def prnu_fingerprint(public_key: bytes) -> bytes:
    """Stable fingerprint for PRNU-enrolled devices (the pattern is gone)."""
    return crypto.sha256(PRNU_FINGERPRINT_CONTEXT + public_key)


def enroll_prnu(frames: List[wire.PixelImage], entropy: Optional[bytes] = None) -> SensorIdentity:
    """Derive a device keypair from sensor noise, then discard the noise.

    Takes exactly 20 same-sized frames, estimates the PRNU pattern as the
    mean blur residual, seeds the keypair from SHA-256(pattern || entropy),
    and zeroizes the pattern before returning.  Re-enrollment with fresh
    entropy yields a different keypair (the device reappears as a new
    camera).  Pass fixed ``entropy`` only in tests.
    """
    if len(frames) < PRNU_FRAME_COUNT:
        raise InsufficientFrames(f"need {PRNU_FRAME_COUNT} frames, got {len(frames)}")
    frames = frames[:PRNU_FRAME_COUNT]
    dims = {(f.width, f.height) for f in frames}
    if len(dims) != 1:
        raise InvalidInput("enrollment frames must share dimensions")

    residual = np.zeros((frames[0].height, frames[0].width, 3), dtype=np.float64)
    for frame in frames:
        arr = frame.to_array().astype(np.float64)
        smoothed = ndimage.gaussian_filter(arr, sigma=(PRNU_BLUR_SIGMA, PRNU_BLUR_SIGMA, 0))
        residual += arr - smoothed
    residual /= len(frames)

    pattern = residual.astype(np.float32)
    if entropy is None:
        entropy = crypto.generate_nonce() + crypto.generate_nonce()
    seed = crypto.sha256(pattern.tobytes() + entropy)
    keypair = crypto.SigningKeypair.from_seed(seed)

    # zeroize: no PRNU bytes survive enrollment
    pattern.fill(0.0)
    residual.fill(0.0)
    del pattern, residual

    return SensorIdentity(
        kind="PrnuSeeded",
        nuc_hash=prnu_fingerprint(keypair.public_bytes),
        keypair=keypair,
    )


# ---------------------------------------------------------------------------
# Capture options and submission queue
# ---------------------------------------------------------------------------

@dataclass
class CaptureOptions:
    metadata: bool = False
    timestamp: str = "2025-11"
    geolocation: str = "0.00000,0.00000"
    owner: str = "anonymous"
    declared_ops: tuple = ()
    reported_score: float = 0.0
    content_modified: bool = False
    parent_image_hash: Optional[bytes] = None


@dataclass
class QueueEntry:
    packet: wire.CameraPacket
    image_hash: bytes
    delivered_to: List[str] = field(default_factory=list)
    attempts: int = 0
    next_retry: float = 0.0


@dataclass
class DualReceipt:
    image_hash: bytes
    server_ids: Tuple[str, str]


class SubmissionQueue:
    """FIFO retry queue persisted as JSON lines; survives agent restarts."""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self.entries: List[QueueEntry] = []
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        for line in self.path.read_text().splitlines():
            if not line.strip():
                continue
            item = json.loads(line)
            self.entries.append(
                QueueEntry(
                    packet=wire.CameraPacket.decode(bytes.fromhex(item["packet"])),
                    image_hash=bytes.fromhex(item["image_hash"]),
                    delivered_to=item["delivered_to"],
                    attempts=item["attempts"],
                    next_retry=item["next_retry"],
                )
            )

    def _persist(self) -> None:
        if self.path is None:
            return
        lines = [
            json.dumps(
                {
                    "packet": entry.packet.encode().hex(),
                    "image_hash": entry.image_hash.hex(),
                    "delivered_to": entry.delivered_to,
                    "attempts": entry.attempts,
                    "next_retry": entry.next_retry,
                }
            )
            for entry in self.entries
        ]
        self.path.write_text("\n".join(lines) + ("\n" if lines else ""))

    def push(self, entry: QueueEntry) -> None:
        self.entries.append(entry)
        self._persist()

    def due(self, now: float) -> List[QueueEntry]:
        return [e for e in self.entries if e.next_retry <= now]

    def remove(self, entry: QueueEntry) -> None:
        self.entries.remove(entry)
        self._persist()

    def update(self) -> None:
        self._persist()

    def __len__(self) -> int:
        return len(self.entries)


def backoff_delay(attempts: int, rng: np.random.Generator) -> float:
    """Exponential backoff: base 2 s, factor 2, cap 10 min, jitter +/-20%."""
    delay = min(RETRY_BASE_SECONDS * (RETRY_FACTOR ** attempts), RETRY_CAP_SECONDS)
    jitter = 1.0 + RETRY_JITTER * (2.0 * rng.random() - 1.0)
    return delay * jitter


class ServerUnreachable(Exception):
    """Raised by transports when a submission target is down."""


# ---------------------------------------------------------------------------
# The agent
# ---------------------------------------------------------------------------

class CameraAgent:
    """One logical camera: identity, slot assignments, selection, queue.

    ``transport`` is a callable (server_id, message_bytes) -> response
    bytes; it raises ServerUnreachable on outage.  The capture path never
    raises on submission failure (packets queue instead).
    """

    def __init__(
        self,
        identity: SensorIdentity,
        assignments: List[SlotAssignment],
        validator_id: str,
        transport: Optional[Callable[[str, bytes], bytes]] = None,
        queue_path: Optional[Path] = None,
        seed: int = 0,
        metadata_enabled: bool = False,
    ):
        self.identity = identity
        self.assignments = list(assignments)
        self.validator_id = validator_id
        self.transport = transport
        self.queue = SubmissionQueue(queue_path)
        self.metadata_enabled = metadata_enabled
        self._rng = np.random.default_rng(seed)
        self._selection: List[str] = []
        self._selection_at: float = float("-inf")
        self._round_robin = 0
        self.capture_count = 0

    # -- provisioning ------------------------------------------------------

    def set_device_cert(self, cert: wire.DeviceCert) -> None:
        self.identity.device_cert = cert

    def apply_ota(self, notice: OtaNotice) -> bool:
        """Install a rotated key if this agent holds the affected slot."""
        applied = False
        for slot in self.assignments:
            if (slot.table_id, slot.key_index) == (notice.table_id, notice.key_index):
                slot.key = notice.new_key
                applied = True
        return applied

    # -- packet construction -------------------------------------------------

    def capture_and_build(
        self, image: wire.PixelImage, options: Optional[CaptureOptions] = None
    ) -> Tuple[wire.CameraPacket, Optional[bytes]]:
        """Build a signed packet for one capture; returns (packet, nonce).

        The nonce is present only when metadata recording is on and
        belongs in the image sidecar, never on the wire.
        """
        options = options or CaptureOptions(metadata=self.metadata_enabled)
        if not self.assignments:
            raise NotProvisioned("no key-table slots assigned")
        if self.identity.device_cert is None:
            raise NotProvisioned("device attestation missing")

        image_hash = image.image_hash()
        level = audit_mod.level_for_ops(options.declared_ops, options.content_modified)

        nonce = None
        ts_hash = geo_hash = owner_hash = None
        if options.metadata:
            nonce = crypto.generate_nonce()
            ts_hash = crypto.metadata_hash("timestamp", options.timestamp, nonce)
            geo_hash = crypto.metadata_hash("geolocation", options.geolocation, nonce)
            owner_hash = crypto.metadata_hash("owner", options.owner, nonce)

        record = wire.BirthmarkRecord(
            image_hash=image_hash,
            modification_level=level,
            parent_image_hash=options.parent_image_hash,
            timestamp_hash=ts_hash,
            geotag_hash=geo_hash,
            owner_id_hash=owner_hash,
        )

        # uniform choice among assigned slots per submission
        slot = self.assignments[int(self._rng.integers(0, len(self.assignments)))]
        token = crypto.encrypt_token(self.identity.nuc_hash, slot.key)

        deviation = b""
        if options.declared_ops or options.content_modified:
            deviation = audit_mod.DeviationReport(
                operations=tuple(options.declared_ops),
                reported_score=options.reported_score,
            ).encode()

        cert = wire.ManufacturerCertificate(
            validator_id=self.validator_id,
            encrypted_token=token,
            key_table_id=slot.table_id,
            key_index=slot.key_index,
            token_excerpt=crypto.sha256(token),
            deviation_data=deviation,
            record_hash=wire.record_hash(record),
        )
        packet = wire.CameraPacket(
            record=record,
            certificate=cert,
            camera_signature=crypto.sign(cert.encode(), self.identity.keypair),
            device_cert=self.identity.device_cert,
        )
        self.capture_count += 1
        return packet, nonce

    # -- server selection ----------------------------------------------------

    def select_servers(self, registry: ServerRegistry, now: float) -> List[str]:
        """Three servers outside the busiest quartile, regions distinct
        when possible; refreshed every 24 hours."""
        if self._selection and now - self._selection_at < SELECTION_REFRESH_SECONDS:
            return self._selection

        eligible = registry.eligible()
        if len(eligible) < 2:
            # degraded selection: proceed with whatever exists, never block
            self._selection = [e.server_id for e in eligible]
            self._selection_at = now
            return self._selection

        pool = list(eligible)
        order = self._rng.permutation(len(pool))
        pool = [pool[int(i)] for i in order]

        chosen = []
        used_regions: set = set()
        # region diversity first; relax regions (never the load filter)
        for entry in pool:
            if len(chosen) == SELECTION_SIZE:
                break
            if entry.region not in used_regions:
                chosen.append(entry)
                used_regions.add(entry.region)
        for entry in pool:
            if len(chosen) == SELECTION_SIZE:
                break
            if entry not in chosen:
                chosen.append(entry)

        self._selection = [e.server_id for e in chosen]
        self._selection_at = now
        self._round_robin = 0
        return self._selection

    # -- submission ----------------------------------------------------------

    def _next_targets(self) -> List[str]:
        n = len(self._selection)
        start = self._round_robin
        self._round_robin = (self._round_robin + 1) % max(n, 1)
        return [self._selection[(start + i) % n] for i in range(n)]

    def _try_deliver(self, packet: wire.CameraPacket, server_id: str) -> bool:
        try:
            self.transport(server_id, wire.encode_submit(packet))
            return True
        except ServerUnreachable:
            return False

    def submit(self, packet: wire.CameraPacket, now: float = 0.0):
        """Deliver to two distinct servers; queue whatever cannot be sent.

        Returns a DualReceipt on full delivery, otherwise the QueueEntry
        that will be drained later.  Never raises into the capture path.
        """
        if not self._selection:
            raise NotProvisioned("no server selection; call select_servers first")
        entry = QueueEntry(packet=packet, image_hash=packet.record.image_hash)
        targets = self._next_targets()
        for server_id in targets:
            if len(entry.delivered_to) == 2:
                break
            if self._try_deliver(packet, server_id):
                entry.delivered_to.append(server_id)
        if len(entry.delivered_to) == 2:
            return DualReceipt(entry.image_hash, tuple(entry.delivered_to))
        entry.attempts = 1
        entry.next_retry = now + backoff_delay(0, self._rng)
        self.queue.push(entry)
        return entry

    def drain_queue(self, now: float) -> List[DualReceipt]:
        """Retry queued packets that are due; called when connectivity returns."""
        receipts = []
        for entry in self.queue.due(now):
            remaining = [s for s in self._selection if s not in entry.delivered_to]
            for server_id in remaining:
                if len(entry.delivered_to) == 2:
                    break
                if self._try_deliver(entry.packet, server_id):
                    entry.delivered_to.append(server_id)
            if len(entry.delivered_to) == 2:
                receipts.append(DualReceipt(entry.image_hash, tuple(entry.delivered_to)))
                self.queue.remove(entry)
            else:
                entry.attempts += 1
                entry.next_retry = now + backoff_delay(entry.attempts - 1, self._rng)
                self.queue.update()
        return receipts


# ---------------------------------------------------------------------------
# Identity persistence (the agent's secure-boundary store)
# ---------------------------------------------------------------------------

def save_identity(identity: SensorIdentity, assignments: List[SlotAssignment], path) -> None:
    """Write the identity store. This file models the secure element: the
    private scalar exists only here, inside the agent's own boundary."""
    data = {
        "kind": identity.kind,
        "nuc_hash": identity.nuc_hash.hex(),
        "private_scalar": identity.keypair.private_scalar_hex(),
        "device_cert": identity.device_cert.encode().hex() if identity.device_cert else None,
        "nuc_map": identity.nuc_map.tobytes().hex() if identity.nuc_map is not None else None,
        "nuc_map_shape": list(identity.nuc_map.shape) if identity.nuc_map is not None else None,
        "slots": [
            {"table_id": s.table_id, "key_index": s.key_index, "key": s.key.hex()}
            for s in assignments
        ],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_identity(path) -> Tuple[SensorIdentity, List[SlotAssignment]]:
    data = json.loads(Path(path).read_text())
    nuc_map = None
    if data.get("nuc_map"):
        shape = tuple(data["nuc_map_shape"])
        nuc_map = np.frombuffer(bytes.fromhex(data["nuc_map"]), dtype=np.float32).reshape(shape)
    identity = SensorIdentity(
        kind=data["kind"],
        nuc_hash=bytes.fromhex(data["nuc_hash"]),
        keypair=crypto.SigningKeypair.from_scalar_hex(data["private_scalar"]),
        device_cert=wire.DeviceCert.decode(bytes.fromhex(data["device_cert"]))
        if data.get("device_cert")
        else None,
        nuc_map=nuc_map,
    )
    assignments = [
        SlotAssignment(s["table_id"], s["key_index"], bytes.fromhex(s["key"]))
        for s in data["slots"]
    ]
    return identity, assignments
