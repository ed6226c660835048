"""Simulation world: wires cameras, servers, the MA, and validators
over the recording bus, and drives the end-to-end submission pipeline.

The ground-truth store (device serial <-> fingerprint <-> captures)
mirrors factory production records: it exists only inside the harness
and is never visible to any role.  Compromise taps collect what a fully
compromised role process would have observed live; they are distinct
from the roles' own persistent state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import crypto, wire
from ..authority import ManufacturerAuthority
from ..camera import (
    CameraAgent,
    CaptureOptions,
    ServerUnreachable,
    enroll_prnu,
    make_calibrated_sensor,
)
from ..chain import FaultPlan, RoundOutcome, ValidatorNode, run_pipeline_round
from ..errors import BirthmarkError
from ..registry import ServerRegistry
from ..server import ForwardedApproval, ServerRejection, SubmissionServer
from .bus import FaultScript, MessageBus, SimClock
from .taint import ATOM_DEVICE_SERIAL, ATOM_IMAGE_HASH, ATOM_NUC_HASH, TaintLedger

DEFAULT_REGIONS = ("eu", "us", "ap", "sa")

# suite-wide taint auditing: while a tracker list is installed, every world
# built registers itself so information-flow checks can span all scenarios
_WORLD_TRACKERS: List[list] = []


class track_worlds:
    """Context manager collecting every World constructed inside it."""

    def __init__(self):
        self.worlds: List["World"] = []

    def __enter__(self) -> "track_worlds":
        _WORLD_TRACKERS.append(self.worlds)
        return self

    def __exit__(self, *exc) -> None:
        _WORLD_TRACKERS.remove(self.worlds)


@dataclass
class Topology:
    seed: int = 0
    cameras: int = 2
    servers: int = 4
    validators: int = 4
    malicious_validators: int = 0
    regions: Tuple[str, ...] = DEFAULT_REGIONS
    table_sizes: Tuple[int, ...] = (8,)
    slots_per_device: int = 2
    validator_id: str = "CANON_001"
    metadata: bool = False
    prnu_cameras: int = 0
    posting_interval: int = wire.POSTING_INTERVAL

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "cameras": self.cameras,
            "servers": self.servers,
            "validators": self.validators,
            "malicious_validators": self.malicious_validators,
            "regions": list(self.regions),
            "table_sizes": list(self.table_sizes),
            "slots_per_device": self.slots_per_device,
            "validator_id": self.validator_id,
            "metadata": self.metadata,
            "prnu_cameras": self.prnu_cameras,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Topology":
        kwargs = dict(data)
        for key in ("regions", "table_sizes"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class ProductionRecord:
    serial: str
    nuc_hash: bytes
    public_key: bytes


@dataclass
class GroundTruth:
    """Factory-side knowledge; no role ever receives any of it."""

    production: Dict[str, ProductionRecord] = field(default_factory=dict)
    captures: List[Tuple[str, bytes]] = field(default_factory=list)  # (serial, image_hash)
    assignments: Dict[str, List[Tuple[int, int]]] = field(default_factory=dict)

    def serial_for_nuc(self, nuc_hash: bytes) -> Optional[str]:
        for record in self.production.values():
            if record.nuc_hash == nuc_hash:
                return record.serial
        return None

    def devices_sharing_slot(self, table_id: int, key_index: int) -> List[str]:
        return [
            serial
            for serial, slots in self.assignments.items()
            if (table_id, key_index) in slots
        ]


@dataclass
class CaptureOutcome:
    serial: str
    image_hash: bytes
    packet: wire.CameraPacket
    nonce: Optional[bytes]
    receipt: object  # DualReceipt or QueueEntry
    rejections: List[ServerRejection] = field(default_factory=list)


class World:
    def __init__(self, topology: Topology):
        self.topology = topology
        seeds = np.random.SeedSequence(topology.seed)
        (ma_seed, cam_seed, misc_seed) = seeds.spawn(3)
        self._cam_rng = np.random.default_rng(cam_seed)
        self._misc_rng = np.random.default_rng(misc_seed)

        self.clock = SimClock()
        self.taint = TaintLedger()
        self.faults = FaultScript()
        self.bus = MessageBus(self.clock, self.taint, self.faults)
        self.ground_truth = GroundTruth()
        self.round_times: List[float] = []
        self._last_rejections: List[ServerRejection] = []

        # compromise taps: what a breached role process would have captured
        self.ma_view: List[Tuple[bytes, bytes]] = []  # (token_digest, nuc_hash)
        self.server_view: List[dict] = []  # image/token/key-ref per submission

        self.ma = ManufacturerAuthority(
            validator_id=topology.validator_id,
            table_sizes=list(topology.table_sizes),
            slots_per_device=topology.slots_per_device,
            rng=np.random.default_rng(ma_seed),
        )

        self.servers: Dict[str, SubmissionServer] = {}
        for i in range(topology.servers):
            region = topology.regions[i % len(topology.regions)]
            server_id = f"node-{region}-{i}"
            server = SubmissionServer(
                server_id=server_id,
                region=region,
                ma_public_keys={self.ma.validator_id: self.ma.public_key},
                ma_transport=self._make_ma_transport(server_id),
            )
            server.chain_transport = self._make_chain_transport(server_id)
            self.servers[server_id] = server

        server_keys = {sid: s.public_key for sid, s in self.servers.items()}
        self.validators: List[ValidatorNode] = []
        for i in range(topology.validators):
            honest = i < topology.validators - topology.malicious_validators
            self.validators.append(
                ValidatorNode(
                    node_id=f"v{i}",
                    ma_public_keys={self.ma.validator_id: self.ma.public_key},
                    server_public_keys=server_keys,
                    role="cold" if i % 2 == 0 else "hot",
                    honest=honest,
                )
            )

        self.registry = ServerRegistry()
        for server in self.servers.values():
            server.publish_load(self.registry, self.clock.now())

        self.cameras: List[CameraAgent] = []
        self.camera_serials: List[str] = []
        for i in range(topology.cameras):
            self._enroll_camera(i, prnu=i < topology.prnu_cameras)

        for tracker in _WORLD_TRACKERS:
            tracker.append(self)

    # -- construction helpers ------------------------------------------------

    def _enroll_camera(self, index: int, prnu: bool = False, queue_path=None) -> CameraAgent:
        serial = f"SN{index:06d}"
        if prnu:
            frames = synthetic_prnu_frames(self._cam_rng, 20)
            identity = enroll_prnu(frames, entropy=bytes(self._cam_rng.bytes(32)))
        else:
            identity = make_calibrated_sensor(seed=int(self._cam_rng.integers(0, 2**63)))

        device_cert, assignments = self.ma.provision_device(
            identity.nuc_hash, identity.keypair.public_bytes
        )
        identity.device_cert = device_cert

        agent = CameraAgent(
            identity=identity,
            assignments=assignments,
            validator_id=self.ma.validator_id,
            transport=self._make_camera_transport(serial),
            queue_path=queue_path,
            seed=int(self._cam_rng.integers(0, 2**63)),
            metadata_enabled=self.topology.metadata,
        )
        self.cameras.append(agent)
        self.camera_serials.append(serial)
        self.ground_truth.production[serial] = ProductionRecord(
            serial=serial, nuc_hash=identity.nuc_hash, public_key=identity.keypair.public_bytes
        )
        self.ground_truth.assignments[serial] = [(a.table_id, a.key_index) for a in assignments]
        self.taint.register_atom(ATOM_NUC_HASH, identity.nuc_hash)
        self.taint.register_atom(ATOM_DEVICE_SERIAL, serial.encode("ascii"))
        return agent

    def _make_camera_transport(self, serial: str):
        def transport(server_id: str, message: bytes):
            if self.faults.server_down(server_id):
                raise ServerUnreachable(server_id)
            self.bus.deliver(f"camera:{serial}", f"server:{server_id}", message)
            server = self.servers[server_id]
            outcome = server.handle_submission(message, now=self.clock.now())
            self._tap_server_view(message, outcome)
            if isinstance(outcome, ServerRejection):
                self._last_rejections.append(outcome)
            return b""

        return transport

    def _make_ma_transport(self, server_id: str):
        def transport(validator_id: str, request: bytes):
            self.bus.deliver(f"server:{server_id}", f"ma:{validator_id}", request)
            cert, claimed_server = wire.decode_validate(request)
            outcome = self.ma.validate(
                cert,
                claimed_server,
                now=self.clock.now(),
                transport_peer_id=server_id,
            )
            if hasattr(outcome, "ma_signature"):
                try:
                    nuc = None
                    for key in self.ma._candidate_keys(cert.key_table_id, cert.key_index, self.clock.now()):
                        try:
                            nuc = crypto.decrypt_token(cert.encrypted_token, key)
                            break
                        except BirthmarkError:
                            continue
                    if nuc is not None:
                        self.ma_view.append((crypto.sha256(cert.encrypted_token), nuc))
                except BirthmarkError:
                    pass
                response = wire.encode_ma_approval(
                    outcome.record_hash, outcome.server_id, outcome.ma_signature
                )
            else:
                response = wire.encode_ma_rejection(outcome.code, outcome.detail)
            self.bus.deliver(f"ma:{validator_id}", f"server:{server_id}", response)
            return response

        return transport

    def _make_chain_transport(self, server_id: str):
        def transport(message: bytes):
            for validator in self.validators:
                self.bus.deliver(f"server:{server_id}", f"validator:{validator.node_id}", message)
                validator.handle_chain_submit(message, now=self.clock.now())

        return transport

    def _tap_server_view(self, submit_message: bytes, outcome) -> None:
        if isinstance(outcome, ServerRejection):
            return
        try:
            r = wire._Reader(submit_message)
            r.u8("tag")
            n = r.u16("len")
            packet = wire.CameraPacket.decode(r.take(n, "packet"))
        except BirthmarkError:
            return
        cert = packet.certificate
        self.server_view.append(
            {
                "image_hash": packet.record.image_hash,
                "token_digest": crypto.sha256(cert.encrypted_token),
                "table_id": cert.key_table_id,
                "key_index": cert.key_index,
            }
        )

    # -- pipeline ---------------------------------------------------------------

    def capture(
        self,
        camera_index: int,
        image: wire.PixelImage,
        options: Optional[CaptureOptions] = None,
    ) -> CaptureOutcome:
        """Drive one capture end to end (build, select, dual-submit)."""
        agent = self.cameras[camera_index]
        serial = self.camera_serials[camera_index]
        packet, nonce = agent.capture_and_build(image, options)
        self.taint.register_atom(ATOM_IMAGE_HASH, packet.record.image_hash)
        self.ground_truth.captures.append((serial, packet.record.image_hash))

        agent.select_servers(self.registry, self.clock.now())
        self._last_rejections = []
        receipt = agent.submit(packet, now=self.clock.now())
        return CaptureOutcome(
            serial=serial,
            image_hash=packet.record.image_hash,
            packet=packet,
            nonce=nonce,
            receipt=receipt,
            rejections=list(self._last_rejections),
        )

    def run_round(self, fault_plan: Optional[FaultPlan] = None) -> RoundOutcome:
        """One finalization round over everything paired since the last one."""
        self.round_times.append(self.clock.now())
        return run_pipeline_round(self.validators, fault_plan)

    def drain_queues(self) -> int:
        """Let every camera retry queued submissions at the current time."""
        drained = 0
        for agent in self.cameras:
            drained += len(agent.drain_queue(self.clock.now()))
        return drained

    def sync_observer(self) -> None:
        """A public observer reads validator v0's full log off the bus."""
        if self.validators:
            log = self.validators[0].store.log_bytes()
            if log:
                self.bus.deliver("validator:v0", "observer:public", log)

    # -- convenience fixtures -----------------------------------------------------

    def random_image(self, width: int = 24, height: int = 16) -> wire.PixelImage:
        arr = self._misc_rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
        return wire.PixelImage.from_array(arr)

    def finalized_records(self) -> List[wire.ChainRecord]:
        return list(self.validators[0].store.records())


def synthetic_prnu_frames(rng: np.random.Generator, count: int, width: int = 32, height: int = 32):
    """Flat-gray frames with a persistent per-sensor noise field injected."""
    noise = rng.normal(0.0, 4.0, size=(height, width, 3))
    frames = []
    for _ in range(count):
        base = np.full((height, width, 3), 128.0)
        shot = rng.normal(0.0, 1.0, size=(height, width, 3))
        frame = np.clip(base + noise + shot, 0, 255).astype(np.uint8)
        frames.append(wire.PixelImage.from_array(frame))
    return frames
