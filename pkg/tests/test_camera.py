"""Camera agent: enrollment, packet building, selection, queueing."""

import numpy as np
import pytest

from birthmark import camera, crypto, wire
from birthmark.authority import ManufacturerAuthority, SlotAssignment
from birthmark.camera import (
    CameraAgent,
    CaptureOptions,
    ServerUnreachable,
    enroll_prnu,
    make_calibrated_sensor,
)
from birthmark.errors import InsufficientFrames, InvalidInput, NotProvisioned
from birthmark.registry import ServerRegistry


def gray_frames(count=20, noise=None, seed=0, size=16):
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(count):
        base = np.full((size, size, 3), 128.0)
        if noise is not None:
            base = base + noise
        base = base + rng.normal(0, 1.0, size=base.shape)
        frames.append(wire.PixelImage.from_array(np.clip(base, 0, 255).astype(np.uint8)))
    return frames


def make_agent(tmp_path=None, metadata=False, seed=3):
    identity = make_calibrated_sensor(seed=seed)
    ma = ManufacturerAuthority("CANON_001", table_sizes=[4])
    cert, slots = ma.provision_device(identity.nuc_hash, identity.keypair.public_bytes)
    identity.device_cert = cert
    agent = CameraAgent(
        identity=identity,
        assignments=slots,
        validator_id="CANON_001",
        queue_path=(tmp_path / "queue.jsonl") if tmp_path else None,
        seed=seed,
        metadata_enabled=metadata,
    )
    return agent, ma


def image(seed=0, w=8, h=8):
    rng = np.random.default_rng(seed)
    return wire.PixelImage.from_array(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


class TestEnrollment:
    def test_requires_20_frames(self):
        with pytest.raises(InsufficientFrames):
            enroll_prnu(gray_frames(19))

    def test_dimension_mismatch(self):
        frames = gray_frames(19) + gray_frames(1, size=8)
        with pytest.raises(InvalidInput):
            enroll_prnu(frames)

    def test_fixed_entropy_is_deterministic(self):
        # zero-noise degenerate case: flat frames + fixed entropy
        flat = [wire.PixelImage.from_array(np.full((8, 8, 3), 128, dtype=np.uint8))] * 20
        a = enroll_prnu(flat, entropy=bytes(32))
        b = enroll_prnu(flat, entropy=bytes(32))
        assert a.keypair.public_bytes == b.keypair.public_bytes

    def test_re_enrollment_changes_identity(self):
        frames = gray_frames()
        a = enroll_prnu(frames)  # fresh entropy each enrollment
        b = enroll_prnu(frames)
        assert a.keypair.public_bytes != b.keypair.public_bytes
        assert a.nuc_hash != b.nuc_hash

    def test_distinct_sensors_distinct_keypairs(self):
        rng = np.random.default_rng(1)
        noise_a = rng.normal(0, 4.0, (16, 16, 3))
        noise_b = rng.normal(0, 4.0, (16, 16, 3))
        a = enroll_prnu(gray_frames(noise=noise_a), entropy=bytes(32))
        b = enroll_prnu(gray_frames(noise=noise_b), entropy=bytes(32))
        assert a.keypair.public_bytes != b.keypair.public_bytes

    def test_prnu_identity_has_no_pattern(self):
        identity = enroll_prnu(gray_frames())
        assert identity.kind == "PrnuSeeded"
        assert identity.nuc_map is None

    def test_calibrated_sensor_hash(self):
        identity = make_calibrated_sensor(seed=5)
        assert identity.nuc_hash == crypto.sha256(identity.nuc_map.tobytes())


class TestCaptureAndBuild:
    def test_raw_capture_no_metadata(self):
        agent, _ma = make_agent()
        packet, nonce = agent.capture_and_build(image(), CaptureOptions(metadata=False))
        assert nonce is None
        rec = packet.record
        assert rec.modification_level == 0
        assert rec.parent_image_hash is None
        assert rec.timestamp_hash is None
        assert packet.certificate.deviation_data == b""

    def test_metadata_capture_has_three_hashes_and_nonce(self):
        agent, _ma = make_agent(metadata=True)
        packet, nonce = agent.capture_and_build(image())
        rec = packet.record
        assert len(nonce) == 16
        assert len(rec.timestamp_hash) == len(rec.geotag_hash) == len(rec.owner_id_hash) == 8

    def test_declared_edit_sets_level_and_parent(self):
        from birthmark.audit import DeclaredOp, DeviationReport

        agent, _ma = make_agent()
        parent_hash = crypto.sha256(b"parent")
        packet, _ = agent.capture_and_build(
            image(),
            CaptureOptions(
                declared_ops=(DeclaredOp.exposure(1.5),),
                parent_image_hash=parent_hash,
            ),
        )
        assert packet.record.modification_level == 1
        assert packet.record.parent_image_hash == parent_hash
        report = DeviationReport.decode(packet.certificate.deviation_data)
        assert report.operations[0].kind == "exposure"

    def test_packet_binding(self):
        agent, _ma = make_agent()
        packet, _ = agent.capture_and_build(image())
        cert = packet.certificate
        assert cert.record_hash == wire.record_hash(packet.record)
        assert cert.token_excerpt == crypto.sha256(cert.encrypted_token)
        assert crypto.verify(cert.encode(), packet.camera_signature,
                             agent.identity.keypair.public_bytes)

    def test_unprovisioned_rejected(self):
        identity = make_calibrated_sensor(seed=9)
        agent = CameraAgent(identity, [], "CANON_001")
        with pytest.raises(NotProvisioned):
            agent.capture_and_build(image())

    def test_slot_choice_is_uniform_over_assignments(self):
        agent, ma = make_agent()
        # give the agent several distinguishable slots in one table
        table = ma.tables[0]
        agent.assignments = [
            SlotAssignment(0, i, table.keys[i]) for i in range(4)
        ]
        used = set()
        for i in range(40):
            packet, _ = agent.capture_and_build(image(seed=i))
            used.add(packet.certificate.key_index)
        assert used == {0, 1, 2, 3}


def registry_with(entries):
    reg = ServerRegistry()
    for i, (sid, region, load) in enumerate(entries):
        reg.publish(sid, region, load, now=0)
    return reg


class TestServerSelection:
    def test_distinct_regions_when_possible(self):
        entries = [(f"node-{r}-{i}", r, 0) for i, r in enumerate(
            ["eu", "eu", "eu", "us", "us", "us", "ap", "ap", "ap", "sa", "sa", "sa"])]
        reg = registry_with(entries)
        agent, _ = make_agent()
        chosen = agent.select_servers(reg, now=0)
        regions = {sid.split("-")[1] for sid in chosen}
        assert len(chosen) == 3
        assert len(regions) == 3

    def test_region_constraint_relaxed_before_load(self):
        # all low-load nodes live in one region: selection must stay inside
        # the eligible (non-busy) pool and relax regions instead
        entries = [("node-eu-0", "eu", 0), ("node-eu-1", "eu", 0),
                   ("node-eu-2", "eu", 0), ("node-eu-3", "eu", 0),
                   ("node-us-4", "us", 100), ("node-us-5", "us", 90),
                   ("node-ap-6", "ap", 80), ("node-ap-7", "ap", 70)]
        reg = registry_with(entries)
        eligible_ids = {e.server_id for e in reg.eligible()}
        agent, _ = make_agent()
        chosen = agent.select_servers(reg, now=0)
        assert len(chosen) == 3
        assert set(chosen) <= eligible_ids

    def test_top_quartile_never_selected(self):
        entries = [(f"node-x-{i}", "eu" if i % 2 else "us", i * 10) for i in range(8)]
        reg = registry_with(entries)
        busiest = {e.server_id for e in reg.entries()[:2]}  # top 25% of 8
        hits = set()
        for trial in range(1000):
            agent, _ = make_agent(seed=trial)
            hits.update(agent.select_servers(reg, now=0))
        assert not hits & busiest

    def test_selection_refreshes_daily(self):
        entries = [(f"node-r{i}-{i}", f"r{i}", 0) for i in range(8)]
        reg = registry_with(entries)
        agent, _ = make_agent(seed=11)
        first = agent.select_servers(reg, now=0)
        assert agent.select_servers(reg, now=3600) == first  # cached
        later = agent.select_servers(reg, now=90000)  # > 24h
        assert agent._selection_at == 90000
        assert len(later) == 3

    def test_degraded_selection_with_one_server(self):
        reg = registry_with([("node-eu-0", "eu", 0)])
        agent, _ = make_agent()
        chosen = agent.select_servers(reg, now=0)
        assert chosen == ["node-eu-0"]


class TestSubmitAndQueue:
    def wire_agent(self, tmp_path, up=None):
        agent, _ = make_agent(tmp_path)
        up = set(up or [])
        delivered = []

        def transport(server_id, message):
            if server_id not in up:
                raise ServerUnreachable(server_id)
            delivered.append(server_id)
            return b""

        agent.transport = transport
        reg = registry_with([(f"node-r{i}-{i}", f"r{i}", 0) for i in range(4)])
        agent.select_servers(reg, now=0)
        return agent, delivered, up

    def test_both_up_dual_receipt(self, tmp_path):
        agent, delivered, up = self.wire_agent(tmp_path, up=[f"node-r{i}-{i}" for i in range(4)])
        packet, _ = agent.capture_and_build(image())
        receipt = agent.submit(packet, now=0)
        assert isinstance(receipt, camera.DualReceipt)
        assert len(set(receipt.server_ids)) == 2

    def test_one_down_alternate_used(self, tmp_path):
        agent, delivered, up = self.wire_agent(tmp_path, up=[f"node-r{i}-{i}" for i in range(4)])
        up.discard(agent._selection[0])
        packet, _ = agent.capture_and_build(image())
        receipt = agent.submit(packet, now=0)
        assert isinstance(receipt, camera.DualReceipt)
        assert agent._selection[0] not in receipt.server_ids

    def test_all_down_queues_then_drains(self, tmp_path):
        agent, delivered, up = self.wire_agent(tmp_path, up=[])
        packet, _ = agent.capture_and_build(image())
        entry = agent.submit(packet, now=0)
        assert len(agent.queue) == 1
        assert entry.next_retry > 0

        up.update(f"node-r{i}-{i}" for i in range(4))
        receipts = agent.drain_queue(now=entry.next_retry + 1)
        assert len(receipts) == 1
        assert len(agent.queue) == 0

    def test_queue_survives_restart(self, tmp_path):
        agent, delivered, up = self.wire_agent(tmp_path, up=[])
        packet, _ = agent.capture_and_build(image())
        agent.submit(packet, now=0)

        # "restart": a fresh agent loads the same queue file
        resumed = camera.SubmissionQueue(tmp_path / "queue.jsonl")
        assert len(resumed.entries) == 1
        assert resumed.entries[0].image_hash == packet.record.image_hash
        assert resumed.entries[0].packet.encode() == packet.encode()

    def test_backoff_grows_and_caps(self):
        rng = np.random.default_rng(0)
        delays = [camera.backoff_delay(a, rng) for a in range(12)]
        assert delays[0] < 3.0
        assert max(delays) <= 600 * 1.2
        assert delays[5] > delays[0]


class TestIdentityPersistence:
    def test_round_trip(self, tmp_path):
        agent, _ = make_agent()
        path = tmp_path / "identity.json"
        camera.save_identity(agent.identity, agent.assignments, path)
        identity, slots = camera.load_identity(path)
        assert identity.nuc_hash == agent.identity.nuc_hash
        assert identity.keypair.public_bytes == agent.identity.keypair.public_bytes
        assert [(s.table_id, s.key_index) for s in slots] == [
            (s.table_id, s.key_index) for s in agent.assignments
        ]

    def test_prnu_secrecy_in_persisted_state(self, tmp_path):
        # inject a known noise field; after enrollment no persisted byte
        # sequence from the pattern may appear in the identity store
        rng = np.random.default_rng(2)
        noise = rng.normal(0, 4.0, (16, 16, 3))
        frames = gray_frames(noise=noise, seed=7)
        identity = enroll_prnu(frames, entropy=bytes(32))
        path = tmp_path / "identity.json"
        camera.save_identity(identity, [], path)
        blob = path.read_bytes()

        # the estimator output for these frames (what enrollment computed)
        from scipy import ndimage

        residual = np.zeros((16, 16, 3))
        for frame in frames:
            arr = frame.to_array().astype(np.float64)
            residual += arr - ndimage.gaussian_filter(arr, sigma=(1.5, 1.5, 0))
        pattern = (residual / len(frames)).astype(np.float32).tobytes()
        assert pattern not in blob
        assert pattern[:64] not in blob
        assert pattern.hex().encode() not in blob
