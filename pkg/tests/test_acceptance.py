"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test prints a single PASS/FAIL line.  Performance thresholds
(criterion 10) are hard on the CI reference profile; set
BIRTHMARK_BENCH_ADVISORY=1 to downgrade them to warnings on other
hardware.  Everything else is zero-tolerance as specified.
"""

import math
import os

import numpy as np
import pytest

from birthmark import audit as audit_mod
from birthmark import bench, crypto, wire
from birthmark.audit import DeclaredOp, DeviationReport
from birthmark.camera import CaptureOptions
from birthmark.chain import byzantine_bound, projected_growth, quorum_size
from birthmark.harness import (
    ATOM_IMAGE_HASH,
    ATOM_NUC_HASH,
    Topology,
    World,
    byzantine_breach,
    byzantine_run,
    correlation_attack,
    run_suite,
    timing_anonymity,
    track_worlds,
)
from birthmark.harness.attacks import (
    outage_recovery,
    replay_valid_auth,
    single_server_forge,
    three_sigma_binomial,
)

BENCH_ADVISORY = os.environ.get("BIRTHMARK_BENCH_ADVISORY", "0") == "1"


def _report(criterion: int, label: str, passed: bool, detail: str = ""):
    status = "PASS" if passed else "FAIL"
    suffix = f"  [{detail}]" if detail else ""
    print(f"ACCEPTANCE {criterion:>2}: {status}  {label}{suffix}")
    assert passed, f"criterion {criterion} failed: {label} {detail}"


class TestAcceptance:
    def test_01_wire_conformance(self):
        image_hash = crypto.sha256(b"acceptance image")
        parent = crypto.sha256(b"acceptance parent")
        meta = bytes(8)

        record_pm = wire.BirthmarkRecord(image_hash, 2, parent, meta, meta, meta)
        chain_record = wire.ChainRecord(record_pm, "node-eu-1/node-us-3", 2_940_324)
        payload_len = len(chain_record.encode())
        total_len = len(wire.encode_enveloped(chain_record, 0, wire.GENESIS_LINK))

        # the ~411-byte packet: metadata on, no parent, one declared op
        world = World(Topology(seed=0, cameras=1, servers=4, validators=4))
        packet, _ = world.cameras[0].capture_and_build(
            world.random_image(),
            CaptureOptions(
                metadata=True,
                declared_ops=(DeclaredOp.exposure(1.5),),
                parent_image_hash=None,
            ),
        )
        # level-1 without parent models in-camera ISP processing
        packet_record = wire.BirthmarkRecord(
            packet.record.image_hash, 1, None,
            packet.record.timestamp_hash, packet.record.geotag_hash,
            packet.record.owner_id_hash,
        )
        assert packet.record == packet_record
        packet_len = len(packet.encode())

        rhash = wire.record_hash(packet.record)
        bundle = wire.encode_validation_bundle([
            wire.Approval("node-eu-1", rhash, bytes(64), bytes(64)),
            wire.Approval("node-us-3", rhash, bytes(64), bytes(64)),
        ])
        bundle_len = len(bundle)

        ok = (
            payload_len == 113
            and total_len == 153
            and 405 <= packet_len <= 420
            and 340 <= bundle_len <= 360
        )
        _report(
            1, "wire conformance", ok,
            f"chain payload {payload_len}B, enveloped {total_len}B, "
            f"packet {packet_len}B, bundle {bundle_len}B",
        )

    def test_02_storage_arithmetic(self):
        growth = projected_growth(1_000_000)
        gb = growth["gb_per_year"]
        # within 1% of the published 55-56 GB/year band
        ok = 55.0 * 0.99 <= gb <= 56.0 * 1.01 and abs(gb - 55.845) < 1e-9
        _report(2, "storage arithmetic", ok, f"{gb:.3f} GB/year at 1e6 records/day")

    def test_03_claim5_forgery_suite(self):
        outcome = single_server_forge(seed=0)
        ev = outcome.evidence
        ok = (
            ev["option_a"] == "SameServer"
            and ev["option_b"] == "BadCredentials"
            and ev["option_c"] == "BadMASig"
            and ev["option_d"] == "BadServerSig"
            and ev["option_e_finalized"] == "True"
        )
        _report(
            3, "claim-5 forgery suite", ok,
            f"A={ev['option_a']} B={ev['option_b']} C={ev['option_c']} "
            f"D={ev['option_d']} E finalized={ev['option_e_finalized']}",
        )

    def test_04_byzantine_sweep(self):
        failures = []
        runs = 0
        for n in (4, 10):
            for f in range(byzantine_bound(n) + 1):
                for seed in range(100):
                    result = byzantine_run(n, f, seed)
                    runs += 1
                    if not result["safe"]:
                        failures.append(result)
        breaches = {n: byzantine_breach(n, seed=0) for n in (4, 10)}
        breach_ok = all(b["breach_demonstrated"] for b in breaches.values())
        ok = not failures and breach_ok
        _report(
            4, "byzantine sweep", ok,
            f"{runs} safe runs across n=4 (f<=1) and n=10 (f<=3); "
            f"divergence shown at f=2/n=4 and f=4/n=10",
        )

    def test_05_information_flow_suite_wide(self):
        with track_worlds() as tracker:
            report = run_suite(seed=0, with_evasion=False)
        ma_images = set()
        server_fingerprints = set()
        for world in tracker.worlds:
            ma_images |= world.taint.role_saw("ma:", ATOM_IMAGE_HASH)
            server_fingerprints |= world.taint.role_saw("server:", ATOM_NUC_HASH)
        ok = not ma_images and not server_fingerprints and len(tracker.worlds) >= 10
        _report(
            5, "information-flow properties", ok,
            f"{len(tracker.worlds)} scenario worlds; MA image hashes: "
            f"{len(ma_images)}, server plaintext fingerprints: {len(server_fingerprints)}",
        )

    def test_06_correlation_attack(self):
        devices = 2000
        world = World(
            Topology(seed=0, cameras=devices, servers=4, validators=4, table_sizes=(2,))
        )
        for i in range(devices):
            world.capture(i, world.random_image(6, 6))
        world.run_round()
        world.sync_observer()

        partial = correlation_attack(world, {"server"}, seed=0)
        triple = correlation_attack(world, {"ma", "server", "production"}, seed=0)
        k = partial.k_effective
        bound = 1.0 / k + three_sigma_binomial(1.0 / k, partial.images)
        ok = k >= 900 and partial.linkage <= bound and triple.linkage >= 0.99
        _report(
            6, "correlation attack", ok,
            f"k~{k:.0f}; partial linkage {partial.linkage:.5f} <= {bound:.5f}; "
            f"triple linkage {triple.linkage:.3f}",
        )

    def test_07_replay_and_uniqueness(self):
        outcome = replay_valid_auth(seed=0)
        ev = outcome.evidence
        ok = (
            outcome.defended
            and ev["records_before_replay"] == ev["records_after_replay"]
        )
        _report(
            7, "replay and uniqueness", ok,
            f"records {ev['records_before_replay']} -> {ev['records_after_replay']} "
            f"after replay; swap: {ev['hash_swap_rejection']}",
        )

    def test_08_temporal_privacy(self):
        world = World(Topology(seed=0, cameras=4, servers=4, validators=4))
        for i in range(24):
            world.capture(i % 4, world.random_image())
            world.clock.advance(20)
        world.run_round()
        world.clock.advance(1800)
        for i in range(4):
            world.capture(i % 4, world.random_image())
        world.run_round()

        aligned = all(
            any(
                record.posting_timestamp == wire.posting_epoch(t)
                for t in world.round_times
            )
            and (record.posting_timestamp * 600) % 600 == 0
            for record in world.finalized_records()
        )
        hist = timing_anonymity(world, warn_below=10)
        sparse_warned = len(hist.warnings) >= 1
        ok = aligned and sparse_warned
        _report(
            8, "temporal privacy", ok,
            f"{len(world.finalized_records())} records 600s-aligned; "
            f"low-traffic warnings: {hist.warnings and [hist.bins[w] for w in hist.warnings]}",
        )

    def test_09_deviation_audit(self):
        # replay-zero: exact pipeline replay scores 0.0 across op mixes
        rng = np.random.default_rng(5)
        parent = wire.PixelImage.from_array(
            rng.integers(0, 256, size=(300, 400, 3), dtype=np.uint8)
        )
        op_sets = [
            (),
            (DeclaredOp.exposure(1.5),),
            (DeclaredOp.crop(10, 10, 256, 200), DeclaredOp.denoise(2)),
            (DeclaredOp.white_balance(1.2, 1.0, 0.8), DeclaredOp.exposure(-1.0)),
        ]
        replay_zero = True
        for ops in op_sets:
            result = audit_mod.apply_ops(parent, ops)
            verdict = audit_mod.audit(
                parent, result, DeviationReport(operations=tuple(ops)), rng_seed=3
            )
            replay_zero &= verdict.measured_score == 0.0 and verdict.passed

        # clone stamp >= 10% of a 1024x1024 fixture fails at theta=0.16 in
        # >= 99/100 seeded trials (fixture: dark frame, bright 384px stamp)
        size = 1024
        region = (320, 320, 384, 384)
        declared = (DeclaredOp.exposure(0.5),)
        fixture_rng = np.random.default_rng(0)
        fixture_parent = wire.PixelImage.from_array(
            fixture_rng.integers(0, 32, size=(size, size, 3), dtype=np.uint8)
        )
        tampered = audit_mod.apply_ops(fixture_parent, declared).to_array().copy()
        x, y, w, h = region
        tampered[y : y + h, x : x + w] = 255
        tampered_img = wire.PixelImage.from_array(tampered)
        report = DeviationReport(operations=declared, reported_score=0.0)
        fails = sum(
            0 if audit_mod.audit(
                fixture_parent, tampered_img, report, rng_seed=s, threshold=0.16
            ).passed else 1
            for s in range(100)
        )
        miss_bound = audit_mod.patch_miss_bound(size, size, region)
        tamper_fraction = w * h / (size * size)
        ok = replay_zero and fails >= 99 and tamper_fraction >= 0.10
        _report(
            9, "deviation audit", ok,
            f"replay-zero exact; clone-stamp {tamper_fraction:.1%} failed "
            f"{fails}/100 trials; analytic all-miss bound {miss_bound:.2e}",
        )

    def test_10_performance(self):
        camera = bench.bench_camera(images=40)
        lookup = bench.bench_lookup(records=1_000_000, queries=1_000)
        e2e = bench.bench_verify_e2e(records=100_000, queries=30)

        cam_ok = camera.summary["within_target"]
        lookup_ok = lookup.summary["within_target"]
        e2e_ok = e2e.summary["within_target"]
        detail = (
            f"camera p95 {camera.summary['p95_ms']:.1f}ms (<100); "
            f"lookup p99 {lookup.summary['p99_ms']:.3f}ms (<50) at 1e6; "
            f"verify e2e p99 {e2e.summary['p99_ms']:.1f}ms (<500)"
        )
        if BENCH_ADVISORY and not (cam_ok and lookup_ok and e2e_ok):
            print(f"ACCEPTANCE 10: ADVISORY  performance targets missed on this hardware  [{detail}]")
            pytest.skip("bench thresholds advisory on this hardware")
        _report(10, "performance targets", cam_ok and lookup_ok and e2e_ok, detail)

    def test_11_graceful_degradation(self):
        outcome = outage_recovery(seed=0, captures=50)
        ev = outcome.evidence
        ok = (
            ev["capture_failures"] == 0
            and ev["queued_during_outage"] == 50
            and ev["finalized_after_recovery"] == 50
            and ev["duplicates"] == 0
        )
        _report(
            11, "graceful degradation", ok,
            f"0 capture failures, {ev['queued_during_outage']} queued, "
            f"{ev['finalized_after_recovery']}/50 finalized, "
            f"{ev['duplicates']} duplicates",
        )
