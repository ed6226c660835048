"""Verifier front door and the command-line surface."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from birthmark import crypto, verifier, wire
from birthmark.camera import CaptureOptions
from birthmark.chain import NodeRpcServer
from birthmark.cli import main as cli_main
from birthmark.harness import Topology, World


@pytest.fixture(scope="module")
def verify_rig(tmp_path_factory):
    """A finalized world with a served node and image files on disk."""
    tmp = tmp_path_factory.mktemp("verify")
    world = World(Topology(seed=21, cameras=2, servers=4, validators=4, metadata=True))

    original = world.random_image(32, 24)
    options = CaptureOptions(
        metadata=True,
        timestamp="2025-11",
        geolocation="37.77490,-122.41940",
        owner="press-desk-7",
    )
    first = world.capture(0, original, options)

    # a registered crop of the original, built through the edit flow
    from birthmark.audit import DeclaredOp, apply_ops

    crop_op = DeclaredOp.crop(4, 4, 16, 12)
    cropped = apply_ops(original, [crop_op])
    second = world.capture(
        0,
        cropped,
        CaptureOptions(declared_ops=(crop_op,), parent_image_hash=first.image_hash),
    )
    world.run_round()

    original_path = tmp / "original.bmpx"
    wire.write_bmpx(original, original_path)
    nonce_path = verifier.write_nonce_sidecar(first.nonce, original_path)
    crop_path = tmp / "crop.bmpx"
    wire.write_bmpx(cropped, crop_path)
    unregistered_path = tmp / "unregistered.bmpx"
    wire.write_bmpx(world.random_image(8, 8), unregistered_path)

    server = NodeRpcServer(world.validators[0]).start()
    yield {
        "world": world,
        "url": server.url,
        "original": original_path,
        "nonce": nonce_path,
        "crop": crop_path,
        "unregistered": unregistered_path,
        "first": first,
    }
    server.stop()


class TestVerifier:
    def test_registered_image_authenticated(self, verify_rig):
        report = verifier.verify_file(verify_rig["original"], verify_rig["url"])
        assert report.status == "found"
        assert report.record["modification_level"] == 0
        assert report.exit_code == 0

    def test_recompressed_pixels_not_found(self, verify_rig):
        # any pixel change produces a fresh hash: the exactness boundary
        img = wire.read_bmpx(verify_rig["original"])
        arr = img.to_array().copy()
        arr[0, 0, 0] ^= 1
        report = verifier.verify_image(wire.PixelImage.from_array(arr), verify_rig["url"])
        assert report.status == "not_found"
        assert report.exit_code == 1

    def test_registered_crop_has_parent_chain(self, verify_rig):
        report = verifier.verify_file(verify_rig["crop"], verify_rig["url"], want_chain=True)
        assert report.status == "found"
        assert len(report.chain) == 2
        assert report.chain[0]["modification_level"] == 0
        assert report.chain[1]["modification_level"] == 1

    def test_metadata_verification(self, verify_rig):
        report = verifier.verify_file(verify_rig["original"], verify_rig["url"])
        nonce = verifier.read_nonce_sidecar(verify_rig["nonce"])
        claims = {
            "timestamp": "2025-11",
            "geolocation": "37.77490,-122.41940",
            "owner": "press-desk-7",
        }
        verdicts = verifier.verify_metadata(report.record, nonce, claims)
        assert verdicts == {k: "match" for k in claims}

        wrong_month = verifier.verify_metadata(report.record, nonce, {**claims, "timestamp": "2025-10"})
        assert wrong_month["timestamp"] == "mismatch"
        assert wrong_month["geolocation"] == "match"

        wrong_nonce = verifier.verify_metadata(report.record, bytes(16), claims)
        assert set(wrong_nonce.values()) == {"mismatch"}

        missing_nonce = verifier.verify_metadata(report.record, None, claims)
        assert set(missing_nonce.values()) == {"cannot-verify"}

    def test_verdict_immune_to_sidecar_loss(self, verify_rig):
        # metadata stripping never changes the authenticity verdict
        with_meta = verifier.verify_file(verify_rig["original"], verify_rig["url"])
        assert with_meta.status == "found"  # no sidecar consulted at all


class TestCli:
    def test_verify_command_found(self, verify_rig):
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["verify", str(verify_rig["original"]), "--node", verify_rig["url"]],
        )
        assert result.exit_code == 0
        assert "AUTHENTICATED" in result.output

    def test_verify_command_not_found(self, verify_rig):
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["verify", str(verify_rig["unregistered"]), "--node", verify_rig["url"]],
        )
        assert result.exit_code == 1
        assert "NOT FOUND" in result.output

    def test_verify_command_unreachable(self, verify_rig):
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["verify", str(verify_rig["original"]), "--node", "http://127.0.0.1:1"],
        )
        assert result.exit_code == 2

    def test_verify_json_with_meta(self, verify_rig):
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            [
                "verify", str(verify_rig["original"]),
                "--node", verify_rig["url"], "--json", "--chain",
                "--meta", f"nonce={verify_rig['nonce']}",
                "--meta", "ts=2025-11",
                "--meta", "geo=37.77490,-122.41940",
                "--meta", "owner=press-desk-7",
            ],
        )
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["status"] == "found"
        assert payload["metadata"] == {
            "timestamp": "match", "geolocation": "match", "owner": "match",
        }

    def test_dump_command(self, verify_rig, tmp_path):
        packet = verify_rig["first"].packet
        path = tmp_path / "packet.bin"
        path.write_bytes(packet.encode())
        runner = CliRunner()
        result = runner.invoke(cli_main, ["dump", str(path)])
        assert result.exit_code == 0
        assert "camera packet" in result.output

    def test_chain_stats_command(self):
        runner = CliRunner()
        result = runner.invoke(cli_main, ["chain", "stats", "--records-per-day", "1000000"])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["projected"]["gb_per_year"] == pytest.approx(55.845)

    def test_audit_command(self, tmp_path):
        from birthmark.audit import DeclaredOp, apply_ops

        rng = np.random.default_rng(0)
        parent = wire.PixelImage.from_array(rng.integers(0, 256, (96, 96, 3), dtype=np.uint8))
        ops = (DeclaredOp.exposure(1.0),)
        result_img = apply_ops(parent, ops)
        wire.write_bmpx(parent, tmp_path / "parent.bmpx")
        wire.write_bmpx(result_img, tmp_path / "result.bmpx")
        (tmp_path / "report.json").write_text(json.dumps({
            "operations": [{"kind": "exposure", "stops": 1.0}],
            "reported_score": 0.0,
        }))
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "audit",
            "--parent", str(tmp_path / "parent.bmpx"),
            "--result", str(tmp_path / "result.bmpx"),
            "--report", str(tmp_path / "report.json"),
            "--json",
        ])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["passed"] is True
        assert payload["measured_score"] == 0.0

    def test_sim_run_single_scenario(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "sim", "run", "single-server-forge", "--out", str(tmp_path), "--no-figures",
        ])
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["all_defended"] is True

    def test_ma_admin_workflow(self, tmp_path):
        runner = CliRunner()
        state = tmp_path / "ma"
        assert runner.invoke(cli_main, [
            "ma", "init", "--dir", str(state), "--tables", "4",
        ]).exit_code == 0

        device = crypto.SigningKeypair.generate()
        fingerprint = crypto.sha256(b"cli sensor").hex()
        result = runner.invoke(cli_main, [
            "ma", "provision", "--dir", str(state),
            "--fingerprint", fingerprint, "--pubkey", device.public_bytes.hex(),
        ])
        assert result.exit_code == 0, result.output
        slots = json.loads(result.output)["slots"]
        assert slots

        assert runner.invoke(cli_main, [
            "ma", "revoke", "--dir", str(state), "--fingerprint", fingerprint,
        ]).exit_code == 0

        result = runner.invoke(cli_main, [
            "ma", "rotate", "--dir", str(state),
            "--table", str(slots[0]["table_id"]), "--index", str(slots[0]["key_index"]),
        ])
        assert result.exit_code == 0, result.output

        result = runner.invoke(cli_main, ["ma", "stats", "--dir", str(state)])
        assert result.exit_code == 0
        stats = json.loads(result.output)
        assert stats["devices"] == 1
        assert stats["revoked"] == 1

    def test_bench_camera_small(self):
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "bench", "camera", "--images", "5", "--width", "200", "--height", "150",
        ])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["camera"]["samples"] == 5
