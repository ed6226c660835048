"""Deviation audit: op replay, patch scoring, clustering."""

import numpy as np
import pytest

from birthmark import audit
from birthmark.audit import AuditLogEntry, DeclaredOp, DeviationReport
from birthmark.errors import InvalidOp
from birthmark.wire import PixelImage


def make_image(seed: int, width: int = 256, height: int = 256) -> PixelImage:
    rng = np.random.default_rng(seed)
    return PixelImage.from_array(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


class TestApplyOps:
    def test_exposure_zero_is_identity(self):
        img = make_image(1)
        assert audit.apply_ops(img, [DeclaredOp.exposure(0.0)]) == img

    def test_exposure_plus_one_doubles(self):
        img = PixelImage.from_array(np.full((4, 4, 3), 100, dtype=np.uint8))
        out = audit.apply_ops(img, [DeclaredOp.exposure(1.0)])
        assert out.to_array().min() == out.to_array().max() == 200

    def test_exposure_clamps_at_255(self):
        img = PixelImage.from_array(np.full((4, 4, 3), 200, dtype=np.uint8))
        out = audit.apply_ops(img, [DeclaredOp.exposure(1.0)])
        assert out.to_array().max() == 255

    def test_full_frame_crop_is_identity(self):
        img = make_image(2, 64, 48)
        assert audit.apply_ops(img, [DeclaredOp.crop(0, 0, 64, 48)]) == img

    def test_crop_out_of_bounds(self):
        img = make_image(3, 32, 32)
        with pytest.raises(InvalidOp):
            audit.apply_ops(img, [DeclaredOp.crop(10, 10, 32, 32)])

    def test_white_balance_scales_channels(self):
        img = PixelImage.from_array(np.full((2, 2, 3), 100, dtype=np.uint8))
        out = audit.apply_ops(img, [DeclaredOp.white_balance(1.0, 0.5, 2.0)]).to_array()
        assert (out[..., 0] == 100).all()
        assert (out[..., 1] == 50).all()
        assert (out[..., 2] == 200).all()

    def test_denoise_flattens_noise(self):
        img = make_image(4, 64, 64)
        out = audit.apply_ops(img, [DeclaredOp.denoise(3)]).to_array()
        assert out.astype(np.float64).std() < img.to_array().astype(np.float64).std()

    def test_exposure_bounds_enforced(self):
        with pytest.raises(InvalidOp):
            DeclaredOp.exposure(2.5)


class TestReportEncoding:
    def test_round_trip(self):
        report = DeviationReport(
            operations=(
                DeclaredOp.exposure(1.5),
                DeclaredOp.white_balance(1.1, 1.0, 0.9),
                DeclaredOp.denoise(2),
                DeclaredOp.crop(8, 8, 64, 64),
            ),
            reported_score=0.03125,
        )
        decoded = DeviationReport.decode(report.encode())
        assert decoded.reported_score == pytest.approx(0.03125)
        assert decoded.code_hash == audit.AUDIT_CODE_HASH
        assert [op.kind for op in decoded.operations] == [
            "exposure", "white_balance", "denoise", "crop",
        ]

    def test_base_encoding_is_37_bytes(self):
        assert len(DeviationReport().encode()) == 37


class TestAudit:
    OPS = (DeclaredOp.exposure(1.5), DeclaredOp.denoise(1))

    def test_replay_zero(self):
        # exact replay of the declared pipeline scores 0 and passes
        parent = make_image(10)
        result = audit.apply_ops(parent, self.OPS)
        report = DeviationReport(operations=self.OPS, reported_score=0.0)
        verdict = audit.audit(parent, result, report, rng_seed=7)
        assert verdict.measured_score == 0.0
        assert verdict.passed

    def test_replay_zero_with_crop_and_blur_borders(self):
        parent = make_image(11, 300, 200)
        ops = (DeclaredOp.crop(20, 10, 256, 180), DeclaredOp.denoise(2), DeclaredOp.exposure(-0.5))
        result = audit.apply_ops(parent, ops)
        report = DeviationReport(operations=ops, reported_score=0.0)
        verdict = audit.audit(parent, result, report, rng_seed=3)
        assert verdict.measured_score == 0.0

    def test_seeded_determinism(self):
        parent = make_image(12)
        result = audit.apply_ops(parent, self.OPS)
        report = DeviationReport(operations=self.OPS, reported_score=0.0)
        a = audit.audit(parent, result, report, rng_seed=42)
        b = audit.audit(parent, result, report, rng_seed=42)
        assert a.patch_positions == b.patch_positions
        assert a.measured_score == b.measured_score

    def test_clone_stamp_detected(self):
        # declared exposure but a quarter-area region was overwritten
        parent = make_image(13, 512, 512)
        declared = (DeclaredOp.exposure(1.0),)
        tampered = audit.apply_ops(parent, declared).to_array().copy()
        tampered[128:384, 128:384] = 255 - tampered[128:384, 128:384]
        result = PixelImage.from_array(tampered)
        report = DeviationReport(operations=declared, reported_score=0.0)
        verdict = audit.audit(parent, result, report, rng_seed=21)
        assert not verdict.passed
        assert "score-mismatch" in verdict.flags
        # sampled score tracks the brute-force all-positions oracle
        oracle = audit.measure_all_patches_score(parent, result, declared)
        sigma = np.std([audit.audit(parent, result, report, rng_seed=s).measured_score
                        for s in range(10)])
        assert abs(verdict.measured_score - oracle) < 5 * max(sigma, 1e-3)

    def test_score_mismatch_branch(self):
        # actual ops differ from declared; attacker reports 0.00
        parent = make_image(14)
        result = audit.apply_ops(parent, (DeclaredOp.exposure(1.9),))
        report = DeviationReport(operations=(DeclaredOp.exposure(0.25),), reported_score=0.0)
        verdict = audit.audit(parent, result, report, rng_seed=5)
        assert not verdict.passed
        assert "score-mismatch" in verdict.flags

    def test_degenerate_small_image(self):
        parent = make_image(15, 32, 32)
        result = audit.apply_ops(parent, ())
        verdict = audit.audit(parent, result, DeviationReport(), rng_seed=1)
        assert verdict.degenerate
        assert verdict.patch_size == 32
        assert verdict.passed

    def test_production_mode_randomizes_patch_size(self):
        parent = make_image(16, 200, 200)
        result = audit.apply_ops(parent, ())
        sizes = {
            audit.audit(parent, result, DeviationReport(), rng_seed=s, production=True).patch_size
            for s in range(12)
        }
        assert len(sizes) > 1
        assert all(48 <= s <= 80 for s in sizes)


class TestPatchMissBound:
    def test_matches_empirical_hit_rate(self):
        width = height = 1024
        region = (320, 320, 384, 384)
        p_hit = audit.patch_hit_probability(width, height, region)
        rng = np.random.default_rng(0)
        n = 200_000
        xs = rng.integers(0, width - 64 + 1, size=n)
        ys = rng.integers(0, height - 64 + 1, size=n)
        hits = (
            (xs + 64 > region[0]) & (xs < region[0] + region[2])
            & (ys + 64 > region[1]) & (ys < region[1] + region[3])
        )
        assert p_hit == pytest.approx(hits.mean(), abs=0.005)

    def test_bound_decreases_with_area(self):
        small = audit.patch_miss_bound(1024, 1024, (0, 0, 128, 128))
        large = audit.patch_miss_bound(1024, 1024, (0, 0, 384, 384))
        assert large < small < 1.0


class TestClusterFlags:
    def entry(self, passed, software="editorX", month="2025-11", maker="CANON"):
        return AuditLogEntry(software, maker, month, passed)

    def test_five_failures_same_software_month_cluster(self):
        log = [self.entry(False) for _ in range(5)]
        clusters = audit.cluster_flags(log)
        assert len(clusters) == 1
        assert clusters[0]["failures"] == 5

    def test_four_failures_no_cluster(self):
        assert audit.cluster_flags([self.entry(False) for _ in range(4)]) == []

    def test_spread_over_months_no_cluster(self):
        log = [self.entry(False, month=f"2025-{m:02d}") for m in range(1, 13)]
        assert audit.cluster_flags(log) == []

    def test_passes_do_not_count(self):
        log = [self.entry(True) for _ in range(10)] + [self.entry(False) for _ in range(4)]
        assert audit.cluster_flags(log) == []
