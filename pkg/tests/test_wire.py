"""Wire codec: byte budgets, round trips, injectivity."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birthmark import audit, crypto, wire
from birthmark.errors import DecodeError, InvalidValue

H = crypto.sha256(b"image")
P = crypto.sha256(b"parent")
M8 = bytes(8)
KEY = bytes(range(32))


def _meta(tag: bytes):
    return (tag * 8)[:8]


def make_record(parent=False, metadata=True, level=None):
    if level is None:
        level = 1 if parent else 0
    return wire.BirthmarkRecord(
        image_hash=H,
        modification_level=level,
        parent_image_hash=P if parent else None,
        timestamp_hash=_meta(b"\x01") if metadata else None,
        geotag_hash=_meta(b"\x02") if metadata else None,
        owner_id_hash=_meta(b"\x03") if metadata else None,
    )


def make_certificate(record, deviation=b"", validator_id="CANON_001"):
    token = crypto.encrypt_token(crypto.sha256(b"nuc"), KEY)
    return wire.ManufacturerCertificate(
        validator_id=validator_id,
        encrypted_token=token,
        key_table_id=0,
        key_index=0,
        token_excerpt=crypto.sha256(token),
        deviation_data=deviation,
        record_hash=wire.record_hash(record),
    )


class TestPixelImage:
    def test_header_is_16_bytes(self):
        img = wire.PixelImage(2, 3, bytes(18))
        assert len(img.header_bytes()) == 16
        assert img.canonical_bytes()[:4] == b"BMPX"

    def test_round_trip(self):
        img = wire.PixelImage(3, 2, bytes(range(18)))
        assert wire.PixelImage.decode(img.canonical_bytes()) == img

    def test_wrong_buffer_size(self):
        with pytest.raises(InvalidValue):
            wire.PixelImage(2, 2, bytes(5))

    def test_bmpx_file_round_trip(self, tmp_path):
        img = wire.PixelImage(4, 4, bytes(48))
        path = tmp_path / "img.bmpx"
        wire.write_bmpx(img, path)
        assert wire.read_bmpx(path) == img


class TestRecordSizes:
    def test_payload_sizes_match_figure_budget(self):
        # 32 + 1 [+32 parent] [+24 metadata]
        assert len(make_record(parent=False, metadata=False).encode()) == 33
        assert len(make_record(parent=False, metadata=True).encode()) == 57
        assert len(make_record(parent=True, metadata=False).encode()) == 65
        assert len(make_record(parent=True, metadata=True).encode()) == 89

    def test_chain_record_113_and_153(self):
        record = make_record(parent=True, metadata=True, level=2)
        chain_record = wire.ChainRecord(record, "node-eu-1/node-us-3", 2940324)
        payload = chain_record.encode()
        assert len(payload) == 113
        enveloped = wire.encode_enveloped(chain_record, 0, wire.GENESIS_LINK)
        assert len(enveloped) == 113 + 40 == 153

    def test_certificate_and_packet_budgets(self):
        record = make_record(parent=False, metadata=True, level=1)
        report = audit.DeviationReport(
            operations=(audit.DeclaredOp.exposure(1.5),), reported_score=0.0
        )
        cert = make_certificate(record, deviation=report.encode())
        assert len(cert.encode()) == 186

        device = crypto.SigningKeypair.generate()
        ma = crypto.SigningKeypair.generate()
        packet = wire.CameraPacket(
            record=record,
            certificate=cert,
            camera_signature=crypto.sign(cert.encode(), device),
            device_cert=wire.DeviceCert(
                device.public_bytes,
                crypto.sign_device_attestation(device.public_bytes, ma),
            ),
        )
        assert 405 <= len(packet.encode()) <= 420

    def test_validation_bundle_350(self):
        record = make_record()
        rhash = wire.record_hash(record)
        approvals = [
            wire.Approval("node-eu-1", rhash, b"\x01" * 64, b"\x02" * 64),
            wire.Approval("node-us-3", rhash, b"\x03" * 64, b"\x04" * 64),
        ]
        bundle = wire.encode_validation_bundle(approvals)
        assert 340 <= len(bundle) <= 360
        assert len(bundle) == 350
        assert wire.decode_validation_bundle(bundle) == approvals

    def test_approval_encoding(self):
        approval = wire.Approval("node-eu-1", H, b"\x01" * 64, b"\x02" * 64)
        raw = approval.encode()
        assert len(raw) == 1 + 9 + 32 + 64 + 64 == 170
        assert wire.Approval.decode(raw) == approval


class TestRecordHash:
    def test_level_changes_hash(self):
        base = make_record(parent=True, metadata=True, level=1)
        other = wire.BirthmarkRecord(
            base.image_hash, 2, base.parent_image_hash,
            base.timestamp_hash, base.geotag_hash, base.owner_id_hash,
        )
        assert wire.record_hash(base) != wire.record_hash(other)

    def test_matches_independent_sha256_of_dumped_bytes(self):
        import hashlib

        record = make_record()
        assert wire.record_hash(record) == hashlib.sha256(record.encode()).digest()

    def test_idempotent(self):
        record = make_record(parent=True)
        assert wire.record_hash(record) == wire.record_hash(record)


class TestRecordInvariants:
    def test_level_0_cannot_have_parent(self):
        with pytest.raises(InvalidValue):
            wire.BirthmarkRecord(H, 0, parent_image_hash=P)

    def test_level_2_requires_parent(self):
        with pytest.raises(InvalidValue):
            wire.BirthmarkRecord(H, 2)

    def test_metadata_all_or_none(self):
        with pytest.raises(InvalidValue):
            wire.BirthmarkRecord(H, 0, timestamp_hash=M8)

    def test_bad_level(self):
        with pytest.raises(InvalidValue):
            wire.BirthmarkRecord(H, 3)

    def test_truncated_decode_reports_offset(self):
        raw = make_record(parent=True, metadata=True).encode()
        with pytest.raises(DecodeError) as err:
            wire.BirthmarkRecord.decode(raw[:40])
        assert err.value.offset <= 40

    def test_trailing_bytes_rejected(self):
        raw = make_record().encode()
        with pytest.raises(DecodeError):
            wire.BirthmarkRecord.decode(raw + b"\x00")


image_hashes = st.binary(min_size=32, max_size=32)
meta_hashes = st.one_of(st.none(), st.binary(min_size=8, max_size=8))


@st.composite
def records(draw):
    level = draw(st.sampled_from([0, 1, 2]))
    parent = draw(image_hashes) if level == 2 or (level == 1 and draw(st.booleans())) else None
    meta = draw(st.booleans())
    ts = draw(st.binary(min_size=8, max_size=8)) if meta else None
    geo = draw(st.binary(min_size=8, max_size=8)) if meta else None
    owner = draw(st.binary(min_size=8, max_size=8)) if meta else None
    return wire.BirthmarkRecord(draw(image_hashes), level, parent, ts, geo, owner)


@st.composite
def chain_records(draw):
    record = draw(records())
    id_a = draw(st.text(alphabet="abcdefgh-0123456789", min_size=1, max_size=16))
    id_b = draw(st.text(alphabet="ijklmnop-0123456789", min_size=1, max_size=16))
    if id_a == id_b:
        id_b = id_b + "x" if len(id_b) < 16 else "peer"
    ts = draw(st.integers(min_value=0, max_value=0xFFFFFFFF))
    return wire.ChainRecord(record, f"{id_a}/{id_b}", ts)


class TestRoundTripProperties:
    @settings(max_examples=300)
    @given(records())
    def test_record_round_trip(self, record):
        assert wire.BirthmarkRecord.decode(record.encode()) == record

    @settings(max_examples=200)
    @given(chain_records())
    def test_chain_record_round_trip(self, chain_record):
        assert wire.ChainRecord.decode(chain_record.encode()) == chain_record

    @settings(max_examples=100)
    @given(records(), records())
    def test_injectivity(self, a, b):
        if a != b:
            assert a.encode() != b.encode()

    @settings(max_examples=100)
    @given(chain_records())
    def test_json_round_trip(self, chain_record):
        assert wire.ChainRecord.from_json_dict(chain_record.to_json_dict()) == chain_record


class TestEnvelope:
    def test_posting_epoch_alignment(self):
        epoch = wire.posting_epoch(1764194400)
        assert (epoch * 600) % 600 == 0
        assert epoch * 600 <= 1764194400 < (epoch + 1) * 600

    def test_log_iteration_and_links(self):
        record = make_record(parent=True, metadata=True, level=2)
        cr1 = wire.ChainRecord(record, "node-eu-1/node-us-3", 100)
        cr2 = wire.ChainRecord(make_record(), "node-ap-2/node-eu-1", 101)
        link0 = wire.GENESIS_LINK
        blob1 = wire.encode_enveloped(cr1, 0, link0)
        link1 = wire.chain_link(link0, cr1.encode())
        blob2 = wire.encode_enveloped(cr2, 1, link1)
        log = blob1 + blob2
        entries = list(wire.iter_log(log))
        assert [e[0] for e in entries] == [cr1, cr2]
        assert entries[1][2] == link1

    def test_same_server_ids_rejected(self):
        with pytest.raises(InvalidValue):
            wire.ChainRecord(make_record(), "node-eu-1/node-eu-1", 5)


class TestMessages:
    def test_validate_message_round_trip(self):
        cert = make_certificate(make_record())
        raw = wire.encode_validate(cert, "node-eu-1")
        decoded, server_id = wire.decode_validate(raw)
        assert decoded == cert
        assert server_id == "node-eu-1"

    def test_ma_approval_round_trip(self):
        raw = wire.encode_ma_approval(H, "node-eu-1", b"\x07" * 64)
        rhash, sid, sig = wire.decode_ma_approval(raw)
        assert (rhash, sid, sig) == (H, "node-eu-1", b"\x07" * 64)

    def test_rejection_round_trip(self):
        raw = wire.encode_ma_rejection("Revoked", "fingerprint revoked")
        assert wire.decode_ma_rejection(raw) == ("Revoked", "fingerprint revoked")

    def test_chain_submit_round_trip(self):
        record = make_record()
        approval = wire.Approval("node-eu-1", wire.record_hash(record), b"\x01" * 64, b"\x02" * 64)
        raw = wire.encode_chain_submit(record, approval)
        rec2, app2 = wire.decode_chain_submit(raw)
        assert (rec2, app2) == (record, approval)


class TestDump:
    def test_dump_packet(self):
        record = make_record()
        cert = make_certificate(record)
        device = crypto.SigningKeypair.generate()
        ma = crypto.SigningKeypair.generate()
        packet = wire.CameraPacket(
            record, cert, crypto.sign(cert.encode(), device),
            wire.DeviceCert(device.public_bytes, crypto.sign_device_attestation(device.public_bytes, ma)),
        )
        text = wire.dump_annotated(packet.encode())
        assert "camera packet" in text
        assert "CANON_001" in text

    def test_dump_unknown_magic(self):
        with pytest.raises(DecodeError):
            wire.dump_annotated(b"XXXX????")
