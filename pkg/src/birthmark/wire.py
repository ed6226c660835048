"""Canonical byte layouts for every packet and record on the wire.

All integers are little-endian; strings are length-prefixed ASCII.
Field widths reproduce the published byte budgets exactly:

  birthmark record payload   33 B bare, 57 B with metadata, 65 B with
                             parent, 89 B with both
  chain record payload       113 B (parent + metadata + 20-byte ids + u32
                             timestamp); 153 B inside the 40-byte envelope
  manufacturer certificate   144 B + deviation payload (186 B with a
                             one-op deviation report and a 9-char id)
  approval                   170 B with a 9-char server id; a two-approval
                             validation bundle is 350 B
  camera packet              ~411 B for a metadata-on, parent-free capture

Presence of the optional parent hash and metadata block is carried in the
two high bits of the modification-level byte (low bits hold the level), so
every layout decodes in a single pass without changing any field width.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np

from . import crypto
from .errors import DecodeError, InvalidValue

MAGIC_PIXELS = b"BMPX"
MAGIC_PACKET = b"BMPK"
MAGIC_BUNDLE = b"BMVB"
MAGIC_ENVELOPE = b"BMCE"
WIRE_VERSION = 1

PIXEL_HEADER_LEN = 16
ENVELOPE_LEN = 40
ENVELOPE_LINK_LEN = 24
MAX_ID_LEN = 16

# modification-level byte: low nibble = level, high bits = presence flags
_FLAG_PARENT = 0x40
_FLAG_METADATA = 0x80

RECORD_TYPE_CHAIN = 1

# 10-minute posting-timestamp epochs
POSTING_INTERVAL = 600


def posting_epoch(unix_seconds: float, interval: int = POSTING_INTERVAL) -> int:
    """Privacy-rounded posting timestamp: floor(unix_seconds / interval)."""
    return int(unix_seconds // interval)


def _encode_str(value: str, what: str) -> bytes:
    raw = value.encode("ascii")
    if not 1 <= len(raw) <= MAX_ID_LEN * 2 + 1:
        raise InvalidValue(f"{what} must be 1..{MAX_ID_LEN * 2 + 1} ASCII bytes")
    return bytes([len(raw)]) + raw


class _Reader:
    """Cursor over a byte buffer that raises DecodeError with the offset."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError(f"truncated {what}", self.pos)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def string(self, what: str) -> str:
        n = self.u8(what + " length")
        return self.take(n, what).decode("ascii")

    def expect_end(self, what: str) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"trailing bytes after {what}", self.pos)


# ---------------------------------------------------------------------------
# Pixel images
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PixelImage:
    """Raw RGB8 frame. The canonical buffer is the only thing ever hashed."""

    width: int
    height: int
    pixels: bytes  # row-major RGB8, width*height*3 bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidValue("image dimensions must be positive")
        if len(self.pixels) != self.width * self.height * 3:
            raise InvalidValue(
                f"pixel buffer is {len(self.pixels)} bytes, expected "
                f"{self.width * self.height * 3} for {self.width}x{self.height} RGB8"
            )

    def header_bytes(self) -> bytes:
        return (
            MAGIC_PIXELS
            + bytes([WIRE_VERSION])
            + struct.pack("<II", self.width, self.height)
            + b"\x00\x00\x00"
        )

    def canonical_bytes(self) -> bytes:
        """16-byte dimension header followed by the raw pixel rows."""
        return self.header_bytes() + self.pixels

    def image_hash(self) -> bytes:
        # incremental update avoids copying multi-megabyte buffers
        import hashlib

        h = hashlib.sha256()
        h.update(self.header_bytes())
        h.update(self.pixels)
        return h.digest()

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 3)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "PixelImage":
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise InvalidValue("expected HxWx3 uint8 array")
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr.tobytes())

    @classmethod
    def decode(cls, data: bytes) -> "PixelImage":
        r = _Reader(data)
        if r.take(4, "pixel magic") != MAGIC_PIXELS:
            raise DecodeError("bad pixel magic", 0)
        if r.u8("pixel version") != WIRE_VERSION:
            raise DecodeError("unsupported pixel format version", 4)
        width = r.u32("width")
        height = r.u32("height")
        r.take(3, "padding")
        pixels = r.take(width * height * 3, "pixel rows")
        r.expect_end("pixel image")
        return cls(width=width, height=height, pixels=pixels)


def write_bmpx(image: PixelImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(image.canonical_bytes())


def read_bmpx(path) -> PixelImage:
    with open(path, "rb") as fh:
        return PixelImage.decode(fh.read())


# ---------------------------------------------------------------------------
# Birthmark record (the on-chain core)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BirthmarkRecord:
    image_hash: bytes
    modification_level: int
    parent_image_hash: Optional[bytes] = None
    timestamp_hash: Optional[bytes] = None
    geotag_hash: Optional[bytes] = None
    owner_id_hash: Optional[bytes] = None

    def __post_init__(self):
        if len(self.image_hash) != crypto.HASH_LEN:
            raise InvalidValue("image_hash must be 32 bytes")
        if self.modification_level not in (0, 1, 2):
            raise InvalidValue("modification_level must be 0, 1, or 2")
        if self.parent_image_hash is not None and len(self.parent_image_hash) != crypto.HASH_LEN:
            raise InvalidValue("parent_image_hash must be 32 bytes")
        if self.modification_level == 0 and self.parent_image_hash is not None:
            raise InvalidValue("level-0 captures cannot reference a parent")
        if self.modification_level == 2 and self.parent_image_hash is None:
            raise InvalidValue("level-2 records must reference a parent")
        meta = (self.timestamp_hash, self.geotag_hash, self.owner_id_hash)
        present = [m is not None for m in meta]
        if any(present) and not all(present):
            raise InvalidValue("metadata hashes are all-or-none")
        for m in meta:
            if m is not None and len(m) != crypto.METADATA_HASH_LEN:
                raise InvalidValue("metadata hashes must be 8 bytes")

    @property
    def has_metadata(self) -> bool:
        return self.timestamp_hash is not None

    def encode(self) -> bytes:
        level_byte = self.modification_level
        if self.parent_image_hash is not None:
            level_byte |= _FLAG_PARENT
        if self.has_metadata:
            level_byte |= _FLAG_METADATA
        parts = [self.image_hash, bytes([level_byte])]
        if self.parent_image_hash is not None:
            parts.append(self.parent_image_hash)
        if self.has_metadata:
            parts.extend((self.timestamp_hash, self.geotag_hash, self.owner_id_hash))
        return b"".join(parts)

    @classmethod
    def _read(cls, r: _Reader) -> "BirthmarkRecord":
        image_hash = r.take(32, "image_hash")
        level_byte = r.u8("modification_level")
        level = level_byte & 0x0F
        parent = r.take(32, "parent_image_hash") if level_byte & _FLAG_PARENT else None
        ts = geo = owner = None
        if level_byte & _FLAG_METADATA:
            ts = r.take(8, "timestamp_hash")
            geo = r.take(8, "geotag_hash")
            owner = r.take(8, "owner_id_hash")
        try:
            return cls(image_hash, level, parent, ts, geo, owner)
        except InvalidValue as exc:
            raise DecodeError(str(exc), r.pos) from exc

    @classmethod
    def decode(cls, data: bytes) -> "BirthmarkRecord":
        r = _Reader(data)
        record = cls._read(r)
        r.expect_end("birthmark record")
        return record


def record_hash(record: BirthmarkRecord) -> bytes:
    """SHA-256 over the canonical record encoding; binds certificates to it."""
    return crypto.sha256(record.encode())


# ---------------------------------------------------------------------------
# Manufacturer certificate and camera packet
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManufacturerCertificate:
    validator_id: str
    encrypted_token: bytes
    key_table_id: int
    key_index: int
    token_excerpt: bytes  # SHA-256 of encrypted_token; binds token to cert
    deviation_data: bytes  # encoded DeviationReport, empty for raw captures
    record_hash: bytes

    def __post_init__(self):
        if not 1 <= len(self.validator_id) <= MAX_ID_LEN:
            raise InvalidValue("validator_id must be 1..16 ASCII chars")
        if len(self.encrypted_token) != crypto.ENCRYPTED_TOKEN_LEN:
            raise InvalidValue("encrypted_token must be 60 bytes")
        if len(self.token_excerpt) != crypto.HASH_LEN:
            raise InvalidValue("token_excerpt must be 32 bytes")
        if len(self.record_hash) != crypto.HASH_LEN:
            raise InvalidValue("record_hash must be 32 bytes")
        if len(self.deviation_data) > 0xFFFF:
            raise InvalidValue("deviation payload too large")

    def encode(self) -> bytes:
        return b"".join(
            (
                _encode_str(self.validator_id, "validator_id"),
                self.encrypted_token,
                struct.pack("<II", self.key_table_id, self.key_index),
                self.token_excerpt,
                struct.pack("<H", len(self.deviation_data)),
                self.deviation_data,
                self.record_hash,
            )
        )

    @classmethod
    def _read(cls, r: _Reader) -> "ManufacturerCertificate":
        validator_id = r.string("validator_id")
        token = r.take(crypto.ENCRYPTED_TOKEN_LEN, "encrypted_token")
        table_id = r.u32("key_table_id")
        key_index = r.u32("key_index")
        excerpt = r.take(32, "token_excerpt")
        dev_len = r.u16("deviation length")
        deviation = r.take(dev_len, "deviation payload")
        rhash = r.take(32, "record_hash")
        try:
            return cls(validator_id, token, table_id, key_index, excerpt, deviation, rhash)
        except InvalidValue as exc:
            raise DecodeError(str(exc), r.pos) from exc

    @classmethod
    def decode(cls, data: bytes) -> "ManufacturerCertificate":
        r = _Reader(data)
        cert = cls._read(r)
        r.expect_end("manufacturer certificate")
        return cert


@dataclass(frozen=True)
class DeviceCert:
    """MA-signed attestation of a device public key (97 bytes)."""

    device_public: bytes
    ma_signature: bytes

    def __post_init__(self):
        if len(self.device_public) != crypto.PUBLIC_KEY_LEN:
            raise InvalidValue("device public key must be a 33-byte compressed point")
        if len(self.ma_signature) != crypto.SIGNATURE_LEN:
            raise InvalidValue("attestation signature must be 64 bytes")

    def encode(self) -> bytes:
        return self.device_public + self.ma_signature

    @classmethod
    def decode(cls, data: bytes) -> "DeviceCert":
        r = _Reader(data)
        pub = r.take(crypto.PUBLIC_KEY_LEN, "device public key")
        sig = r.take(crypto.SIGNATURE_LEN, "attestation signature")
        r.expect_end("device cert")
        return cls(pub, sig)


@dataclass(frozen=True)
class CameraPacket:
    record: BirthmarkRecord
    certificate: ManufacturerCertificate
    camera_signature: bytes  # signs certificate.encode() with the device key
    device_cert: DeviceCert

    def __post_init__(self):
        if len(self.camera_signature) != crypto.SIGNATURE_LEN:
            raise InvalidValue("camera signature must be 64 bytes")

    def encode(self) -> bytes:
        rec = self.record.encode()
        cert = self.certificate.encode()
        dev = self.device_cert.encode()
        return b"".join(
            (
                MAGIC_PACKET,
                bytes([WIRE_VERSION]),
                struct.pack("<H", len(rec)),
                rec,
                struct.pack("<H", len(cert)),
                cert,
                self.camera_signature,
                struct.pack("<H", len(dev)),
                dev,
            )
        )

    @classmethod
    def decode(cls, data: bytes) -> "CameraPacket":
        r = _Reader(data)
        if r.take(4, "packet magic") != MAGIC_PACKET:
            raise DecodeError("bad packet magic", 0)
        if r.u8("packet version") != WIRE_VERSION:
            raise DecodeError("unsupported packet version", 4)
        rec_len = r.u16("record length")
        record = BirthmarkRecord.decode(r.take(rec_len, "record"))
        cert_len = r.u16("certificate length")
        cert = ManufacturerCertificate.decode(r.take(cert_len, "certificate"))
        sig = r.take(crypto.SIGNATURE_LEN, "camera signature")
        dev_len = r.u16("device cert length")
        dev = DeviceCert.decode(r.take(dev_len, "device cert"))
        r.expect_end("camera packet")
        return cls(record, cert, sig, dev)


# ---------------------------------------------------------------------------
# Approvals (validation data, discarded after finalization)
# ---------------------------------------------------------------------------

def ma_approval_message(rec_hash: bytes, server_id: str) -> bytes:
    """Message the MA signs: binds the approval to exactly one server."""
    return rec_hash + server_id.encode("ascii")


@dataclass(frozen=True)
class Approval:
    server_id: str
    record_hash: bytes
    ma_signature: bytes  # over record_hash || server_id
    server_signature: bytes  # over record_hash

    def __post_init__(self):
        if not 1 <= len(self.server_id) <= MAX_ID_LEN:
            raise InvalidValue("server_id must be 1..16 ASCII chars")
        if len(self.record_hash) != crypto.HASH_LEN:
            raise InvalidValue("record_hash must be 32 bytes")
        for sig in (self.ma_signature, self.server_signature):
            if len(sig) != crypto.SIGNATURE_LEN:
                raise InvalidValue("signatures must be 64 bytes")

    def encode(self) -> bytes:
        return (
            _encode_str(self.server_id, "server_id")
            + self.record_hash
            + self.ma_signature
            + self.server_signature
        )

    @classmethod
    def decode(cls, data: bytes) -> "Approval":
        r = _Reader(data)
        sid = r.string("server_id")
        rhash = r.take(32, "record_hash")
        ma_sig = r.take(64, "ma_signature")
        srv_sig = r.take(64, "server_signature")
        r.expect_end("approval")
        try:
            return cls(sid, rhash, ma_sig, srv_sig)
        except InvalidValue as exc:
            raise DecodeError(str(exc), r.pos) from exc


def encode_validation_bundle(approvals: list) -> bytes:
    """Two-approval admission evidence (350 bytes for two 9-char ids)."""
    parts = [MAGIC_BUNDLE, bytes([WIRE_VERSION]), bytes([len(approvals)])]
    for approval in approvals:
        raw = approval.encode()
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    return b"".join(parts)


def decode_validation_bundle(data: bytes) -> list:
    r = _Reader(data)
    if r.take(4, "bundle magic") != MAGIC_BUNDLE:
        raise DecodeError("bad bundle magic", 0)
    if r.u8("bundle version") != WIRE_VERSION:
        raise DecodeError("unsupported bundle version", 4)
    count = r.u8("approval count")
    approvals = []
    for _ in range(count):
        n = r.u16("approval length")
        approvals.append(Approval.decode(r.take(n, "approval")))
    r.expect_end("validation bundle")
    return approvals


# ---------------------------------------------------------------------------
# Chain records and the storage envelope
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainRecord:
    record: BirthmarkRecord
    posting_server_ids: str  # "idA/idB"
    posting_timestamp: int  # floor(unix_seconds / 600)

    def __post_init__(self):
        ids = self.posting_server_ids.split("/")
        if len(ids) != 2 or not all(1 <= len(i) <= MAX_ID_LEN for i in ids):
            raise InvalidValue("posting_server_ids must be 'idA/idB'")
        if ids[0] == ids[1]:
            raise InvalidValue("posting servers must be distinct")
        if not 0 <= self.posting_timestamp <= 0xFFFFFFFF:
            raise InvalidValue("posting_timestamp must fit u32")

    @property
    def image_hash(self) -> bytes:
        return self.record.image_hash

    def encode(self) -> bytes:
        return (
            self.record.encode()
            + _encode_str(self.posting_server_ids, "posting_server_ids")
            + struct.pack("<I", self.posting_timestamp)
        )

    @classmethod
    def decode(cls, data: bytes) -> "ChainRecord":
        r = _Reader(data)
        record = BirthmarkRecord._read(r)
        ids = r.string("posting_server_ids")
        ts = r.u32("posting_timestamp")
        r.expect_end("chain record")
        try:
            return cls(record, ids, ts)
        except InvalidValue as exc:
            raise DecodeError(str(exc), r.pos) from exc

    def to_json_dict(self) -> dict:
        rec = self.record
        out = {
            "image_hash": rec.image_hash.hex(),
            "modification_level": rec.modification_level,
            "parent_image_hash": rec.parent_image_hash.hex() if rec.parent_image_hash else None,
            "timestamp_hash": rec.timestamp_hash.hex() if rec.timestamp_hash else None,
            "geotag_hash": rec.geotag_hash.hex() if rec.geotag_hash else None,
            "owner_id_hash": rec.owner_id_hash.hex() if rec.owner_id_hash else None,
            "posting_server_ids": self.posting_server_ids,
            "posting_timestamp": self.posting_timestamp,
        }
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "ChainRecord":
        def _opt(key):
            v = data.get(key)
            return bytes.fromhex(v) if v else None

        record = BirthmarkRecord(
            image_hash=bytes.fromhex(data["image_hash"]),
            modification_level=data["modification_level"],
            parent_image_hash=_opt("parent_image_hash"),
            timestamp_hash=_opt("timestamp_hash"),
            geotag_hash=_opt("geotag_hash"),
            owner_id_hash=_opt("owner_id_hash"),
        )
        return cls(record, data["posting_server_ids"], data["posting_timestamp"])


def encode_enveloped(chain_record: ChainRecord, chain_index: int, prev_link: bytes) -> bytes:
    """Fixed 40-byte envelope + payload, as appended to the record log.

    Envelope layout: magic(4) version(1) type(1) payload_len(2, LE)
    chain_index(8, LE) prev_link(24).  The link is the truncated running
    hash of the log, making the log self-verifying and append-only.
    """
    if len(prev_link) != ENVELOPE_LINK_LEN:
        raise InvalidValue("prev_link must be 24 bytes")
    payload = chain_record.encode()
    header = (
        MAGIC_ENVELOPE
        + bytes([WIRE_VERSION, RECORD_TYPE_CHAIN])
        + struct.pack("<H", len(payload))
        + struct.pack("<Q", chain_index)
        + prev_link
    )
    assert len(header) == ENVELOPE_LEN
    return header + payload


def chain_link(prev_link: bytes, payload: bytes) -> bytes:
    """Next 24-byte log link: truncated SHA-256(prev_link || payload)."""
    return crypto.sha256(prev_link + payload)[:ENVELOPE_LINK_LEN]


GENESIS_LINK = bytes(ENVELOPE_LINK_LEN)


def decode_enveloped(data: bytes, offset: int = 0) -> tuple:
    """Parse one enveloped record at ``offset``.

    Returns (chain_record, chain_index, prev_link, next_offset).
    """
    r = _Reader(data)
    r.pos = offset
    if r.take(4, "envelope magic") != MAGIC_ENVELOPE:
        raise DecodeError("bad envelope magic", offset)
    if r.u8("envelope version") != WIRE_VERSION:
        raise DecodeError("unsupported envelope version", offset + 4)
    rtype = r.u8("record type")
    if rtype != RECORD_TYPE_CHAIN:
        raise DecodeError(f"unknown record type {rtype}", offset + 5)
    payload_len = r.u16("payload length")
    chain_index = r.u64("chain index")
    prev_link = r.take(ENVELOPE_LINK_LEN, "prev link")
    payload = r.take(payload_len, "chain record payload")
    return ChainRecord.decode(payload), chain_index, prev_link, r.pos


def iter_log(data: bytes) -> Iterator[tuple]:
    """Yield (chain_record, chain_index, prev_link, offset) for a whole log."""
    offset = 0
    while offset < len(data):
        record, index, link, next_offset = decode_enveloped(data, offset)
        yield record, index, link, offset
        offset = next_offset


# ---------------------------------------------------------------------------
# Transport messages (harness wire contract)
# ---------------------------------------------------------------------------

MSG_SUBMIT = 0x01  # camera -> server: camera packet
MSG_VALIDATE = 0x02  # server -> MA: certificate + requesting server id
MSG_APPROVAL = 0x03  # MA -> server: record_hash + server_id + ma signature
MSG_REJECTION = 0x04  # MA -> server
MSG_RECEIPT = 0x05  # server -> camera
MSG_CHAIN_SUBMIT = 0x06  # server -> validator: record + approval


def encode_submit(packet: CameraPacket) -> bytes:
    raw = packet.encode()
    return bytes([MSG_SUBMIT]) + struct.pack("<H", len(raw)) + raw


def encode_validate(cert: ManufacturerCertificate, server_id: str) -> bytes:
    """Validation request: structurally carries the certificate only.

    There is no field for an image hash or a birthmark record here; the
    manufacturer's entire view of a submission is this message.
    """
    raw = cert.encode()
    return (
        bytes([MSG_VALIDATE])
        + _encode_str(server_id, "server_id")
        + struct.pack("<H", len(raw))
        + raw
    )


def decode_validate(data: bytes) -> tuple:
    r = _Reader(data)
    if r.u8("message tag") != MSG_VALIDATE:
        raise DecodeError("not a VALIDATE message", 0)
    server_id = r.string("server_id")
    n = r.u16("certificate length")
    cert = ManufacturerCertificate.decode(r.take(n, "certificate"))
    r.expect_end("VALIDATE message")
    return cert, server_id


def encode_ma_approval(rec_hash: bytes, server_id: str, ma_signature: bytes) -> bytes:
    return bytes([MSG_APPROVAL]) + _encode_str(server_id, "server_id") + rec_hash + ma_signature


def decode_ma_approval(data: bytes) -> tuple:
    r = _Reader(data)
    if r.u8("message tag") != MSG_APPROVAL:
        raise DecodeError("not an APPROVAL message", 0)
    server_id = r.string("server_id")
    rhash = r.take(32, "record_hash")
    sig = r.take(64, "ma_signature")
    r.expect_end("APPROVAL message")
    return rhash, server_id, sig


def encode_ma_rejection(code: str, detail: str = "") -> bytes:
    return bytes([MSG_REJECTION]) + _encode_str(code, "rejection code") + _encode_str(detail or "-", "detail")


def decode_ma_rejection(data: bytes) -> tuple:
    r = _Reader(data)
    if r.u8("message tag") != MSG_REJECTION:
        raise DecodeError("not a REJECTION message", 0)
    code = r.string("rejection code")
    detail = r.string("detail")
    r.expect_end("REJECTION message")
    return code, detail


def encode_chain_submit(record: BirthmarkRecord, approval: Approval) -> bytes:
    rec = record.encode()
    app = approval.encode()
    return (
        bytes([MSG_CHAIN_SUBMIT])
        + struct.pack("<H", len(rec))
        + rec
        + struct.pack("<H", len(app))
        + app
    )


def decode_chain_submit(data: bytes) -> tuple:
    r = _Reader(data)
    if r.u8("message tag") != MSG_CHAIN_SUBMIT:
        raise DecodeError("not a CHAIN_SUBMIT message", 0)
    n = r.u16("record length")
    record = BirthmarkRecord.decode(r.take(n, "record"))
    n = r.u16("approval length")
    approval = Approval.decode(r.take(n, "approval"))
    r.expect_end("CHAIN_SUBMIT message")
    return record, approval


# ---------------------------------------------------------------------------
# Annotated hex dump (debug CLI)
# ---------------------------------------------------------------------------

def _dump_lines(fields: list) -> list:
    lines = []
    for offset, name, raw in fields:
        shown = raw.hex() if len(raw) <= 20 else raw[:20].hex() + f"... ({len(raw)} B)"
        lines.append(f"{offset:6d}  {name:<28s} {shown}")
    return lines


def dump_annotated(data: bytes) -> str:
    """Best-effort annotated field dump of any known wire structure."""
    if data[:4] == MAGIC_PIXELS:
        img = PixelImage.decode(data)
        fields = [
            (0, "magic", data[:4]),
            (4, "version", data[4:5]),
            (5, "width (u32 le)", data[5:9]),
            (9, "height (u32 le)", data[9:13]),
            (13, "pad", data[13:16]),
            (16, "pixels", data[16:]),
        ]
        head = f"pixel image {img.width}x{img.height} ({len(data)} bytes)"
        return "\n".join([head] + _dump_lines(fields))
    if data[:4] == MAGIC_PACKET:
        packet = CameraPacket.decode(data)
        rec = packet.record.encode()
        cert = packet.certificate.encode()
        dev = packet.device_cert.encode()
        pos = 5
        fields = [(0, "magic", data[:4]), (4, "version", data[4:5])]
        fields.append((pos, "record length (u16 le)", data[pos : pos + 2]))
        pos += 2
        fields.append((pos, f"record (level {packet.record.modification_level})", rec))
        pos += len(rec)
        fields.append((pos, "certificate length (u16 le)", data[pos : pos + 2]))
        pos += 2
        fields.append((pos, f"certificate [{packet.certificate.validator_id}]", cert))
        pos += len(cert)
        fields.append((pos, "camera signature", data[pos : pos + 64]))
        pos += 64
        fields.append((pos, "device cert length (u16 le)", data[pos : pos + 2]))
        pos += 2
        fields.append((pos, "device cert", dev))
        head = f"camera packet ({len(data)} bytes)"
        return "\n".join([head] + _dump_lines(fields))
    if data[:4] == MAGIC_BUNDLE:
        approvals = decode_validation_bundle(data)
        lines = [f"validation bundle ({len(data)} bytes, {len(approvals)} approvals)"]
        pos = 6
        for approval in approvals:
            raw = approval.encode()
            lines.extend(
                _dump_lines(
                    [
                        (pos, "approval length (u16 le)", data[pos : pos + 2]),
                        (pos + 2, f"approval [{approval.server_id}]", raw),
                    ]
                )
            )
            pos += 2 + len(raw)
        return "\n".join(lines)
    if data[:4] == MAGIC_ENVELOPE:
        lines = [f"chain record log ({len(data)} bytes)"]
        for record, index, link, offset in iter_log(data):
            lines.append(
                f"{offset:6d}  record #{index}  image={record.image_hash.hex()[:16]}... "
                f"level={record.record.modification_level} ids={record.posting_server_ids} "
                f"epoch={record.posting_timestamp}"
            )
        return "\n".join(lines)
    raise DecodeError("unrecognized wire structure (unknown magic)", 0)
