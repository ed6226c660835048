"""Protocol-mandated cryptographic primitives.

Everything here is bit-exact and pure: SHA-256 pixel hashing, keyed
8-byte metadata hashes with per-field domain separation, AES-256-GCM
device-token encryption, and fixed-width (r || s) ECDSA signatures over
secp256k1.  All functions are reentrant and safe to call from any
number of threads.
"""

from __future__ import annotations

import hashlib
import hmac
import re
import secrets

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import AuthenticationFailed, InvalidDomain, InvalidInput

HASH_LEN = 32
METADATA_HASH_LEN = 8
NONCE_LEN = 16
SIGNATURE_LEN = 64
TOKEN_KEY_LEN = 32
TOKEN_IV_LEN = 12
TOKEN_TAG_LEN = 16
# ciphertext(32) || tag(16) || iv(12): fixed so packet sizes stay deterministic
ENCRYPTED_TOKEN_LEN = HASH_LEN + TOKEN_TAG_LEN + TOKEN_IV_LEN

PUBLIC_KEY_LEN = 33  # compressed SEC1 point

# Per-field context prefixes; cross-field isolation even under nonce reuse.
DOMAIN_PREFIXES = {
    "timestamp": b"BM-v1-timestamp:",
    "geolocation": b"BM-v1-geolocation:",
    "owner": b"BM-v1-owner:",
}

_DEVICE_CERT_CONTEXT = b"BM-v1-device-cert:"

_TIMESTAMP_RE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")
_GEO_RE = re.compile(r"^-?\d{1,2}\.\d{5},-?\d{1,3}\.\d{5}$")

_CURVE = ec.SECP256K1()
# Group order of secp256k1; seeds are reduced into [1, n-1].
_CURVE_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_pixels(canonical_buffer: bytes) -> bytes:
    """SHA-256 of a canonical pixel buffer (header + row-major RGB8).

    The caller is responsible for canonical serialization (see
    :meth:`birthmark.wire.PixelImage.canonical_bytes`).
    """
    if not canonical_buffer:
        raise InvalidInput("cannot hash an empty pixel buffer")
    return sha256(canonical_buffer)


def generate_nonce() -> bytes:
    """Fresh 16-byte metadata nonce from the OS CSPRNG.

    Stored in the image sidecar (EXIF stand-in), never on chain.
    """
    return secrets.token_bytes(NONCE_LEN)


def format_geolocation(lat: float, lon: float) -> str:
    """Canonical "lat,lon" text: WGS84 degrees, 5 decimal places."""
    return f"{lat:.5f},{lon:.5f}"


def metadata_hash(domain: str, value: str, nonce: bytes) -> bytes:
    """First 8 bytes of HMAC-SHA256(nonce, domain-prefix || value).

    Timestamps must be month-precision text ("YYYY-MM"); geolocation is
    "lat,lon" with 5 decimals; owner is any non-empty UTF-8 identity.
    """
    prefix = DOMAIN_PREFIXES.get(domain)
    if prefix is None:
        raise InvalidDomain(f"unknown metadata domain {domain!r}")
    if len(nonce) != NONCE_LEN:
        raise InvalidInput(f"nonce must be {NONCE_LEN} bytes, got {len(nonce)}")
    if domain == "timestamp" and not _TIMESTAMP_RE.match(value):
        raise InvalidInput(f"timestamp must be month-precision 'YYYY-MM', got {value!r}")
    if domain == "geolocation" and not _GEO_RE.match(value):
        raise InvalidInput(f"geolocation must be 'lat,lon' with 5 decimals, got {value!r}")
    if domain == "owner" and not value:
        raise InvalidInput("owner identity must be non-empty")
    mac = hmac.new(nonce, prefix + value.encode("utf-8"), hashlib.sha256)
    return mac.digest()[:METADATA_HASH_LEN]


def new_token_key() -> bytes:
    """Fresh 32-byte AES-256 key for a key-table slot."""
    return secrets.token_bytes(TOKEN_KEY_LEN)


def encrypt_token(nuc_hash: bytes, key: bytes) -> bytes:
    """AES-256-GCM of the 32-byte device fingerprint under a table key.

    Output is the fixed 60-byte token: ciphertext(32) || tag(16) || iv(12),
    with a fresh random IV per call.
    """
    if len(nuc_hash) != HASH_LEN:
        raise InvalidInput(f"fingerprint must be {HASH_LEN} bytes")
    if len(key) != TOKEN_KEY_LEN:
        raise InvalidInput(f"token key must be {TOKEN_KEY_LEN} bytes")
    iv = secrets.token_bytes(TOKEN_IV_LEN)
    ct_and_tag = AESGCM(key).encrypt(iv, nuc_hash, None)
    return ct_and_tag + iv


def decrypt_token(token: bytes, key: bytes) -> bytes:
    """Inverse of :func:`encrypt_token`; raises on any tag mismatch."""
    if len(token) != ENCRYPTED_TOKEN_LEN:
        raise InvalidInput(f"token must be {ENCRYPTED_TOKEN_LEN} bytes, got {len(token)}")
    if len(key) != TOKEN_KEY_LEN:
        raise InvalidInput(f"token key must be {TOKEN_KEY_LEN} bytes")
    ct_and_tag, iv = token[: HASH_LEN + TOKEN_TAG_LEN], token[HASH_LEN + TOKEN_TAG_LEN :]
    try:
        return AESGCM(key).decrypt(iv, ct_and_tag, None)
    except InvalidTag as exc:
        raise AuthenticationFailed("token authentication failed") from exc


class SigningKeypair:
    """ECDSA keypair over secp256k1.

    The private half never leaves this object except through
    :meth:`private_scalar_hex`, which exists solely so a role can persist
    its own identity inside its secure boundary (the identity store file).
    """

    def __init__(self, private_key: ec.EllipticCurvePrivateKey):
        self._private = private_key
        self.public_bytes = private_key.public_key().public_bytes(
            encoding=serialization.Encoding.X962,
            format=serialization.PublicFormat.CompressedPoint,
        )

    @classmethod
    def generate(cls) -> "SigningKeypair":
        return cls(ec.generate_private_key(_CURVE))

    @classmethod
    def from_seed(cls, seed: bytes) -> "SigningKeypair":
        """Deterministic keypair from a 32-byte seed (PRNU enrollment path)."""
        if len(seed) != 32:
            raise InvalidInput("keypair seed must be 32 bytes")
        scalar = int.from_bytes(seed, "big") % (_CURVE_ORDER - 1) + 1
        return cls(ec.derive_private_key(scalar, _CURVE))

    @classmethod
    def from_scalar_hex(cls, scalar_hex: str) -> "SigningKeypair":
        return cls(ec.derive_private_key(int(scalar_hex, 16), _CURVE))

    def private_scalar_hex(self) -> str:
        return format(self._private.private_numbers().private_value, "064x")

    def sign(self, message: bytes) -> bytes:
        return sign(message, self)

    def __repr__(self) -> str:  # never leak key material through logs
        return f"SigningKeypair(public={self.public_bytes.hex()[:16]}...)"


def sign(message: bytes, keypair: SigningKeypair) -> bytes:
    """64-byte r || s signature (32-byte big-endian halves, not DER)."""
    if not message:
        raise InvalidInput("cannot sign an empty message")
    der = keypair._private.sign(message, ec.ECDSA(hashes.SHA256()))
    r, s = decode_dss_signature(der)
    return r.to_bytes(32, "big") + s.to_bytes(32, "big")


def verify(message: bytes, signature: bytes, public_bytes: bytes) -> bool:
    """Check a 64-byte signature; malformed inputs return False, never raise."""
    if len(signature) != SIGNATURE_LEN or not message:
        return False
    try:
        public = ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, public_bytes)
        r = int.from_bytes(signature[:32], "big")
        s = int.from_bytes(signature[32:], "big")
        der = encode_dss_signature(r, s)
        public.verify(der, message, ec.ECDSA(hashes.SHA256()))
        return True
    except (InvalidSignature, ValueError):
        return False


def sign_device_attestation(device_public: bytes, ma_keypair: SigningKeypair) -> bytes:
    """MA signature binding a device public key into an attestation."""
    return sign(_DEVICE_CERT_CONTEXT + device_public, ma_keypair)


def verify_device_attestation(device_public: bytes, signature: bytes, ma_public: bytes) -> bool:
    return verify(_DEVICE_CERT_CONTEXT + device_public, signature, ma_public)
