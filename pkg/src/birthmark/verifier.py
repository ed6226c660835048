"""Public verification: hash a local image, ask any validator, report.

No credentials are sent and nothing but the pixel hash leaves the
machine.  Metadata verification is optional and requires the sidecar
nonce; a stripped sidecar changes nothing about the authenticity verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from . import crypto, wire
from .chain.rpc import rpc_call
from .errors import BirthmarkError

EXIT_FOUND = 0
EXIT_NOT_FOUND = 1
EXIT_ERROR = 2

META_MATCH = "match"
META_MISMATCH = "mismatch"
META_CANNOT_VERIFY = "cannot-verify"


@dataclass
class VerifyReport:
    image_hash: bytes
    status: str  # found / not_found / pruned
    record: Optional[dict] = None
    chain: List[dict] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_FOUND if self.status == "found" else EXIT_NOT_FOUND

    def to_json_dict(self) -> dict:
        return {
            "image_hash": self.image_hash.hex(),
            "status": self.status,
            "record": self.record,
            "custody_chain": self.chain,
            "metadata": self.metadata,
        }

    def to_text(self) -> str:
        lines = [f"image hash: {self.image_hash.hex()}"]
        if self.status == "found":
            record = self.record or {}
            lines.append("AUTHENTICATED")
            lines.append(f"  modification level: {record.get('modification_level')}")
            lines.append(f"  posting servers:    {record.get('posting_server_ids')}")
            lines.append(f"  posting epoch:      {record.get('posting_timestamp')} (10-minute bins)")
            parent = record.get("parent_image_hash")
            lines.append(f"  parent image:       {parent or 'none (original capture)'}")
            if self.chain:
                lines.append(f"  custody chain:      {len(self.chain)} record(s), root to leaf")
                for i, entry in enumerate(self.chain):
                    lines.append(
                        f"    [{i}] level {entry['modification_level']} {entry['image_hash'][:16]}..."
                    )
        elif self.status == "pruned":
            lines.append("PRUNED ON THIS NODE - query a cold (archive) node")
        else:
            lines.append("NOT FOUND")
            lines.append("  (no record; recompression or any pixel change produces a new hash)")
        for domain, verdict in self.metadata.items():
            lines.append(f"  metadata {domain}: {verdict}")
        return "\n".join(lines) + "\n"


def verify_image(image: wire.PixelImage, node_url: str, want_chain: bool = False) -> VerifyReport:
    """Hash locally, query the node, and assemble the report."""
    image_hash = crypto.hash_pixels(image.canonical_bytes())
    result = rpc_call(node_url, "birthmark_lookup", [image_hash.hex()])
    report = VerifyReport(image_hash=image_hash, status=result["status"], record=result.get("record"))
    if want_chain and report.status == "found":
        chain_result = rpc_call(node_url, "birthmark_chain", [image_hash.hex()])
        report.chain = chain_result.get("chain", [])
    return report


def verify_file(path, node_url: str, want_chain: bool = False) -> VerifyReport:
    return verify_image(wire.read_bmpx(path), node_url, want_chain=want_chain)


def verify_metadata(
    record: dict,
    nonce: Optional[bytes],
    claims: Dict[str, str],
) -> Dict[str, str]:
    """Recompute each claimed metadata hash and compare against the record.

    Returns per-domain verdicts: match / mismatch / cannot-verify (the
    latter when the nonce or the record-side hash is absent).
    """
    field_map = {
        "timestamp": "timestamp_hash",
        "geolocation": "geotag_hash",
        "owner": "owner_id_hash",
    }
    verdicts: Dict[str, str] = {}
    for domain, claim in claims.items():
        stored_hex = record.get(field_map[domain])
        if nonce is None or len(nonce) != crypto.NONCE_LEN or stored_hex is None:
            verdicts[domain] = META_CANNOT_VERIFY
            continue
        try:
            recomputed = crypto.metadata_hash(domain, claim, nonce)
        except BirthmarkError:
            verdicts[domain] = META_MISMATCH
            continue
        verdicts[domain] = META_MATCH if recomputed.hex() == stored_hex else META_MISMATCH
    return verdicts


def read_nonce_sidecar(path) -> bytes:
    """Sidecar format: 32 hex chars (16 bytes), optional trailing newline."""
    text = Path(path).read_text().strip()
    nonce = bytes.fromhex(text)
    if len(nonce) != crypto.NONCE_LEN:
        raise BirthmarkError(f"sidecar nonce must be {crypto.NONCE_LEN} bytes")
    return nonce


def write_nonce_sidecar(nonce: bytes, image_path) -> Path:
    path = Path(str(image_path) + ".nonce")
    path.write_text(nonce.hex() + "\n")
    return path
