"""Taint ledger: which sensitive atoms has each role ever observed.

Every message delivery is scanned for ground-truth atoms (image hashes,
device fingerprints / plaintext tokens, device serials).  The per-role
observation sets are the executable form of the information-flow
properties: the manufacturer role must never accumulate an image hash,
and submission servers must never accumulate a plaintext fingerprint.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Dict, Iterable, Set, Tuple

ATOM_IMAGE_HASH = "image_hash"
ATOM_NUC_HASH = "nuc_hash"  # plaintext device fingerprint == plaintext token
ATOM_DEVICE_SERIAL = "device_serial"

_PREFIX_LEN = 8


class TaintLedger:
    def __init__(self):
        self._atoms: Dict[str, Set[bytes]] = defaultdict(set)
        self._prefix_index: Dict[bytes, list] = {}
        # role -> {(kind, atom)}
        self.observations: Dict[str, Set[Tuple[str, bytes]]] = defaultdict(set)

    def register_atom(self, kind: str, atom: bytes) -> None:
        if len(atom) < _PREFIX_LEN:
            raise ValueError("atoms shorter than the scan prefix are unsupported")
        if atom in self._atoms[kind]:
            return
        self._atoms[kind].add(atom)
        self._prefix_index.setdefault(atom[:_PREFIX_LEN], []).append((kind, atom))

    def register_atoms(self, kind: str, atoms: Iterable[bytes]) -> None:
        for atom in atoms:
            self.register_atom(kind, atom)

    def observe(self, role: str, payload: bytes) -> None:
        """Scan one delivered payload for registered atoms."""
        index = self._prefix_index
        if not index:
            return
        seen = self.observations[role]
        limit = len(payload) - _PREFIX_LEN + 1
        for i in range(max(limit, 0)):
            hits = index.get(payload[i : i + _PREFIX_LEN])
            if hits is None:
                continue
            for kind, atom in hits:
                if payload[i : i + len(atom)] == atom:
                    seen.add((kind, atom))

    def role_saw(self, role_prefix: str, kind: str) -> Set[bytes]:
        """Atoms of ``kind`` observed by any role whose name starts with the prefix."""
        out: Set[bytes] = set()
        for role, observations in self.observations.items():
            if role.startswith(role_prefix):
                out.update(atom for k, atom in observations if k == kind)
        return out

    def summary(self) -> dict:
        roles = {}
        for role in sorted(self.observations):
            counts: Dict[str, int] = defaultdict(int)
            for kind, _atom in self.observations[role]:
                counts[kind] += 1
            roles[role] = dict(sorted(counts.items()))
        return roles
