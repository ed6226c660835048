"""Birthmark: hardware-rooted, privacy-preserving photo authentication.

Camera agents produce signed authentication packets bound to sensor
fingerprints; manufacturer authorities confirm device legitimacy without
ever seeing image content; dual submission servers co-approve records; a
simulated consortium chain finalizes compact records; anyone verifies by
pixel hash.  The adversary harness executes the full attack matrix.
"""

__version__ = "0.1.0"

from . import audit, authority, camera, chain, crypto, registry, server, wire

__all__ = [
    "audit",
    "authority",
    "camera",
    "chain",
    "crypto",
    "registry",
    "server",
    "wire",
    "__version__",
]
