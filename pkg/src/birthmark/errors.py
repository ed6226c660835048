"""Exception types shared across the protocol stack."""


class BirthmarkError(Exception):
    """Base class for all protocol errors."""


class InvalidInput(BirthmarkError):
    """Input violates an operation precondition (empty buffer, bad text form, ...)."""


class InvalidDomain(BirthmarkError):
    """Unknown metadata domain passed to the keyed metadata hash."""


class InvalidValue(BirthmarkError):
    """A value violates its type invariants and cannot be encoded."""


class InvalidOp(BirthmarkError):
    """A declared image operation is malformed (out-of-bounds crop, ...)."""


class DecodeError(BirthmarkError):
    """Byte stream does not parse as the expected wire structure.

    ``offset`` is the byte position at which decoding failed.
    """

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class AuthenticationFailed(BirthmarkError):
    """AEAD tag mismatch: ciphertext was tampered with or the key is wrong."""


class NotProvisioned(BirthmarkError):
    """Camera has no key-table slot assignment and cannot build certificates."""


class InsufficientFrames(BirthmarkError):
    """PRNU enrollment requires the full calibration frame set."""


class BrokenChain(BirthmarkError):
    """Custody chain references a parent record that was never registered."""

    def __init__(self, at_hash: bytes):
        super().__init__(f"parent record missing for {at_hash.hex()[:16]}...")
        self.at_hash = at_hash


class CorruptChain(BirthmarkError):
    """Custody chain contains a parent-hash cycle."""
