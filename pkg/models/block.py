"""
models/block.py
---------------
Bloc simplifie : en-tete de 76 octets + corps opaque.
L'identite du bloc est le double SHA-256 de l'en-tete ; la preuve de travail
est verifiee contre une cible numerique (encodee en "bits" compacts).
"""

import hashlib
import struct
from dataclasses import dataclass
from typing import Optional

HEADER_FORMAT = ">32s32sIII"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
GENESIS_HASH = bytes(32)
MAX_NONCE = 2 ** 32 - 1


def double_sha256(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def bits_from_target(target: int) -> int:
    """Encode une cible au format compact (mantisse 3 octets, exposant 1 octet)."""
    size = (target.bit_length() + 7) // 8
    if size <= 3:
        mantissa = target << (8 * (3 - size))
    else:
        mantissa = target >> (8 * (size - 3))
    if mantissa & 0x00800000:
        mantissa >>= 8
        size += 1
    return (size << 24) | mantissa


def target_from_bits(bits: int) -> int:
    """Decode une cible au format compact."""
    size = bits >> 24
    mantissa = bits & 0x007FFFFF
    if size <= 3:
        return mantissa >> (8 * (3 - size))
    return mantissa << (8 * (size - 3))


@dataclass(frozen=True)
class Block:
    """
    Bloc Bitcoin simplifie.

    Attributs :
        prev_hash   : hash du bloc parent (32 octets)
        merkle_root : double SHA-256 du corps
        nonce       : compteur de preuve de travail
        timestamp   : secondes depuis l'epoque
        bits        : cible de difficulte encodee
        body        : contenu opaque
    """
    prev_hash: bytes
    merkle_root: bytes
    nonce: int
    timestamp: int
    bits: int
    body: bytes = b""

    @property
    def header(self) -> bytes:
        return struct.pack(HEADER_FORMAT, self.prev_hash, self.merkle_root,
                           self.nonce, self.timestamp, self.bits)

    @property
    def hash(self) -> bytes:
        return double_sha256(self.header)

    @property
    def hash_value(self) -> int:
        """Valeur numerique du hash (ordre petit-boutiste, comme Bitcoin)."""
        return int.from_bytes(self.hash, "little")

    @property
    def size(self) -> int:
        return HEADER_SIZE + len(self.body)

    def to_bytes(self) -> bytes:
        return self.header + self.body

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        if len(data) < HEADER_SIZE:
            raise ValueError(f"bloc trop court ({len(data)} octets)")
        prev_hash, merkle_root, nonce, timestamp, bits = struct.unpack(
            HEADER_FORMAT, data[:HEADER_SIZE])
        return cls(prev_hash, merkle_root, nonce, timestamp, bits, data[HEADER_SIZE:])

    def short_hash(self) -> str:
        return self.hash.hex()[:12]

    def __repr__(self):
        return f"Block({self.short_hash()}, {self.size} octets)"


def mine_block(prev_hash: bytes, body: bytes, target: int, timestamp: int = 0,
               start_nonce: int = 0) -> Optional[Block]:
    """
    Cherche un nonce tel que hash(en-tete) <= target.

    Args:
        prev_hash: Hash du parent.
        body: Corps du bloc.
        target: Cible numerique (ex. 2**248 pour les tests).
        timestamp: Horodatage de l'en-tete.
        start_nonce: Premier nonce essaye.

    Returns:
        Le bloc mine, ou None si l'espace des nonces est epuise.
    """
    merkle_root = double_sha256(body)
    bits = bits_from_target(target)
    for nonce in range(start_nonce, MAX_NONCE + 1):
        block = Block(prev_hash, merkle_root, nonce, timestamp, bits, body)
        if block.hash_value <= target:
            return block
    return None
