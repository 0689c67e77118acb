"""
relay/wire.py
-------------
Format binaire des messages UDP echanges entre clients et relais.

Chaque datagramme commence par un en-tete de 3 octets (version, type,
drapeaux), suivi d'une charge propre au type. Tous les entiers sont
gros-boutistes.

    SYN     0x01  (vide)
    SYNACK  0x02  secret u32
    ACK     0x03  secret u32
    NCONN   0x04  ipv4 4o + port u16
    CTR     0x05  (vide)
    ADV     0x06  hash 32o
    INV     0x07  hash 32o + seg_count u16
    GET_SEG 0x08  hash 32o + seg_id u16
    BLK     0x09  hash 32o + seg_id u16 + seg_count u16 + payload_len u16
                  + payload + cached_sum u16 (si drapeau bit0)
    UPD     0x0A  hash 32o + seg_count u16
"""

import ipaddress
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Union

from models.errors import DecodeError, DecodeFailure
from relay.checksum import ones_sum

WIRE_VERSION = 1
HEADER = struct.Struct(">BBB")
SEGMENT_SIZE = 1024
HASH_SIZE = 32
FLAG_CACHED_SUM = 0x01


class Kind(IntEnum):
    SYN = 0x01
    SYNACK = 0x02
    ACK = 0x03
    NCONN = 0x04
    CTR = 0x05
    ADV = 0x06
    INV = 0x07
    GET_SEG = 0x08
    BLK = 0x09
    UPD = 0x0A


def _check_hash(block_hash: bytes):
    if not isinstance(block_hash, (bytes, bytearray)) or len(block_hash) != HASH_SIZE:
        raise ValueError(f"hash de {HASH_SIZE} octets attendu")


def _check_u16(name: str, value: int):
    if not 0 <= value <= 0xFFFF:
        raise ValueError(f"{name} hors de l'intervalle u16 : {value}")


# =====================================================================
# MESSAGES
# =====================================================================

@dataclass(frozen=True)
class Syn:
    kind = Kind.SYN


@dataclass(frozen=True)
class Ctr:
    kind = Kind.CTR


@dataclass(frozen=True)
class SynAck:
    secret: int
    kind = Kind.SYNACK

    def __post_init__(self):
        if not 0 <= self.secret <= 0xFFFFFFFF:
            raise ValueError(f"secret hors u32 : {self.secret}")


@dataclass(frozen=True)
class Ack:
    secret: int
    kind = Kind.ACK

    def __post_init__(self):
        if not 0 <= self.secret <= 0xFFFFFFFF:
            raise ValueError(f"secret hors u32 : {self.secret}")


@dataclass(frozen=True)
class NConn:
    """Notification switch -> controleur : un client vient de terminer la poignee de main."""
    ip: str
    port: int
    kind = Kind.NCONN

    def __post_init__(self):
        ipaddress.IPv4Address(self.ip)
        _check_u16("port", self.port)


@dataclass(frozen=True)
class Adv:
    block_hash: bytes
    kind = Kind.ADV

    def __post_init__(self):
        _check_hash(self.block_hash)


@dataclass(frozen=True)
class Inv:
    block_hash: bytes
    seg_count: int
    kind = Kind.INV

    def __post_init__(self):
        _check_hash(self.block_hash)
        _check_u16("seg_count", self.seg_count)


@dataclass(frozen=True)
class Upd:
    block_hash: bytes
    seg_count: int
    kind = Kind.UPD

    def __post_init__(self):
        _check_hash(self.block_hash)
        _check_u16("seg_count", self.seg_count)


@dataclass(frozen=True)
class GetSeg:
    block_hash: bytes
    seg_id: int
    kind = Kind.GET_SEG

    def __post_init__(self):
        _check_hash(self.block_hash)
        _check_u16("seg_id", self.seg_id)


@dataclass(frozen=True)
class Blk:
    """
    Segment de bloc.

    Attributs :
        block_hash : identite du bloc
        seg_id     : indice du segment (< seg_count)
        seg_count  : nombre total de segments
        payload    : octets du segment (<= SEGMENT_SIZE)
        cached_sum : somme en complement a un de payload, presente
                     uniquement sur le chemin controleur -> switch
    """
    block_hash: bytes
    seg_id: int
    seg_count: int
    payload: bytes
    cached_sum: Optional[int] = None
    kind = Kind.BLK

    def __post_init__(self):
        _check_hash(self.block_hash)
        _check_u16("seg_count", self.seg_count)
        if not 0 <= self.seg_id < self.seg_count:
            raise ValueError(f"seg_id {self.seg_id} hors de [0, {self.seg_count})")
        if len(self.payload) > SEGMENT_SIZE:
            raise ValueError(f"segment de {len(self.payload)} octets > {SEGMENT_SIZE}")
        if self.cached_sum is not None:
            _check_u16("cached_sum", self.cached_sum)

    @property
    def flags(self) -> int:
        return FLAG_CACHED_SUM if self.cached_sum is not None else 0

    def header_bytes(self) -> bytes:
        """Octets du message qui precedent la charge utile (en-tete commun inclus)."""
        return (HEADER.pack(WIRE_VERSION, self.kind, 0)
                + _BLK_FIELDS.pack(self.block_hash, self.seg_id, self.seg_count, len(self.payload)))

    def without_sum(self) -> "Blk":
        return Blk(self.block_hash, self.seg_id, self.seg_count, self.payload)

    def __repr__(self):
        return f"Blk({self.block_hash[:4].hex()}.., {self.seg_id}/{self.seg_count}, {len(self.payload)}o)"


Message = Union[Syn, SynAck, Ack, NConn, Ctr, Adv, Inv, GetSeg, Blk, Upd]


@dataclass(frozen=True)
class Segment:
    """Segment stocke dans la memoire de blocs du switch."""
    index: int
    data: bytes
    cached_sum: int

    @classmethod
    def from_bytes(cls, index: int, data: bytes) -> "Segment":
        return cls(index, bytes(data), ones_sum(data))

    def is_valid(self) -> bool:
        return ones_sum(self.data) == self.cached_sum


# =====================================================================
# CODEC
# =====================================================================

_U32 = struct.Struct(">I")
_NCONN = struct.Struct(">4sH")
_HASH = struct.Struct(">32s")
_HASH_U16 = struct.Struct(">32sH")
_BLK_FIELDS = struct.Struct(">32sHHH")
_U16 = struct.Struct(">H")


def encode(message: Message) -> bytes:
    """Serialise un message selon la table du module."""
    kind = message.kind
    flags = message.flags if kind == Kind.BLK else 0
    head = HEADER.pack(WIRE_VERSION, kind, flags)

    if kind in (Kind.SYN, Kind.CTR):
        body = b""
    elif kind in (Kind.SYNACK, Kind.ACK):
        body = _U32.pack(message.secret)
    elif kind == Kind.NCONN:
        body = _NCONN.pack(ipaddress.IPv4Address(message.ip).packed, message.port)
    elif kind == Kind.ADV:
        body = _HASH.pack(message.block_hash)
    elif kind in (Kind.INV, Kind.UPD):
        body = _HASH_U16.pack(message.block_hash, message.seg_count)
    elif kind == Kind.GET_SEG:
        body = _HASH_U16.pack(message.block_hash, message.seg_id)
    else:
        body = (_BLK_FIELDS.pack(message.block_hash, message.seg_id, message.seg_count, len(message.payload))
                + message.payload)
        if message.cached_sum is not None:
            body += _U16.pack(message.cached_sum)
    return head + body


def _take(data: bytes, offset: int, fmt: struct.Struct):
    if len(data) < offset + fmt.size:
        raise DecodeError(DecodeFailure.TRUNCATED, f"{len(data)} octets, {offset + fmt.size} attendus")
    return fmt.unpack_from(data, offset), offset + fmt.size


def decode(data: bytes) -> Message:
    """
    Decode un datagramme.

    Raises:
        DecodeError avec la raison du rejet (type inconnu, tronque,
        drapeaux invalides, version, octets en trop, champ invalide).
    """
    data = bytes(data)
    if len(data) < HEADER.size:
        raise DecodeError(DecodeFailure.TRUNCATED, f"{len(data)} octets")
    version, raw_kind, flags = HEADER.unpack_from(data)
    if version != WIRE_VERSION:
        raise DecodeError(DecodeFailure.BAD_VERSION, f"version {version}")
    try:
        kind = Kind(raw_kind)
    except ValueError:
        raise DecodeError(DecodeFailure.UNKNOWN_KIND, f"type 0x{raw_kind:02x}") from None
    allowed = FLAG_CACHED_SUM if kind == Kind.BLK else 0
    if flags & ~allowed:
        raise DecodeError(DecodeFailure.BAD_FLAGS, f"drapeaux 0x{flags:02x} pour {kind.name}")

    offset = HEADER.size
    try:
        if kind == Kind.SYN:
            message = Syn()
        elif kind == Kind.CTR:
            message = Ctr()
        elif kind in (Kind.SYNACK, Kind.ACK):
            (secret,), offset = _take(data, offset, _U32)
            message = SynAck(secret) if kind == Kind.SYNACK else Ack(secret)
        elif kind == Kind.NCONN:
            (packed_ip, port), offset = _take(data, offset, _NCONN)
            message = NConn(str(ipaddress.IPv4Address(packed_ip)), port)
        elif kind == Kind.ADV:
            (block_hash,), offset = _take(data, offset, _HASH)
            message = Adv(block_hash)
        elif kind in (Kind.INV, Kind.UPD, Kind.GET_SEG):
            (block_hash, value), offset = _take(data, offset, _HASH_U16)
            cls = {Kind.INV: Inv, Kind.UPD: Upd, Kind.GET_SEG: GetSeg}[kind]
            message = cls(block_hash, value)
        else:
            (block_hash, seg_id, seg_count, length), offset = _take(data, offset, _BLK_FIELDS)
            if len(data) < offset + length:
                raise DecodeError(DecodeFailure.TRUNCATED, f"charge de {length} octets incomplete")
            payload = data[offset:offset + length]
            offset += length
            cached_sum = None
            if flags & FLAG_CACHED_SUM:
                (cached_sum,), offset = _take(data, offset, _U16)
            message = Blk(block_hash, seg_id, seg_count, payload, cached_sum)
    except ValueError as exc:
        raise DecodeError(DecodeFailure.INVALID_FIELD, str(exc)) from None

    if offset != len(data):
        raise DecodeError(DecodeFailure.TRAILING_BYTES, f"{len(data) - offset} octets en trop")
    return message


def split_block(block_hash: bytes, body: bytes, segment_size: int = SEGMENT_SIZE) -> list:
    """Decoupe un bloc serialise en BLK portant leur somme en cache (drapeau bit0)."""
    seg_count = max(1, -(-len(body) // segment_size))
    blks = []
    for seg_id in range(seg_count):
        chunk = body[seg_id * segment_size:(seg_id + 1) * segment_size]
        blks.append(Blk(block_hash, seg_id, seg_count, chunk, ones_sum(chunk)))
    return blks
