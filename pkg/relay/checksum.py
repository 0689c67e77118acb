"""
relay/checksum.py
-----------------
Somme en complement a un (RFC 1071) et checksum UDP (RFC 768).

Le commutateur ne recalcule jamais la somme d'un segment : il part de la
somme mise en cache et n'ajoute que ce qui change d'un client a l'autre
(pseudo-en-tete, en-tete UDP, en-tete du message).
"""

import ipaddress
import struct

import numpy as np

UDP_PROTOCOL = 17
UDP_HEADER_SIZE = 8


def fold(total: int) -> int:
    """Replie une somme sur 16 bits avec report circulaire."""
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def ones_sum(data: bytes) -> int:
    """Somme des mots 16 bits gros-boutistes ; octet final impair complete par 0x00."""
    if not data:
        return 0
    if len(data) % 2:
        data = bytes(data) + b"\x00"
    words = np.frombuffer(data, dtype=">u2")
    return fold(int(words.sum(dtype=np.uint64)))


def swap16(value: int) -> int:
    """Echange les deux octets d'un mot (somme d'une donnee placee a un offset impair)."""
    return ((value & 0xFF) << 8) | (value >> 8)


def _pseudo_header(src_ip: str, dst_ip: str, udp_length: int) -> bytes:
    return (ipaddress.IPv4Address(src_ip).packed + ipaddress.IPv4Address(dst_ip).packed
            + struct.pack(">BBH", 0, UDP_PROTOCOL, udp_length))


def _udp_header(src_port: int, dst_port: int, udp_length: int) -> bytes:
    return struct.pack(">HHHH", src_port, dst_port, udp_length, 0)


def _finish(total: int) -> int:
    checksum = ~fold(total) & 0xFFFF
    return 0xFFFF if checksum == 0 else checksum


def udp_checksum(src_ip: str, dst_ip: str, src_port: int, dst_port: int, data: bytes) -> int:
    """Checksum UDP calcule entierement a partir du datagramme."""
    length = UDP_HEADER_SIZE + len(data)
    datagram = _pseudo_header(src_ip, dst_ip, length) + _udp_header(src_port, dst_port, length) + data
    return _finish(ones_sum(datagram))


def udp_checksum_cached(src_ip: str, dst_ip: str, src_port: int, dst_port: int,
                        length: int, header_bytes: bytes, cached_sum: int) -> int:
    """
    Checksum UDP a partir de la somme en cache de la charge utile.

    Args:
        src_ip, dst_ip: Adresses IPv4.
        src_port, dst_port: Ports UDP.
        length: Longueur UDP (en-tete UDP + message).
        header_bytes: Octets du message precedant la charge utile.
        cached_sum: ones_sum de la charge utile.

    Returns:
        Checksum a placer dans l'en-tete UDP (0 transmis comme 0xFFFF).
    """
    payload_sum = swap16(cached_sum) if len(header_bytes) % 2 else cached_sum
    total = (ones_sum(_pseudo_header(src_ip, dst_ip, length))
             + ones_sum(_udp_header(src_port, dst_port, length))
             + ones_sum(header_bytes)
             + payload_sum)
    return _finish(total)
