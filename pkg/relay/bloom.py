"""
relay/bloom.py
--------------
Filtre de Bloom utilise par le switch (PeerList, Whitelist, Blacklist, HashMem).
Double hachage a partir d'un MurmurHash3 128 bits (mmh3.hash64).
"""

import ipaddress
import math

import mmh3


def bloom_params(n: int, p: float) -> tuple:
    """
    Dimensionnement classique d'un filtre de Bloom.

    Args:
        n: Nombre d'elements prevus (>= 1).
        p: Taux de faux positifs vise (0 < p < 1).

    Returns:
        (m_bits, h) avec m = ceil(-n ln p / ln(2)^2) et h = round(m/n * ln 2).
    """
    if n < 1 or not 0 < p < 1:
        raise ValueError(f"parametres invalides : n={n}, p={p}")
    m_bits = math.ceil(-n * math.log(p) / (math.log(2) ** 2))
    h = max(1, round(m_bits / n * math.log(2)))
    return m_bits, h


def as_key(item) -> bytes:
    """Cle binaire d'un element (adresse IP, couple (ip, port), hash de bloc...)."""
    if isinstance(item, (bytes, bytearray)):
        return bytes(item)
    if isinstance(item, tuple):
        return b"|".join(as_key(part) for part in item)
    if isinstance(item, int):
        return item.to_bytes(8, "big", signed=True)
    try:
        return ipaddress.ip_address(item).packed
    except ValueError:
        return str(item).encode()


class BloomFilter:
    """
    Filtre de Bloom sans faux negatifs.

    Attributs :
        capacity  : n prevu a la construction
        fp_rate   : taux de faux positifs vise
        m_bits    : taille du tableau de bits
        hash_count: nombre de sondes h
        inserted  : nombre d'insertions effectuees
        probes    : nombre total de sondes (instrumentation du travail par paquet)
    """

    def __init__(self, capacity: int, fp_rate: float, seed: int = 0):
        self.capacity = capacity
        self.fp_rate = fp_rate
        self.m_bits, self.hash_count = bloom_params(capacity, fp_rate)
        self.seed = seed
        self.bits = bytearray((self.m_bits + 7) // 8)
        self.inserted = 0
        self.probes = 0

    @property
    def size_bytes(self) -> float:
        return self.m_bits / 8

    def _positions(self, item):
        h1, h2 = mmh3.hash64(as_key(item), self.seed, signed=False)
        h2 |= 1
        for i in range(self.hash_count):
            self.probes += 1
            yield (h1 + i * h2) % self.m_bits

    def add(self, item):
        for pos in self._positions(item):
            self.bits[pos >> 3] |= 1 << (pos & 7)
        self.inserted += 1

    def __contains__(self, item) -> bool:
        return all(self.bits[pos >> 3] & (1 << (pos & 7)) for pos in self._positions(item))

    def clear(self):
        self.bits = bytearray(len(self.bits))
        self.inserted = 0

    def __len__(self):
        return self.inserted

    def __repr__(self):
        return (f"BloomFilter(n={self.capacity}, p={self.fp_rate}, m={self.m_bits}, "
                f"h={self.hash_count}, inseres={self.inserted})")
