"""
relay/sketch.py
---------------
Count-min sketch servant de compteur de requetes par client (SentLimit).
Table numpy de compteurs uint16 saturants, remise a zero a chaque epoque.
"""

import numpy as np
import mmh3

from relay.bloom import as_key


class CountMinSketch:
    """
    Attributs :
        depth    : nombre de lignes (fonctions de hachage)
        width    : nombre de colonnes par ligne
        epoch_ms : duree d'une epoque ; la table est videe a chaque changement
        table    : compteurs (depth x width, uint16)
    """

    MAX_COUNT = np.iinfo(np.uint16).max

    def __init__(self, depth: int = 4, width: int = 2048, epoch_ms: int = 600_000):
        self.depth = depth
        self.width = width
        self.epoch_ms = epoch_ms
        self.table = np.zeros((depth, width), dtype=np.uint16)
        self.epoch = 0
        self.probes = 0

    @property
    def size_bytes(self) -> int:
        return int(self.table.nbytes)

    def _columns(self, key) -> np.ndarray:
        raw = as_key(key)
        self.probes += self.depth
        return np.array([mmh3.hash(raw, row, signed=False) % self.width for row in range(self.depth)])

    def roll(self, now_ms: int):
        """Vide la table si l'horloge est entree dans une nouvelle epoque."""
        epoch = now_ms // self.epoch_ms
        if epoch != self.epoch:
            self.epoch = epoch
            self.table.fill(0)

    def add(self, key, now_ms: int, count: int = 1) -> int:
        """Incremente et renvoie l'estimation (minimum des lignes)."""
        self.roll(now_ms)
        rows = np.arange(self.depth)
        cols = self._columns(key)
        current = self.table[rows, cols].astype(np.int64) + count
        self.table[rows, cols] = np.minimum(current, self.MAX_COUNT)
        return int(self.table[rows, cols].min())

    def estimate(self, key, now_ms: int) -> int:
        self.roll(now_ms)
        return int(self.table[np.arange(self.depth), self._columns(key)].min())
