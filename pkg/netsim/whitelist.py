"""
netsim/whitelist.py
-------------------
Occupation de la Whitelist par un acteur qui mine une part fixe des blocs.

Un bloc toutes les 10 minutes ; chaque bloc de l'acteur est annonce (ADV)
depuis une nouvelle adresse, qui reste whitelistee 4 jours. Le switch reel
est utilise, avec un seuil assez grand pour ne jamais refuser d'entree.
"""

import hashlib
import logging
import math
import random
from dataclasses import dataclass

import pandas as pd

from relay.switch import DAY_MS, RelaySwitch, SwitchConfig
from relay.wire import Adv, Blk, Ctr, Upd
from relay.checksum import ones_sum

logger = logging.getLogger(__name__)

BLOCK_INTERVAL_MS = 10 * 60 * 1000
BLOCKS_PER_DAY = DAY_MS // BLOCK_INTERVAL_MS
EXPIRY_DAYS = 4
WINDOW_BLOCKS = BLOCKS_PER_DAY * EXPIRY_DAYS


def whitelist_entry_bound(share: float) -> int:
    """Nombre maximal d'entrees simultanees pour une part de minage donnee."""
    return math.ceil(WINDOW_BLOCKS * share)


def min_share_for_permanent_entry() -> float:
    """Part minimale garantissant en moyenne une entree permanente (un bloc par fenetre)."""
    return 1 / WINDOW_BLOCKS


@dataclass
class OccupancyResult:
    share: float
    seed: int
    mean: float
    peak: int
    final: int
    samples: pd.DataFrame

    def __repr__(self):
        return (f"OccupancyResult(part={self.share}, moyenne={self.mean:.2f}, "
                f"pic={self.peak}, final={self.final})")


def _occupancy_config(capacity: int) -> SwitchConfig:
    return SwitchConfig(whitelist_items=capacity, whitelist_threshold=capacity,
                        peerlist_items=1000, blacklist_items=1000, hashmem_items=10_000)


def _commit(switch: RelaySwitch, block_hash: bytes):
    payload = block_hash
    switch.apply_update(Upd(block_hash, 1), [Blk(block_hash, 0, 1, payload, ones_sum(payload))])


def whitelist_occupancy(share: float, seed: int = 0, days: int = 12, warmup_days: int = EXPIRY_DAYS,
                        capacity: int = 10_000) -> OccupancyResult:
    """
    Simule days jours de blocs et mesure les entrees de l'acteur en regime etabli.

    Args:
        share: Part des blocs minee par l'acteur (0..1).
        seed: Graine (phase de l'ordonnancement et hash des blocs).
        days: Duree simulee.
        warmup_days: Jours ignores avant de mesurer.
        capacity: Seuil de la Whitelist (assez grand pour ne pas limiter).

    Returns:
        OccupancyResult (moyenne, pic et valeur finale en regime etabli).
    """
    if not 0 <= share <= 1 or days <= warmup_days:
        raise ValueError(f"parametres invalides : share={share}, days={days}")
    rng = random.Random(seed)
    phase = rng.random()
    switch = RelaySwitch("198.51.100.1", config=_occupancy_config(capacity), seed=seed)

    samples = []
    actor_blocks = 0
    for index in range(days * BLOCKS_PER_DAY):
        now = index * BLOCK_INTERVAL_MS
        block_hash = hashlib.sha256(f"{seed}:{index}".encode()).digest()
        mined = math.floor((index + 1) * share + phase) - math.floor(index * share + phase)
        if mined:
            actor_blocks += 1
            source = (f"10.{66 + (actor_blocks >> 16)}.{(actor_blocks >> 8) & 0xFF}.{actor_blocks & 0xFF}", 8333)
            out = switch.handle_packet(source, Adv(block_hash), now)
            if not any(isinstance(d.message, Ctr) for d in out.datagrams):
                logger.warning(f"ADV de l'acteur refuse au bloc {index}.")
        else:
            switch.tick(now)
        _commit(switch, block_hash)
        if now >= warmup_days * DAY_MS:
            samples.append((now, len(switch.whitelist)))

    frame = pd.DataFrame(samples, columns=["time_ms", "entries"])
    result = OccupancyResult(share, seed, float(frame["entries"].mean()), int(frame["entries"].max()),
                             int(frame["entries"].iloc[-1]), frame)
    logger.info(f"Occupation de la Whitelist : {result}")
    return result
