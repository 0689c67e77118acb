"""
relay/switch.py
---------------
Plan de donnees du relais : machine a etats qui modelise le switch programmable.

Chaque paquet est traite avec un travail borne (quelques sondes de filtres de
Bloom, une lecture de segment) ; aucune boucle sur les clients ou les segments
n'a lieu sur le chemin d'un paquet. La maintenance periodique (rotation des
cles, rotation de la PeerList, expiration de la Whitelist) est faite avant le
traitement, hors de la mesure du travail par paquet.
"""

import hashlib
import ipaddress
import json
import logging
import random
from collections import Counter, OrderedDict
from dataclasses import dataclass, field, fields
from typing import Optional

import pandas as pd

from models.errors import ScenarioConfigError
from relay.bloom import BloomFilter
from relay.checksum import UDP_HEADER_SIZE, ones_sum, udp_checksum_cached
from relay.sketch import CountMinSketch
from relay.wire import Ack, Adv, Blk, Ctr, GetSeg, NConn, Segment, Syn, SynAck, Upd

DAY_MS = 24 * 3600 * 1000


def secret_for(ip: str, port: int, key: bytes) -> int:
    """Secret de poignee de main : BLAKE2b a cle sur (ip, port), tronque a 32 bits."""
    digest = hashlib.blake2b(ipaddress.ip_address(ip).packed + port.to_bytes(2, "big"),
                             key=key, digest_size=4).digest()
    return int.from_bytes(digest, "big")


# =====================================================================
# CONFIGURATION
# =====================================================================

@dataclass
class SwitchConfig:
    """
    Parametres des structures du switch (valeurs par defaut du tableau memoire).

    Attributs :
        peerlist_items / peerlist_fp    : capacite et faux positifs d'un des deux filtres PeerList
        whitelist_items / whitelist_fp  : filtre Whitelist (capacite = seuil par defaut)
        blacklist_items / blacklist_fp  : filtre Blacklist
        hashmem_items / hashmem_fp      : filtre des hash de blocs connus
        whitelist_threshold             : taille maximale de la liste exacte des clients whitelistes
        whitelist_ttl_ms                : duree de presence dans la Whitelist (4 jours)
        blockmem_bytes                  : emplacement de bloc compte dans le budget memoire
        segment_size                    : taille des segments servis
        sketch_depth / sketch_width     : dimensions du sketch SentLimit
        sentlimit_epoch_ms              : periode de remise a zero du sketch
        sentlimit_blocks                : nombre de blocs complets tolere par epoque
        peerlist_epoch_ms               : periode de rotation des deux filtres PeerList
        key_rotation_ms / key_grace_ms  : rotation de la cle secrete et tolerance sur l'ancienne
        source_ip_rotation              : reponses emises depuis une adresse aleatoire du /24 du relais
    """
    peerlist_items: int = 100_000
    peerlist_fp: float = 1e-4
    whitelist_items: int = 100
    whitelist_fp: float = 1e-4
    blacklist_items: int = 1_000_000
    blacklist_fp: float = 1e-3
    hashmem_items: int = 518_823
    hashmem_fp: float = 1e-4
    whitelist_threshold: int = 100
    whitelist_ttl_ms: int = 4 * DAY_MS
    blockmem_bytes: int = 1 << 20
    segment_size: int = 1024
    sketch_depth: int = 4
    sketch_width: int = 2048
    sentlimit_epoch_ms: int = 600_000
    sentlimit_blocks: int = 3
    peerlist_epoch_ms: int = 6 * 3600 * 1000
    key_rotation_ms: int = 3600 * 1000
    key_grace_ms: int = 60_000
    source_ip_rotation: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "SwitchConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ScenarioConfigError(f"cles inconnues dans la configuration du switch : {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "SwitchConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


# =====================================================================
# STRUCTURES
# =====================================================================

class PeerList:
    """Deux filtres alternes : insertion dans l'actif, interrogation des deux."""

    def __init__(self, items: int, fp: float, seed: int = 0):
        self.items, self.fp, self.seed = items, fp, seed
        self.active = BloomFilter(items, fp, seed)
        self.previous = BloomFilter(items, fp, seed + 1)

    def rotate(self):
        self.previous = self.active
        self.active = BloomFilter(self.items, self.fp, self.seed)

    def add(self, peer):
        self.active.add(peer)

    def __contains__(self, peer) -> bool:
        return peer in self.active or peer in self.previous

    @property
    def probes(self) -> int:
        return self.active.probes + self.previous.probes

    @property
    def size_bytes(self) -> float:
        return self.active.size_bytes + self.previous.size_bytes


class Whitelist:
    """
    Clients autorises a joindre le controleur.

    La liste exacte (ip -> expiration) fait foi ; le filtre de Bloom sert de
    premier test et est reconstruit quand des entrees expirent.
    """

    def __init__(self, items: int, fp: float, threshold: int, seed: int = 0):
        self.items, self.fp, self.seed = items, fp, seed
        self.threshold = threshold
        self.entries = OrderedDict()
        self.filter = BloomFilter(items, fp, seed)

    def is_full(self) -> bool:
        return len(self.entries) >= self.threshold

    def add(self, ip: str, expiry: int):
        if ip in self.entries:
            self.entries.move_to_end(ip)
        self.entries[ip] = expiry
        self.filter.add(ip)

    def prune(self, now: int) -> int:
        """Retire les entrees expirees (expiration <= now). Renvoie le nombre retire."""
        removed = 0
        while self.entries:
            ip, expiry = next(iter(self.entries.items()))
            if expiry > now:
                break
            self.entries.popitem(last=False)
            removed += 1
        if removed:
            self.filter = BloomFilter(self.items, self.fp, self.seed)
            for ip in self.entries:
                self.filter.add(ip)
        return removed

    def __contains__(self, ip) -> bool:
        return ip in self.filter and ip in self.entries

    def __len__(self):
        return len(self.entries)

    @property
    def probes(self) -> int:
        return self.filter.probes


@dataclass
class StoredBlock:
    block_hash: bytes
    seg_count: int
    segments: dict = field(default_factory=dict)

    def is_complete(self) -> bool:
        return len(self.segments) == self.seg_count


# =====================================================================
# SORTIES
# =====================================================================

@dataclass(frozen=True)
class Datagram:
    """Paquet UDP emis : adresses (ip, port), message et checksum UDP eventuel."""
    src: tuple
    dst: tuple
    message: object
    checksum: Optional[int] = None


@dataclass(frozen=True)
class Forward:
    """Trafic d'un client whiteliste transmis au controleur."""
    src: tuple
    message: object


@dataclass
class SwitchOutput:
    datagrams: list = field(default_factory=list)
    notes: list = field(default_factory=list)


# =====================================================================
# SWITCH
# =====================================================================

class RelaySwitch:
    """
    Modele du switch d'un relais.

    Attributs :
        ip, port    : adresse publique du relais
        prefix      : /24 du relais (rotation d'adresse source)
        config      : SwitchConfig
        peerlist    : clients ayant termine la poignee de main
        whitelist   : clients autorises a joindre le controleur
        blacklist   : adresses bannies
        hashmem     : hash de blocs deja connus
        sentlimit   : compteur de requetes par adresse
        active      : bloc servi ; previous : bloc precedent
        stats       : compteur des decisions (reponses, rejets par motif)
        last_work   : sondes effectuees par le dernier paquet
    """

    def __init__(self, ip: str, port: int = 8333, config: SwitchConfig = None, seed: int = 0):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.ip = ip
        self.port = port
        self.config = config or SwitchConfig()
        self.prefix = ipaddress.ip_network(f"{ip}/24", strict=False)
        self.rng = random.Random(seed)

        c = self.config
        self.peerlist = PeerList(c.peerlist_items, c.peerlist_fp, seed=seed)
        self.whitelist = Whitelist(c.whitelist_items, c.whitelist_fp, c.whitelist_threshold, seed=seed + 2)
        self.blacklist = BloomFilter(c.blacklist_items, c.blacklist_fp, seed=seed + 3)
        self.hashmem = BloomFilter(c.hashmem_items, c.hashmem_fp, seed=seed + 4)
        self.sentlimit = CountMinSketch(c.sketch_depth, c.sketch_width, c.sentlimit_epoch_ms)

        self.key = self.rng.randbytes(8)
        self.previous_key = None
        self.key_epoch = 0
        self.key_rotated_at = 0
        self.peerlist_epoch = 0

        self.active: Optional[StoredBlock] = None
        self.previous: Optional[StoredBlock] = None
        self.staging: Optional[StoredBlock] = None
        self._staging_rejected = False
        self.pending_adv = {}

        self.stats = Counter()
        self.last_work = 0

    # -----------------------------------------------------------------
    # Maintenance
    # -----------------------------------------------------------------

    def tick(self, now: int):
        """Rotation des cles et des filtres, expiration de la Whitelist."""
        c = self.config
        key_epoch = now // c.key_rotation_ms
        if key_epoch != self.key_epoch:
            self.previous_key = self.key
            self.key = self.rng.randbytes(8)
            self.key_epoch = key_epoch
            self.key_rotated_at = key_epoch * c.key_rotation_ms
            self.logger.debug(f"Rotation de la cle secrete (epoque {key_epoch}).")

        peer_epoch = now // c.peerlist_epoch_ms
        if peer_epoch != self.peerlist_epoch:
            for _ in range(min(2, peer_epoch - self.peerlist_epoch)):
                self.peerlist.rotate()
            self.peerlist_epoch = peer_epoch

        if self.whitelist.prune(now):
            live = set(self.whitelist.entries)
            self.pending_adv = {h: ip for h, ip in self.pending_adv.items() if ip in live}

    def _total_probes(self) -> int:
        return (self.peerlist.probes + self.whitelist.probes + self.blacklist.probes
                + self.hashmem.probes + self.sentlimit.probes)

    # -----------------------------------------------------------------
    # Chemin des paquets
    # -----------------------------------------------------------------

    def check_secret(self, ip: str, port: int, secret: int, now: int) -> bool:
        if secret == secret_for(ip, port, self.key):
            return True
        return (self.previous_key is not None
                and now - self.key_rotated_at <= self.config.key_grace_ms
                and secret == secret_for(ip, port, self.previous_key))

    def source_address(self) -> tuple:
        if not self.config.source_ip_rotation:
            return (self.ip, self.port)
        host = self.rng.randrange(1, 255)
        return (str(self.prefix.network_address + host), self.port)

    def _reply(self, out: SwitchOutput, dst: tuple, message, checksum: Optional[int] = None):
        out.datagrams.append(Datagram(self.source_address(), dst, message, checksum))

    def _drop(self, reason: str, src: tuple):
        self.stats[f"drop_{reason}"] += 1
        self.logger.debug(f"Paquet de {src[0]}:{src[1]} rejete ({reason}).")

    def handle_packet(self, src: tuple, message, now: int, to_controller: bool = False) -> SwitchOutput:
        """
        Traite un message entrant.

        Args:
            src: (ip, port) de l'emetteur.
            message: Message decode.
            now: Horloge en millisecondes.
            to_controller: True si le paquet vise le controleur (trafic TCP redirige).

        Returns:
            SwitchOutput avec les datagrammes a emettre et les notes pour le controleur.
        """
        self.tick(now)
        before = self._total_probes()
        out = SwitchOutput()
        try:
            self._dispatch(src, message, now, to_controller, out)
        finally:
            self.last_work = self._total_probes() - before
        return out

    def _dispatch(self, src, message, now, to_controller, out):
        ip, port = src
        if ip in self.blacklist:
            self._drop("blacklist", src)
            return

        if to_controller:
            if ip in self.whitelist:
                self.stats["forward"] += 1
                out.notes.append(Forward(src, message))
            else:
                self._drop("not_whitelisted", src)
            return

        if isinstance(message, Syn):
            self.stats["synack"] += 1
            self._reply(out, src, SynAck(secret_for(ip, port, self.key)))
        elif isinstance(message, Ack):
            if not self.check_secret(ip, port, message.secret, now):
                self._drop("bad_secret", src)
                return
            self.peerlist.add(src)
            self.stats["connected"] += 1
            out.notes.append(NConn(ip, port))
        elif isinstance(message, GetSeg):
            self._serve_segment(src, message, now, out)
        elif isinstance(message, Adv):
            self._handle_adv(src, message, now, out)
        else:
            self._drop(f"kind_{message.kind.name.lower()}", src)

    def sentlimit_threshold(self) -> int:
        seg_count = self.active.seg_count if self.active else 1
        return self.config.sentlimit_blocks * seg_count

    def _serve_segment(self, src, message: GetSeg, now: int, out: SwitchOutput):
        if src not in self.peerlist:
            self._drop("not_connected", src)
            return
        ip = src[0]
        if self.sentlimit.add(ip, now) > self.sentlimit_threshold():
            self.blacklist.add(ip)
            self.stats["blacklisted"] += 1
            self.logger.info(f"Client {ip} banni (trop de requetes sur l'epoque).")
            return

        stored = None
        for candidate in (self.active, self.previous):
            if candidate is not None and candidate.block_hash == message.block_hash:
                stored = candidate
                break
        if stored is None or message.seg_id >= stored.seg_count:
            self._drop("unknown_segment", src)
            return

        segment = stored.segments[message.seg_id]
        blk = Blk(stored.block_hash, segment.index, stored.seg_count, segment.data)
        header = blk.header_bytes()
        source = self.source_address()
        length = UDP_HEADER_SIZE + len(header) + len(segment.data)
        checksum = udp_checksum_cached(source[0], ip, source[1], src[1], length, header, segment.cached_sum)
        self.stats["blk"] += 1
        out.datagrams.append(Datagram(source, src, blk, checksum))

    def _handle_adv(self, src, message: Adv, now: int, out: SwitchOutput):
        ip = src[0]
        block_hash = message.block_hash
        if block_hash in self.hashmem:
            self._drop("known_hash", src)
            return
        pending = self.pending_adv.get(block_hash)
        if pending is not None:
            if pending == ip:
                self._reply(out, src, Ctr())
            else:
                self._drop("pending_hash", src)
            return
        if self.whitelist.is_full() or len(self.pending_adv) >= self.config.whitelist_threshold:
            self._drop("whitelist_full", src)
            return
        self.whitelist.add(ip, now + self.config.whitelist_ttl_ms)
        self.pending_adv[block_hash] = ip
        self.stats["whitelisted"] += 1
        self.logger.debug(f"Client {ip} whiteliste jusqu'a {now + self.config.whitelist_ttl_ms} ms.")
        self._reply(out, src, Ctr())

    def admits_controller_traffic(self, ip: str, now: int) -> bool:
        self.tick(now)
        return ip not in self.blacklist and ip in self.whitelist

    # -----------------------------------------------------------------
    # Mise a jour par le controleur
    # -----------------------------------------------------------------

    def begin_update(self, upd: Upd):
        self.staging = StoredBlock(upd.block_hash, upd.seg_count)
        self._staging_rejected = False

    def stage_segment(self, blk: Blk) -> bool:
        """Ajoute un segment a la mise a jour en cours ; faux si le segment est refuse."""
        staging = self.staging
        if staging is None or blk.block_hash != staging.block_hash or blk.seg_count != staging.seg_count:
            self.logger.warning("Segment hors de la mise a jour en cours ignore.")
            return False
        if blk.cached_sum is None or ones_sum(blk.payload) != blk.cached_sum:
            self.logger.warning(f"Somme en cache invalide pour le segment {blk.seg_id}.")
            return False
        if blk.seg_id in staging.segments:
            self.logger.warning(f"Segment {blk.seg_id} recu deux fois.")
            self._staging_rejected = True
            return False
        staging.segments[blk.seg_id] = Segment(blk.seg_id, blk.payload, blk.cached_sum)
        return True

    def commit_update(self) -> bool:
        """Active le bloc en cours si tous ses segments sont presents exactement une fois."""
        staging, self.staging = self.staging, None
        if staging is None:
            return False
        if self._staging_rejected or not staging.is_complete():
            self.stats["update_rejected"] += 1
            self.logger.warning(
                f"Mise a jour {staging.block_hash[:4].hex()} rejetee "
                f"({len(staging.segments)}/{staging.seg_count} segments)."
            )
            return False
        if self.active is None or self.active.block_hash != staging.block_hash:
            self.previous = self.active
        self.active = staging
        self.hashmem.add(staging.block_hash)
        self.pending_adv.pop(staging.block_hash, None)
        self.stats["update_committed"] += 1
        self.logger.info(f"Bloc {staging.block_hash[:4].hex()} servi ({staging.seg_count} segments).")
        return True

    def apply_update(self, upd: Upd, blks) -> bool:
        self.begin_update(upd)
        for blk in blks:
            self.stage_segment(blk)
        return self.commit_update()

    def knows_hash(self, block_hash: bytes) -> bool:
        return block_hash in self.hashmem

    # -----------------------------------------------------------------
    # Memoire
    # -----------------------------------------------------------------

    def memory_report(self) -> pd.DataFrame:
        """
        Une ligne par structure (elements, faux positifs, octets) plus les totaux.

        Le budget ne compte qu'un emplacement BlockMem, celui du bloc servi.
        Les emplacements du bloc precedent et du bloc en cours de mise a jour
        figurent sur une ligne a part (in_budget a False) et dans "Total
        (tous emplacements)".
        """
        c = self.config
        rows = [
            ("PeerList", 2 * c.peerlist_items, c.peerlist_fp, self.peerlist.size_bytes, True),
            ("WhiteList", c.whitelist_items, c.whitelist_fp, self.whitelist.filter.size_bytes, True),
            ("BlackList", c.blacklist_items, c.blacklist_fp, self.blacklist.size_bytes, True),
            ("HashMem", c.hashmem_items, c.hashmem_fp, self.hashmem.size_bytes, True),
            ("BlockMem", 1, None, float(c.blockmem_bytes), True),
            ("SentLimit", c.sketch_depth * c.sketch_width, None, float(self.sentlimit.size_bytes), True),
            ("BlockMem (precedent, mise a jour)", 2, None, float(2 * c.blockmem_bytes), False),
        ]
        columns = ["structure", "items", "false_positive", "bytes", "in_budget"]
        report = pd.DataFrame(rows, columns=columns)
        budget = report.loc[report["in_budget"], "bytes"].sum()
        totals = pd.DataFrame([
            ("Total", None, None, budget, True),
            ("Total (tous emplacements)", None, None, report["bytes"].sum(), False),
        ], columns=columns)
        return pd.concat([report, totals], ignore_index=True)

    def block_slots_in_use(self) -> int:
        """Emplacements BlockMem occupes (bloc servi, precedent, mise a jour)."""
        return sum(slot is not None for slot in (self.active, self.previous, self.staging))

    def state_size_bytes(self) -> float:
        report = self.memory_report()
        return float(report.loc[report["structure"] == "Total", "bytes"].iloc[0])

    def __repr__(self):
        return (f"RelaySwitch({self.ip}:{self.port}, whitelist={len(self.whitelist)}, "
                f"bloc={self.active.block_hash[:4].hex() if self.active else None})")
