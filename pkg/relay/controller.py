"""
relay/controller.py
-------------------
Partie logicielle du relais : suit les connexions annoncees par le switch
(NCONN), valide les blocs recus des clients whitelistes, met a jour le
switch (UPD + BLK) et annonce le bloc a tous les pairs (INV).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from models.block import GENESIS_HASH, Block
from relay.switch import Datagram, RelaySwitch
from relay.wire import SEGMENT_SIZE, Inv, NConn, Upd, split_block

MAX_BLOCK_BYTES = 1 << 20
DEFAULT_TARGET = 2 ** 248


class InvalidReason(Enum):
    BAD_POW = "bad_pow"
    BAD_PARENT = "bad_parent"
    OVERSIZE = "oversize"


@dataclass(frozen=True)
class BlockVerdict:
    valid: bool
    reason: Optional[InvalidReason] = None

    def __bool__(self):
        return self.valid

    def __repr__(self):
        return "Valid" if self.valid else f"Invalid({self.reason.name})"


@dataclass
class ControllerOutput:
    """
    Resultat du traitement d'un bloc.

    Attributs :
        verdict         : resultat de la validation (None si bloc deja connu)
        switch_messages : UPD suivi des BLK a appliquer au switch, dans l'ordre
        datagrams       : INV adresses aux pairs
    """
    verdict: Optional[BlockVerdict] = None
    switch_messages: list = field(default_factory=list)
    datagrams: list = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return bool(self.verdict) and bool(self.switch_messages)


class RelayController:
    """
    Controleur d'un relais.

    Attributs de classe :
        SEGMENT_SIZE : taille des segments envoyes au switch

    Attributs :
        switch          : RelaySwitch pilote (adresse source des INV)
        peers           : (ip, port) connus via NCONN uniquement
        known_hashes    : hash des blocs deja traites
        chain_tip       : hash du dernier bloc accepte
        target          : cible de preuve de travail
        inv_repeats     : nombre d'envois de chaque INV (1 = pas de repetition)
        inv_interval_ms : intervalle entre deux repetitions
        inv_on_connect  : envoie l'INV du bloc actif a chaque nouvelle connexion
    """

    SEGMENT_SIZE = SEGMENT_SIZE

    def __init__(self, switch: RelaySwitch, target: int = DEFAULT_TARGET,
                 chain_tip: bytes = GENESIS_HASH, inv_repeats: int = 1,
                 inv_interval_ms: int = 500, inv_on_connect: bool = False):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.switch = switch
        self.target = target
        self.chain_tip = chain_tip
        self.peers = set()
        self.known_hashes = set()
        self.inv_repeats = max(1, inv_repeats)
        self.inv_interval_ms = inv_interval_ms
        self.inv_on_connect = inv_on_connect
        self.current_inv: Optional[Inv] = None
        self._repeats = []

    def validate_block(self, block: Block) -> BlockVerdict:
        if block.size > MAX_BLOCK_BYTES:
            return BlockVerdict(False, InvalidReason.OVERSIZE)
        if block.hash_value > self.target:
            return BlockVerdict(False, InvalidReason.BAD_POW)
        if block.prev_hash != self.chain_tip:
            return BlockVerdict(False, InvalidReason.BAD_PARENT)
        return BlockVerdict(True)

    def on_nconn(self, note: NConn, now: int) -> list:
        """Enregistre une connexion ; renvoie l'INV du bloc actif si inv_on_connect."""
        peer = (note.ip, note.port)
        self.peers.add(peer)
        self.logger.debug(f"Nouveau pair {note.ip}:{note.port} ({len(self.peers)} connus).")
        if self.inv_on_connect and self.current_inv is not None:
            return [Datagram(self.switch.source_address(), peer, self.current_inv)]
        return []

    def _fanout(self, inv: Inv) -> list:
        return [Datagram(self.switch.source_address(), peer, inv) for peer in sorted(self.peers)]

    def on_new_block(self, block: Block, now: int) -> ControllerOutput:
        """
        Valide un bloc et prepare la mise a jour du switch et l'annonce aux pairs.

        Args:
            block: Bloc recu (televersement d'un client whiteliste ou d'un relais pair).
            now: Horloge en millisecondes.

        Returns:
            ControllerOutput ; vide si le bloc est deja connu ou invalide.
        """
        block_hash = block.hash
        if block_hash in self.known_hashes:
            self.logger.debug(f"Bloc {block.short_hash()} deja connu.")
            return ControllerOutput()

        verdict = self.validate_block(block)
        if not verdict:
            self.logger.warning(f"Bloc {block.short_hash()} refuse : {verdict.reason.value}.")
            return ControllerOutput(verdict)

        blks = split_block(block_hash, block.to_bytes(), self.SEGMENT_SIZE)
        upd = Upd(block_hash, len(blks))
        inv = Inv(block_hash, len(blks))

        self.known_hashes.add(block_hash)
        self.chain_tip = block_hash
        self.current_inv = inv
        if self.inv_repeats > 1:
            self._repeats.append([now + self.inv_interval_ms, inv, self.inv_repeats - 1])

        self.logger.info(f"Bloc {block.short_hash()} valide : {len(blks)} segments, "
                         f"INV vers {len(self.peers)} pairs.")
        return ControllerOutput(verdict, [upd] + blks, self._fanout(inv))

    def next_wakeup(self) -> Optional[int]:
        return min((due for due, _, _ in self._repeats), default=None)

    def on_timer(self, now: int) -> list:
        """Repetitions d'INV arrivees a echeance."""
        datagrams = []
        for entry in self._repeats:
            due, inv, remaining = entry
            if due <= now and remaining > 0:
                datagrams.extend(self._fanout(inv))
                entry[0] = now + self.inv_interval_ms
                entry[2] = remaining - 1
        self._repeats = [entry for entry in self._repeats if entry[2] > 0]
        return datagrams

    def __repr__(self):
        return f"RelayController(pairs={len(self.peers)}, tip={self.chain_tip[:4].hex()})"
