"""
relay/client.py
---------------
Machine a etats d'un client Bitcoin etendu pour parler aux relais :
poignee de main, telechargement segmente avec relance par segment,
annonce de blocs (ADV) et televersement vers le controleur apres CTR.

Le client ne connait pas l'horloge : chaque evenement porte son instant et
la sortie indique la prochaine echeance (wakeup) a programmer.
"""

import ipaddress
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from models.block import Block
from relay.wire import Ack, Adv, Blk, Ctr, GetSeg, Inv, Syn, SynAck


class Phase(Enum):
    IDLE = "idle"
    SYN_SENT = "syn_sent"
    CONNECTED = "connected"
    CTR_CONNECTED = "ctr_connected"


class DownloadStatus(Enum):
    ACTIVE = "active"
    COMPLETE = "complete"
    FAILED = "failed"


# =====================================================================
# EVENEMENTS ET SORTIES
# =====================================================================

@dataclass(frozen=True)
class Timer:
    now: int


@dataclass(frozen=True)
class Inbound:
    now: int
    src: tuple
    message: object


@dataclass(frozen=True)
class LocalNewBlock:
    now: int
    block: Block


@dataclass
class ClientOutput:
    """
    Attributs :
        messages  : (destination, message) a emettre
        uploads   : (relais, bloc) a televerser vers le controleur
        completed : (hash, octets) des telechargements termines
        wakeup    : prochaine echeance de timer, None si aucune
    """
    messages: list = field(default_factory=list)
    uploads: list = field(default_factory=list)
    completed: list = field(default_factory=list)
    wakeup: Optional[int] = None


# =====================================================================
# ETAT
# =====================================================================

@dataclass
class RelaySession:
    address: tuple
    network: object
    phase: Phase = Phase.IDLE
    pending_secret: Optional[int] = None
    confirmed: bool = False
    attempts: int = 0
    deadline: Optional[int] = None
    pending_adv: dict = field(default_factory=dict)


@dataclass
class Download:
    block_hash: bytes
    seg_count: int
    relay: tuple
    received: dict = field(default_factory=dict)
    outstanding: dict = field(default_factory=dict)
    retries: dict = field(default_factory=dict)
    next_seg: int = 0
    status: DownloadStatus = DownloadStatus.ACTIVE
    requests: int = 0

    def reassemble(self) -> bytes:
        return b"".join(self.received[i] for i in range(self.seg_count))


class RelayClient:
    """
    Client d'un ou plusieurs relais.

    Attributs de classe :
        WINDOW         : nombre maximal de GET_SEG en attente par telechargement
        TIMEOUT_MS     : delai initial avant relance
        MAX_TIMEOUT_MS : plafond du delai (doublement a chaque relance)
        MAX_RETRIES    : relances maximales par segment (et par poignee de main)
    """

    WINDOW = 32
    TIMEOUT_MS = 250
    MAX_TIMEOUT_MS = 4000
    MAX_RETRIES = 8

    def __init__(self, ip: str, port: int = 8333, relays=()):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.ip = ip
        self.port = port
        self.sessions = {}
        for address in relays:
            self.add_relay(address)
        self.downloads = {}
        self.known_hashes = set()
        self.blocks = {}

    def add_relay(self, address: tuple):
        address = (address[0], address[1])
        network = ipaddress.ip_network(f"{address[0]}/24", strict=False)
        self.sessions[address] = RelaySession(address, network)

    @classmethod
    def backoff(cls, attempts: int) -> int:
        return min(cls.TIMEOUT_MS * (2 ** attempts), cls.MAX_TIMEOUT_MS)

    def session_for(self, ip: str) -> Optional[RelaySession]:
        """Session du relais dont le /24 contient l'adresse source (adresses tournantes)."""
        address = ipaddress.ip_address(ip)
        for session in self.sessions.values():
            if address in session.network:
                return session
        return None

    @property
    def phase(self) -> Phase:
        """Phase la plus avancee parmi les sessions."""
        order = list(Phase)
        phases = [s.phase for s in self.sessions.values()] or [Phase.IDLE]
        return max(phases, key=order.index)

    # -----------------------------------------------------------------
    # Point d'entree
    # -----------------------------------------------------------------

    def start(self, now: int) -> ClientOutput:
        """Envoie SYN a chaque relais configure."""
        out = ClientOutput()
        for session in self.sessions.values():
            if session.phase == Phase.IDLE:
                self._send_syn(session, now, out)
        out.wakeup = self.next_wakeup()
        return out

    def step(self, event) -> ClientOutput:
        out = ClientOutput()
        if isinstance(event, Inbound):
            self._on_message(event.src, event.message, event.now, out)
        elif isinstance(event, LocalNewBlock):
            self._on_local_block(event.block, event.now, out)
        elif isinstance(event, Timer):
            self._on_timer(event.now, out)
        out.wakeup = self.next_wakeup()
        return out

    # -----------------------------------------------------------------
    # Poignee de main
    # -----------------------------------------------------------------

    def _send_syn(self, session: RelaySession, now: int, out: ClientOutput):
        session.phase = Phase.SYN_SENT
        session.deadline = now + self.backoff(session.attempts)
        out.messages.append((session.address, Syn()))

    def _on_synack(self, session: RelaySession, message: SynAck, now: int, out: ClientOutput):
        if session.phase == Phase.SYN_SENT:
            session.phase = Phase.CONNECTED
            session.attempts = 0
        session.pending_secret = message.secret
        session.deadline = None if session.confirmed else now + self.backoff(session.attempts)
        out.messages.append((session.address, Ack(message.secret)))
        for block_hash in session.pending_adv:
            session.pending_adv[block_hash] = [now + self.TIMEOUT_MS, 0]
            out.messages.append((session.address, Adv(block_hash)))

    def _session_timer(self, session: RelaySession, now: int, out: ClientOutput):
        if session.deadline is not None and session.deadline <= now:
            if session.attempts >= self.MAX_RETRIES:
                session.deadline = None
                if session.phase == Phase.SYN_SENT:
                    session.phase = Phase.IDLE
                    self.logger.info(f"Relais {session.address[0]} injoignable.")
            else:
                session.attempts += 1
                if session.phase == Phase.SYN_SENT:
                    self._send_syn(session, now, out)
                elif not session.confirmed and session.pending_secret is not None:
                    # ACK possiblement perdu : aucun INV ni BLK recu depuis.
                    session.deadline = now + self.backoff(session.attempts)
                    out.messages.append((session.address, Ack(session.pending_secret)))
                else:
                    session.deadline = None

        for block_hash, entry in list(session.pending_adv.items()):
            due, attempts = entry
            if session.phase not in (Phase.CONNECTED, Phase.CTR_CONNECTED) or due > now:
                continue
            if attempts >= self.MAX_RETRIES:
                del session.pending_adv[block_hash]
                continue
            entry[0] = now + self.backoff(attempts + 1)
            entry[1] = attempts + 1
            out.messages.append((session.address, Adv(block_hash)))

    # -----------------------------------------------------------------
    # Messages entrants
    # -----------------------------------------------------------------

    def _on_message(self, src: tuple, message, now: int, out: ClientOutput):
        session = self.session_for(src[0])
        if session is None:
            self.logger.debug(f"Message de {src[0]} hors de tout relais ignore.")
            return
        if isinstance(message, SynAck):
            self._on_synack(session, message, now, out)
        elif isinstance(message, Inv):
            self._confirm(session)
            session.pending_adv.pop(message.block_hash, None)
            self._on_inv(session, message, now, out)
        elif isinstance(message, Blk):
            self._confirm(session)
            self._on_blk(message, now, out)
        elif isinstance(message, Ctr):
            self._on_ctr(session, out)

    def _confirm(self, session: RelaySession):
        if not session.confirmed:
            session.confirmed = True
            if session.phase != Phase.SYN_SENT:
                session.deadline = None

    def _on_inv(self, session: RelaySession, message: Inv, now: int, out: ClientOutput):
        if session.phase not in (Phase.CONNECTED, Phase.CTR_CONNECTED):
            self.logger.debug(f"INV de {session.address[0]} ignore hors connexion ({session.phase.value}).")
            return
        if message.block_hash in self.known_hashes or message.block_hash in self.downloads:
            return
        download = Download(message.block_hash, message.seg_count, session.address)
        self.downloads[message.block_hash] = download
        self.logger.debug(f"Telechargement de {message.block_hash[:4].hex()} ({message.seg_count} segments).")
        self._fill_window(download, now, out)

    def _request(self, download: Download, seg_id: int, now: int, out: ClientOutput):
        attempts = download.retries.get(seg_id, 0)
        download.outstanding[seg_id] = now + self.backoff(attempts)
        download.requests += 1
        out.messages.append((download.relay, GetSeg(download.block_hash, seg_id)))

    def _fill_window(self, download: Download, now: int, out: ClientOutput):
        while len(download.outstanding) < self.WINDOW and download.next_seg < download.seg_count:
            seg_id = download.next_seg
            download.next_seg += 1
            if seg_id not in download.received:
                self._request(download, seg_id, now, out)

    def _on_blk(self, message: Blk, now: int, out: ClientOutput):
        download = self.downloads.get(message.block_hash)
        if download is None or download.status != DownloadStatus.ACTIVE:
            return
        if message.seg_count != download.seg_count or message.seg_id in download.received:
            return
        download.received[message.seg_id] = message.payload
        download.outstanding.pop(message.seg_id, None)
        if len(download.received) == download.seg_count:
            download.status = DownloadStatus.COMPLETE
            download.outstanding.clear()
            self.known_hashes.add(download.block_hash)
            out.completed.append((download.block_hash, download.reassemble()))
            self.logger.debug(f"Bloc {download.block_hash[:4].hex()} recu ({download.requests} requetes).")
            return
        self._fill_window(download, now, out)

    def _on_ctr(self, session: RelaySession, out: ClientOutput):
        session.phase = Phase.CTR_CONNECTED
        for block_hash in list(session.pending_adv):
            block = self.blocks.get(block_hash)
            if block is not None:
                out.uploads.append((session.address, block))
        session.pending_adv.clear()

    # -----------------------------------------------------------------
    # Bloc local et timers
    # -----------------------------------------------------------------

    def _on_local_block(self, block: Block, now: int, out: ClientOutput):
        block_hash = block.hash
        self.known_hashes.add(block_hash)
        self.blocks[block_hash] = block
        for session in self.sessions.values():
            session.pending_adv[block_hash] = [now + self.TIMEOUT_MS, 0]
            if session.phase in (Phase.CONNECTED, Phase.CTR_CONNECTED):
                out.messages.append((session.address, Adv(block_hash)))

    def _on_timer(self, now: int, out: ClientOutput):
        for session in self.sessions.values():
            self._session_timer(session, now, out)
        for download in self.downloads.values():
            if download.status != DownloadStatus.ACTIVE:
                continue
            session = self.sessions.get(download.relay)
            if session is None or session.phase not in (Phase.CONNECTED, Phase.CTR_CONNECTED):
                # Aucun GET_SEG hors connexion.
                download.status = DownloadStatus.FAILED
                download.outstanding.clear()
                continue
            for seg_id, due in sorted(download.outstanding.items()):
                if due > now:
                    continue
                attempts = download.retries.get(seg_id, 0)
                if attempts >= self.MAX_RETRIES:
                    download.status = DownloadStatus.FAILED
                    download.outstanding.clear()
                    self.logger.info(f"Telechargement {download.block_hash[:4].hex()} abandonne "
                                     f"(segment {seg_id}).")
                    break
                download.retries[seg_id] = attempts + 1
                self._request(download, seg_id, now, out)

    def next_wakeup(self) -> Optional[int]:
        deadlines = []
        for session in self.sessions.values():
            if session.deadline is not None:
                deadlines.append(session.deadline)
            if session.phase in (Phase.CONNECTED, Phase.CTR_CONNECTED):
                deadlines.extend(due for due, _ in session.pending_adv.values())
        for download in self.downloads.values():
            if download.status == DownloadStatus.ACTIVE:
                deadlines.extend(download.outstanding.values())
        return min(deadlines, default=None)

    def download_status(self, block_hash: bytes) -> Optional[DownloadStatus]:
        download = self.downloads.get(block_hash)
        return download.status if download else None

    def __repr__(self):
        return f"RelayClient({self.ip}, {self.phase.value}, {len(self.downloads)} telechargements)"
