"""
netsim/nodes.py
---------------
Noeuds concrets : client Bitcoin classique, client relie aux relais,
relais (switch + controleur) et client abusif utilise par le scenario DDoS.
"""

from models.block import Block
from netsim.base_node import BaseNode
from relay.client import Inbound, LocalNewBlock, RelayClient, Timer
from relay.controller import RelayController
from relay.switch import Datagram, RelaySwitch
from relay.wire import Ack, Blk, GetSeg, Inv, Syn, SynAck

LEGACY_BLOCK = "legacy_block"
UPLOAD = "upload"
OVERLAY = "overlay"


class LegacyClientNode(BaseNode):
    """Client non modifie : diffuse chaque nouveau bloc a ses voisins classiques."""

    ROLE = "legacy"

    def __init__(self, name: str, ip: str, port: int = 8333):
        super().__init__(name, ip, port)
        self.neighbors = []
        self.blocks = {}

    def learn(self, sim, block: Block, via: str, src=None):
        """Premier contact avec un bloc : enregistrement puis diffusion."""
        block_hash = block.hash
        if block_hash in self.blocks:
            return False
        self.blocks[block_hash] = block
        sim.learned(self, block_hash, via)
        for neighbor in self.neighbors:
            if neighbor is not src:
                sim.send_logical(LEGACY_BLOCK, self, neighbor, block)
        return True

    def mine(self, sim, block: Block):
        sim.record(self, "mined", block.short_hash())
        self.learn(sim, block, "mined")

    def on_logical(self, sim, kind, src, payload):
        if kind == LEGACY_BLOCK:
            sim.record(self, LEGACY_BLOCK, f"{src.name}->{self.name}")
            self.learn(sim, payload, "legacy", src)
        else:
            super().on_logical(sim, kind, src, payload)


class RelayClientNode(LegacyClientNode):
    """Client classique etendu du protocole des relais."""

    ROLE = "client"

    def __init__(self, name: str, ip: str, port: int = 8333, start_ms: int = 0):
        super().__init__(name, ip, port)
        self.client = RelayClient(ip, port)
        self.relay_nodes = {}
        self.start_ms = start_ms
        self.started = False

    def attach(self, relay_node: "RelayNode"):
        self.client.add_relay(relay_node.address)
        self.relay_nodes[relay_node.address] = relay_node

    def start(self, sim):
        if self.start_ms:
            sim.schedule_timer(self, self.start_ms)
        else:
            self.started = True
            self._apply(sim, self.client.start(sim.now))

    def _apply(self, sim, out):
        for dst, message in out.messages:
            sim.send_datagram(self, Datagram(self.address, dst, message))
        for relay_address, block in out.uploads:
            sim.send_logical(UPLOAD, self, self.relay_nodes[relay_address], block)
        for block_hash, data in out.completed:
            block = Block.from_bytes(data)
            if block.hash != block_hash:
                sim.metrics.corrupted_downloads += 1
                self.logger.warning(f"{self.name} : bloc reassemble incoherent.")
                continue
            self.learn(sim, block, "relay")
        if out.wakeup is not None:
            sim.schedule_timer(self, out.wakeup)

    def learn(self, sim, block: Block, via: str, src=None):
        learned = super().learn(sim, block, via, src)
        if learned and via != "relay":
            self._apply(sim, self.client.step(LocalNewBlock(sim.now, block)))
        return learned

    def on_datagram(self, sim, datagram):
        self._apply(sim, self.client.step(Inbound(sim.now, datagram.src, datagram.message)))

    def on_timer(self, sim):
        if not self.started and sim.now >= self.start_ms:
            self.started = True
            self._apply(sim, self.client.start(sim.now))
            return
        self._apply(sim, self.client.step(Timer(sim.now)))


class RelayNode(BaseNode):
    """Relais : switch (plan de donnees) et controleur (validation, INV)."""

    ROLE = "relay"

    def __init__(self, name: str, ip: str, port: int = 8333, switch_config=None, seed: int = 0,
                 inv_repeats: int = 1, inv_interval_ms: int = 500, inv_on_connect: bool = False):
        super().__init__(name, ip, port)
        self.switch = RelaySwitch(ip, port, switch_config, seed=seed)
        self.controller = RelayController(self.switch, inv_repeats=inv_repeats,
                                          inv_interval_ms=inv_interval_ms,
                                          inv_on_connect=inv_on_connect)
        self.peers = []

    def on_datagram(self, sim, datagram):
        out = self.switch.handle_packet(datagram.src, datagram.message, sim.now)
        for dgram in out.datagrams:
            sim.send_datagram(self, dgram)
        for note in out.notes:
            for dgram in self.controller.on_nconn(note, sim.now):
                sim.send_datagram(self, dgram)
        sim.sample_relay(self)

    def on_logical(self, sim, kind, src, payload):
        if kind == UPLOAD:
            sim.record(self, UPLOAD, src.name)
            if not self.switch.admits_controller_traffic(src.ip, sim.now):
                sim.record(self, "upload_refused", src.name)
                return
            self.accept_block(sim, payload)
        elif kind == OVERLAY:
            sim.record(self, OVERLAY, src.name)
            self.accept_block(sim, payload)
        else:
            super().on_logical(sim, kind, src, payload)

    def accept_block(self, sim, block: Block):
        out = self.controller.on_new_block(block, sim.now)
        if not out.accepted:
            if out.verdict is not None:
                sim.record(self, "invalid", repr(out.verdict))
            return
        sim.record(self, "validated", block.short_hash())
        upd, blks = out.switch_messages[0], out.switch_messages[1:]
        if not self.switch.apply_update(upd, blks):
            return
        sim.record(self, "upd", f"{upd.seg_count} segments")
        for dgram in out.datagrams:
            sim.send_datagram(self, dgram)
        for peer in self.peers:
            sim.send_logical(OVERLAY, self, peer, block)
        self._schedule(sim)
        sim.sample_relay(self)

    def _schedule(self, sim):
        wakeup = self.controller.next_wakeup()
        if wakeup is not None:
            sim.schedule_timer(self, wakeup)

    def on_timer(self, sim):
        for dgram in self.controller.on_timer(sim.now):
            sim.send_datagram(self, dgram)
        self._schedule(sim)


class AbuserNode(BaseNode):
    """Client connecte qui redemande le bloc complet plusieurs fois par epoque."""

    ROLE = "abuser"

    def __init__(self, name: str, ip: str, relay: RelayNode, repeats: int = 10, port: int = 8333):
        super().__init__(name, ip, port)
        self.relay = relay
        self.repeats = repeats
        self.requests = 0
        self.segments_received = 0
        self.attempts = 0
        self.served = False

    def start(self, sim):
        self.on_timer(sim)

    def on_timer(self, sim):
        if self.served or self.attempts >= RelayClient.MAX_RETRIES:
            return
        self.attempts += 1
        sim.send_datagram(self, Datagram(self.address, self.relay.address, Syn()))
        sim.schedule_timer(self, sim.now + RelayClient.backoff(self.attempts))

    def on_datagram(self, sim, datagram):
        message = datagram.message
        if isinstance(message, SynAck):
            sim.send_datagram(self, Datagram(self.address, self.relay.address, Ack(message.secret)))
        elif isinstance(message, Blk):
            self.segments_received += 1
        elif isinstance(message, Inv) and not self.served:
            self.served = True
            for _ in range(self.repeats):
                for seg_id in range(message.seg_count):
                    self.requests += 1
                    sim.send_datagram(self, Datagram(self.address, self.relay.address,
                                                     GetSeg(message.block_hash, seg_id)))
