"""
netsim/simulator.py
-------------------
Boucle d'evenements discrets (temps logique en millisecondes entieres) qui
relie clients, relais et adversaire, et collecte les metriques.

Deux types de transport :
- datagrammes UDP (protocole des relais) : delai et perte i.i.d. par lien ;
- transferts logiques fiables (blocs classiques, televersement vers le
  controleur, diffusion entre relais) : delai du lien, sans perte.
L'adversaire s'applique aux deux. Une seule source d'aleatoire, graine fixe.
"""

import heapq
import ipaddress
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import pandas as pd

from models.block import GENESIS_HASH, HEADER_SIZE, mine_block
from models.errors import ScenarioConfigError
from netsim.adversary import build_adversary
from netsim.nodes import AbuserNode, LegacyClientNode, RelayNode, RelayClientNode
from netsim.scenario import LinkParams, NodeSpec, ScenarioConfig
from relay.checksum import udp_checksum
from relay.switch import Datagram
from relay.wire import Ack, Adv, Blk, GetSeg, Syn, encode

logger = logging.getLogger(__name__)

EXTERNAL = "external"
CONNECTED = "connected"
PARTITIONED = "partitioned"


# =====================================================================
# METRIQUES
# =====================================================================

@dataclass
class Metrics:
    """
    Resultats d'une execution.

    Attributs :
        arrivals            : noeud -> instant d'arrivee du bloc de test
        roles               : noeud -> role
        links               : (source, destination) -> compteurs sent/delivered/dropped/in_flight
        verdict             : "connected" si tous les clients ont recu le bloc, sinon "partitioned"
        timeline            : (instant, relais, whitelist, blacklist, pairs)
        checksum_checked    : BLK emis verifies contre un calcul complet
        checksum_mismatches : BLK dont le checksum differe
        corrupted_downloads : reassemblages incoherents
        failed_downloads    : clients ayant abandonne un telechargement
        trace               : (instant, noeud, evenement, detail)
        extras              : compteurs propres au scenario (DDoS)
    """
    arrivals: dict = field(default_factory=dict)
    roles: dict = field(default_factory=dict)
    links: dict = field(default_factory=dict)
    verdict: str = PARTITIONED
    timeline: list = field(default_factory=list)
    checksum_checked: int = 0
    checksum_mismatches: int = 0
    corrupted_downloads: int = 0
    failed_downloads: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    block_hash: Optional[bytes] = None
    end_ms: int = 0

    def arrivals_frame(self) -> pd.DataFrame:
        rows = [(name, role, self.arrivals.get(name)) for name, role in sorted(self.roles.items())
                if role != "relay"]
        frame = pd.DataFrame(rows, columns=["node", "role", "arrival_ms"])
        frame["arrival_ms"] = frame["arrival_ms"].astype("Int64")
        return frame

    def links_frame(self) -> pd.DataFrame:
        rows = [(src, dst, c["sent"], c["delivered"], c["dropped"], c["in_flight"])
                for (src, dst), c in sorted(self.links.items())]
        return pd.DataFrame(rows, columns=["src", "dst", "sent", "delivered", "dropped", "in_flight"])

    def timeline_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.timeline, columns=["time_ms", "relay", "whitelist", "blacklist", "peers"])

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.trace, columns=["time_ms", "node", "event", "detail"])

    def summary(self) -> dict:
        clients = [n for n, r in self.roles.items() if r in ("legacy", "client")]
        summary = {
            "verdict": self.verdict,
            "clients": len(clients),
            "clients_with_block": sum(1 for n in clients if n in self.arrivals),
            "checksum_checked": self.checksum_checked,
            "checksum_mismatches": self.checksum_mismatches,
            "failed_downloads": len(self.failed_downloads),
            "end_ms": self.end_ms,
        }
        summary.update(self.extras)
        return summary


# =====================================================================
# SIMULATEUR
# =====================================================================

class Simulator:
    """
    Boucle d'evenements.

    Attributs :
        now       : horloge logique (ms)
        nodes     : nom -> noeud
        by_ip     : adresse -> noeud
        adversary : politique de suppression
        rng       : aleatoire unique (pertes)
        metrics   : Metrics
    """

    def __init__(self, config: ScenarioConfig, adversary=None):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.config = config
        self.now = 0
        self.rng = random.Random(config.seed)
        self.nodes = {}
        self.by_ip = {}
        self.adversary = adversary
        self.metrics = Metrics()
        self._queue = []
        self._seq = 0
        self._relay_samples = {}

    # -----------------------------------------------------------------
    # Construction
    # -----------------------------------------------------------------

    def add_node(self, node):
        if node.name in self.nodes or node.ip in self.by_ip:
            raise ScenarioConfigError(f"noeud en double : {node.name} ({node.ip})")
        self.nodes[node.name] = node
        self.by_ip[node.ip] = node
        self.metrics.roles[node.name] = node.ROLE

    def node_for_ip(self, ip: str):
        node = self.by_ip.get(ip)
        if node is not None:
            return node
        address = ipaddress.ip_address(ip)
        for candidate in self.nodes.values():
            if isinstance(candidate, RelayNode) and address in candidate.switch.prefix:
                return candidate
        return None

    # -----------------------------------------------------------------
    # Evenements
    # -----------------------------------------------------------------

    def _push(self, at: int, kind: str, payload: tuple):
        self._seq += 1
        heapq.heappush(self._queue, (at, self._seq, kind, payload))

    def schedule_timer(self, node, at: int):
        at = max(at, self.now)
        if at in node.scheduled:
            return
        node.scheduled.add(at)
        self._push(at, "timer", (node,))

    def schedule_call(self, at: int, callback, *args):
        self._push(at, "call", (callback, args))

    def _counters(self, src_name: str, dst_name: str) -> Counter:
        key = (src_name, dst_name)
        if key not in self.metrics.links:
            self.metrics.links[key] = Counter(sent=0, delivered=0, dropped=0, in_flight=0)
        return self.metrics.links[key]

    def _link(self, src_name: str, dst_name: str) -> LinkParams:
        return self.config.link_params(src_name, dst_name)

    def send_datagram(self, src_node, datagram: Datagram, lossy: bool = True):
        """Emission d'un datagramme : adversaire, perte, puis livraison apres le delai du lien."""
        message = datagram.message
        if isinstance(message, Blk) and datagram.checksum is not None:
            self.metrics.checksum_checked += 1
            expected = udp_checksum(datagram.src[0], datagram.dst[0], datagram.src[1],
                                    datagram.dst[1], encode(message))
            if expected != datagram.checksum:
                self.metrics.checksum_mismatches += 1

        src_name = src_node.name if src_node is not None else EXTERNAL
        dst_node = self.node_for_ip(datagram.dst[0])
        dst_name = dst_node.name if dst_node is not None else EXTERNAL
        counters = self._counters(src_name, dst_name)
        counters["sent"] += 1

        if dst_node is None or (self.adversary is not None and self.adversary.drops(
                src_name, dst_name, datagram.src[0], datagram.dst[0])):
            counters["dropped"] += 1
            return
        params = self._link(src_name, dst_name)
        if lossy and params.loss and self.rng.random() < params.loss:
            counters["dropped"] += 1
            return
        counters["in_flight"] += 1
        self._push(self.now + params.delay_ms, "datagram", (src_name, dst_node, datagram))

    def send_logical(self, kind: str, src_node, dst_node, payload):
        """Transfert fiable (bloc classique, televersement, diffusion entre relais)."""
        counters = self._counters(src_node.name, dst_node.name)
        counters["sent"] += 1
        if self.adversary is not None and self.adversary.drops(src_node.name, dst_node.name,
                                                               src_node.ip, dst_node.ip):
            counters["dropped"] += 1
            return
        counters["in_flight"] += 1
        params = self._link(src_node.name, dst_node.name)
        self._push(self.now + params.delay_ms, "logical", (kind, src_node, dst_node, payload))

    def record(self, node, event: str, detail: str = ""):
        if self.config.trace:
            self.metrics.trace.append((self.now, node.name, event, detail))

    def learned(self, node, block_hash: bytes, via: str):
        if block_hash == self.metrics.block_hash and node.name not in self.metrics.arrivals:
            self.metrics.arrivals[node.name] = self.now
            self.record(node, "learned", via)

    def sample_relay(self, relay: RelayNode):
        sample = (len(relay.switch.whitelist), relay.switch.blacklist.inserted, len(relay.controller.peers))
        if self._relay_samples.get(relay.name) != sample:
            self._relay_samples[relay.name] = sample
            self.metrics.timeline.append((self.now, relay.name) + sample)

    def run(self, stop_ms: int) -> Metrics:
        for name in sorted(self.nodes):
            self.nodes[name].start(self)
        while self._queue and self._queue[0][0] <= stop_ms:
            at, _, kind, payload = heapq.heappop(self._queue)
            self.now = at
            if kind == "datagram":
                src_name, dst_node, datagram = payload
                counters = self._counters(src_name, dst_node.name)
                counters["in_flight"] -= 1
                counters["delivered"] += 1
                if self.config.trace:
                    self.record(dst_node, type(datagram.message).__name__.lower(), src_name)
                dst_node.on_datagram(self, datagram)
            elif kind == "logical":
                event, src_node, dst_node, data = payload
                counters = self._counters(src_node.name, dst_node.name)
                counters["in_flight"] -= 1
                counters["delivered"] += 1
                dst_node.on_logical(self, event, src_node, data)
            elif kind == "timer":
                (node,) = payload
                node.scheduled.discard(at)
                node.on_timer(self)
            else:
                callback, args = payload
                callback(*args)
        self.metrics.end_ms = self.now
        self._finish()
        return self.metrics

    def _finish(self):
        clients = [n for n in self.nodes.values() if isinstance(n, LegacyClientNode)]
        everyone = all(n.name in self.metrics.arrivals for n in clients)
        self.metrics.verdict = CONNECTED if everyone else PARTITIONED
        for node in clients:
            if isinstance(node, RelayClientNode):
                for block_hash, download in node.client.downloads.items():
                    if download.status.value == "failed":
                        self.metrics.failed_downloads.append((node.name, block_hash.hex()))


# =====================================================================
# CONSTRUCTION D'UN SCENARIO
# =====================================================================

def _make_node(spec: NodeSpec, config: ScenarioConfig, index: int):
    if spec.role == "relay":
        return RelayNode(spec.name, spec.ip, spec.port, config.switch_config(spec),
                         seed=config.seed * 1000 + index, inv_repeats=spec.inv_repeats,
                         inv_interval_ms=spec.inv_interval_ms, inv_on_connect=spec.inv_on_connect)
    if spec.role == "client":
        return RelayClientNode(spec.name, spec.ip, spec.port, start_ms=spec.start_ms)
    return LegacyClientNode(spec.name, spec.ip, spec.port)


def make_test_block(config: ScenarioConfig):
    """Bloc de test deterministe (corps tire de la graine, nonce cherche par force brute)."""
    spec = config.block
    body_rng = random.Random(f"block:{config.seed}")
    body = body_rng.randbytes(max(0, spec.size_bytes - HEADER_SIZE))
    block = mine_block(GENESIS_HASH, body, 2 ** spec.target_exp, timestamp=spec.timestamp)
    if block is None:
        raise ScenarioConfigError(f"aucun nonce ne satisfait la cible 2^{spec.target_exp}")
    return block


def build_simulator(config: ScenarioConfig) -> Simulator:
    relay_ips = {n.name: n.ip for n in config.nodes if n.role == "relay"}
    sim = Simulator(config, build_adversary(config.adversary, relay_ips))
    for index, spec in enumerate(config.nodes):
        sim.add_node(_make_node(spec, config, index))
    for spec in config.nodes:
        node = sim.nodes[spec.name]
        if spec.role == "client":
            for relay_name in spec.relays:
                node.attach(sim.nodes[relay_name])
        if spec.role == "relay":
            node.peers = [sim.nodes[name] for name in spec.peers]
    for a, b in config.legacy_links:
        sim.nodes[a].neighbors.append(sim.nodes[b])
        sim.nodes[b].neighbors.append(sim.nodes[a])

    if config.block is not None:
        block = make_test_block(config)
        sim.metrics.block_hash = block.hash
        miner = sim.nodes[config.block.miner]
        sim.schedule_call(config.block.at_ms, lambda: miner.mine(sim, block))
    return sim


def run_scenario(config: ScenarioConfig) -> Metrics:
    """
    Execute un scenario jusqu'a stop_ms (ou epuisement des evenements).

    Returns:
        Metrics avec le verdict de partition.
    """
    sim = build_simulator(config)
    metrics = sim.run(config.stop_ms)
    logger.info(f"Scenario {config.name} : {metrics.verdict}, "
                f"{len(metrics.arrivals)} noeuds ont recu le bloc.")
    return metrics


# =====================================================================
# DDOS
# =====================================================================

SPOOF_NETWORK = ipaddress.ip_network("100.64.0.0/10")
BENIGN_NETWORK = ipaddress.ip_network("10.200.0.0/16")
ABUSER_NETWORK = ipaddress.ip_network("10.201.0.0/16")


def _spoofed_packet(rng: random.Random, attacker_count: int, block_hash: bytes, dst: tuple) -> Datagram:
    source = str(SPOOF_NETWORK.network_address + 1 + rng.randrange(attacker_count))
    port = rng.randrange(1024, 65536)
    choice = rng.randrange(4)
    if choice == 0:
        message = Syn()
    elif choice == 1:
        message = Ack(rng.getrandbits(32))
    elif choice == 2:
        message = GetSeg(block_hash, rng.randrange(4))
    else:
        message = Adv(rng.randbytes(32))
    return Datagram((source, port), dst, message)


def ddos_scenario(config: ScenarioConfig, attacker_rate: int = 10, attacker_count: int = 100_000) -> Metrics:
    """
    Scenario de deni de service contre le premier relais du scenario.

    Ajoute les clients legitimes (ddos.benign_clients) et les clients abusifs
    (ddos.abusers, connectes, qui redemandent le bloc abuse_repeats fois),
    puis inonde le relais de SYN/ACK/GET_SEG/ADV depuis des adresses usurpees :
    attacker_rate paquets par milliseconde entre ddos.start_ms et
    ddos.start_ms + ddos.duration_ms.

    Returns:
        Metrics ; extras contient le taux de service des clients legitimes.
    """
    if attacker_rate < 0 or attacker_count < 1:
        raise ScenarioConfigError(f"attaque invalide : rate={attacker_rate}, count={attacker_count}")
    relays = config.names("relay")
    if not relays:
        raise ScenarioConfigError("le scenario DDoS requiert un relais")
    params = config.ddos
    benign_count = int(params.get("benign_clients", 100))
    abuser_count = int(params.get("abusers", 3))
    repeats = int(params.get("abuse_repeats", 10))
    start_ms = int(params.get("start_ms", 1000))
    duration_ms = int(params.get("duration_ms", 1000))

    sim = build_simulator(config)
    relay = sim.nodes[relays[0]]

    benign = []
    for i in range(benign_count):
        node = RelayClientNode(f"benign{i}", str(BENIGN_NETWORK.network_address + 1 + i),
                               start_ms=(i * 7) % 500)
        node.attach(relay)
        sim.add_node(node)
        benign.append(node)
    abusers = []
    for i in range(abuser_count):
        node = AbuserNode(f"abuser{i}", str(ABUSER_NETWORK.network_address + 1 + i), relay, repeats)
        sim.add_node(node)
        abusers.append(node)

    attack_rng = random.Random(f"ddos:{config.seed}")
    target_hash = sim.metrics.block_hash or bytes(32)
    spoofed = 0
    for tick in range(duration_ms):
        for _ in range(attacker_rate):
            dgram = _spoofed_packet(attack_rng, attacker_count, target_hash, relay.address)
            sim.schedule_call(start_ms + tick, sim.send_datagram, None, dgram, False)
            spoofed += 1

    metrics = sim.run(config.stop_ms)
    completed = sum(1 for node in benign if node.name in metrics.arrivals)
    switch = relay.switch
    metrics.extras.update({
        "spoofed_packets": spoofed,
        "benign_clients": benign_count,
        "benign_completed": completed,
        "benign_service_ratio": completed / benign_count if benign_count else 1.0,
        "abusers": abuser_count,
        "abusers_blacklisted": sum(1 for node in abusers if node.ip in switch.blacklist),
        "benign_blacklisted": sum(1 for node in benign if node.ip in switch.blacklist),
        "abuser_requests": sum(node.requests for node in abusers),
        "abuser_max_segments": max((node.segments_received for node in abusers), default=0),
        "sentlimit_threshold": switch.sentlimit_threshold(),
        "blacklist_drops": switch.stats["drop_blacklist"],
        "handshakes_completed": switch.stats["connected"],
        "whitelist_size": len(switch.whitelist),
    })
    logger.info(f"DDoS : {completed}/{benign_count} clients legitimes servis, "
                f"{metrics.extras['abusers_blacklisted']}/{abuser_count} abuseurs bannis.")
    return metrics
