"""
netsim/scenario.py
------------------
Chargement et validation des fichiers de scenario (JSON).

Schema (cles de premier niveau) :
    name, seed, stop_ms, trace
    link          : {"delay_ms": int, "loss": float}      parametres par defaut
    links         : [{"a", "b", "delay_ms", "loss"}]       surcharges par paire
    nodes         : [{"name", "role", "ip", ...}]          role = legacy | client | relay
    legacy_links  : [["a", "b"], ...]                      liens Bitcoin classiques
    block         : {"miner", "at_ms", "size_bytes", "target_exp", "timestamp"}
    adversary     : null | {"type": "drop_crossing", "side_s", "side_n"}
                         | {"type": "drop_by_relay_ip", "relays", "match"}
    switch        : surcharges de SwitchConfig communes a tous les relais
    ddos          : {"benign_clients", "abusers", "abuse_repeats", "duration_ms", "start_ms"}
"""

import json
import ipaddress
from dataclasses import dataclass, field
from typing import Optional

from models.errors import ScenarioConfigError
from relay.switch import SwitchConfig

ROLES = ("legacy", "client", "relay")


@dataclass(frozen=True)
class LinkParams:
    delay_ms: int = 10
    loss: float = 0.0

    def __post_init__(self):
        if self.delay_ms < 0 or not 0.0 <= self.loss < 1.0:
            raise ScenarioConfigError(f"parametres de lien invalides : {self}")


@dataclass
class NodeSpec:
    """
    Description d'un noeud.

    Attributs :
        name, role, ip, port : identite du noeud
        relays               : relais utilises (role client)
        peers                : relais pairs pour la diffusion entre relais (role relay)
        start_ms             : instant de la premiere poignee de main (role client)
        inv_repeats, inv_interval_ms, inv_on_connect : options du controleur
        source_ip_rotation   : rotation de l'adresse source du switch
    """
    name: str
    role: str
    ip: str
    port: int = 8333
    relays: list = field(default_factory=list)
    peers: list = field(default_factory=list)
    start_ms: int = 0
    inv_repeats: int = 1
    inv_interval_ms: int = 500
    inv_on_connect: bool = False
    source_ip_rotation: Optional[bool] = None


@dataclass
class BlockSpec:
    miner: str
    at_ms: int = 1000
    size_bytes: int = 2000
    target_exp: int = 248
    timestamp: int = 0


@dataclass
class ScenarioConfig:
    """Scenario complet ; toute l'aleatoire derive de seed."""
    name: str
    nodes: list
    block: Optional[BlockSpec] = None
    seed: int = 0
    stop_ms: int = 60_000
    trace: bool = True
    link: LinkParams = field(default_factory=LinkParams)
    links: dict = field(default_factory=dict)
    legacy_links: list = field(default_factory=list)
    adversary: Optional[dict] = None
    switch: dict = field(default_factory=dict)
    ddos: dict = field(default_factory=dict)

    # -----------------------------------------------------------------
    # Chargement
    # -----------------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        try:
            nodes = [NodeSpec(**spec) for spec in data.get("nodes", [])]
            block = BlockSpec(**data["block"]) if data.get("block") else None
            link = LinkParams(**data.get("link", {}))
            links = {}
            for override in data.get("links", []):
                override = dict(override)
                key = frozenset((override.pop("a"), override.pop("b")))
                links[key] = LinkParams(**override)
        except (TypeError, KeyError) as exc:
            raise ScenarioConfigError(f"scenario mal forme : {exc}") from None

        config = cls(
            name=data.get("name", "scenario"),
            nodes=nodes,
            block=block,
            seed=int(data.get("seed", 0)),
            stop_ms=int(data.get("stop_ms", 60_000)),
            trace=bool(data.get("trace", True)),
            link=link,
            links=links,
            legacy_links=[tuple(pair) for pair in data.get("legacy_links", [])],
            adversary=data.get("adversary"),
            switch=dict(data.get("switch", {})),
            ddos=dict(data.get("ddos", {})),
        )
        config.validate()
        return config

    @classmethod
    def from_json(cls, path: str) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    # -----------------------------------------------------------------
    # Validation
    # -----------------------------------------------------------------

    def node(self, name: str) -> NodeSpec:
        for spec in self.nodes:
            if spec.name == name:
                return spec
        raise ScenarioConfigError(f"noeud inconnu : {name}")

    def names(self, role: str = None) -> list:
        return [n.name for n in self.nodes if role is None or n.role == role]

    def link_params(self, a: str, b: str) -> LinkParams:
        return self.links.get(frozenset((a, b)), self.link)

    def switch_config(self, spec: NodeSpec) -> SwitchConfig:
        overrides = dict(self.switch)
        if spec.source_ip_rotation is not None:
            overrides["source_ip_rotation"] = spec.source_ip_rotation
        return SwitchConfig.from_dict(overrides)

    def validate(self):
        """Roles coherents, noms et adresses uniques, ensembles de l'adversaire disjoints."""
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise ScenarioConfigError("noms de noeuds dupliques")
        ips = [n.ip for n in self.nodes]
        if len(set(ips)) != len(ips):
            raise ScenarioConfigError("adresses IP dupliquees")
        relay_nets = {}
        for spec in self.nodes:
            if spec.role not in ROLES:
                raise ScenarioConfigError(f"role inconnu pour {spec.name} : {spec.role}")
            try:
                ipaddress.IPv4Address(spec.ip)
            except ValueError:
                raise ScenarioConfigError(f"adresse invalide pour {spec.name} : {spec.ip}") from None
            if spec.role == "relay":
                net = ipaddress.ip_network(f"{spec.ip}/24", strict=False)
                if net in relay_nets:
                    raise ScenarioConfigError(f"{spec.name} et {relay_nets[net]} partagent le meme /24")
                relay_nets[net] = spec.name

        relays = set(self.names("relay"))
        for spec in self.nodes:
            if spec.relays and spec.role != "client":
                raise ScenarioConfigError(f"{spec.name} ({spec.role}) ne peut pas utiliser de relais")
            if spec.peers and spec.role != "relay":
                raise ScenarioConfigError(f"{spec.name} ({spec.role}) ne peut pas avoir de relais pairs")
            for ref in list(spec.relays) + list(spec.peers):
                if ref not in relays:
                    raise ScenarioConfigError(f"{spec.name} reference {ref}, qui n'est pas un relais")
            if spec.role == "client":
                for ref in spec.relays:
                    net = ipaddress.ip_network(f"{self.node(ref).ip}/24", strict=False)
                    if ipaddress.ip_address(spec.ip) in net:
                        raise ScenarioConfigError(f"{spec.name} est dans le /24 du relais {ref}")

        for a, b in self.legacy_links:
            for end in (a, b):
                if self.node(end).role == "relay":
                    raise ScenarioConfigError(f"lien classique vers le relais {end}")
            if a == b:
                raise ScenarioConfigError(f"lien classique en boucle sur {a}")

        if self.block is not None and self.node(self.block.miner).role == "relay":
            raise ScenarioConfigError("le mineur doit etre un client")

        if self.adversary:
            self._validate_adversary(relays)

    def _validate_adversary(self, relays: set):
        kind = self.adversary.get("type")
        if kind == "drop_crossing":
            side_s = set(self.adversary.get("side_s", []))
            side_n = set(self.adversary.get("side_n", []))
            if side_s & side_n:
                raise ScenarioConfigError(f"ensembles S et N non disjoints : {sorted(side_s & side_n)}")
            for name in side_s | side_n:
                self.node(name)
        elif kind == "drop_by_relay_ip":
            for name in self.adversary.get("relays", []):
                if name not in relays:
                    raise ScenarioConfigError(f"{name} n'est pas un relais")
            if self.adversary.get("match", "both") not in ("source", "destination", "both"):
                raise ScenarioConfigError(f"mode de filtrage inconnu : {self.adversary.get('match')}")
        elif kind not in (None, "none"):
            raise ScenarioConfigError(f"adversaire inconnu : {kind}")
