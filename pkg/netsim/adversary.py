"""
netsim/adversary.py
-------------------
Politiques de l'attaquant reseau : elles decident, pour chaque paquet ou
transfert logique, s'il est supprime. Le reste du trafic est transmis
normalement.
"""

import ipaddress

from models.errors import ScenarioConfigError


class AdversaryPolicy:
    """Politique neutre : aucun paquet n'est supprime."""

    def drops(self, src_name: str, dst_name: str, src_ip: str, dst_ip: str) -> bool:
        return False

    def __repr__(self):
        return f"{self.__class__.__name__}()"


class DropCrossing(AdversaryPolicy):
    """Supprime le trafic dont une extremite est dans S et l'autre dans N."""

    def __init__(self, side_s, side_n):
        self.side_s = frozenset(side_s)
        self.side_n = frozenset(side_n)

    def drops(self, src_name, dst_name, src_ip, dst_ip) -> bool:
        return ((src_name in self.side_s and dst_name in self.side_n)
                or (src_name in self.side_n and dst_name in self.side_s))

    def __repr__(self):
        return f"DropCrossing(S={sorted(self.side_s)}, N={sorted(self.side_n)})"


class DropByRelayIP(AdversaryPolicy):
    """
    Supprime les paquets dont l'adresse source et/ou destination est celle d'un relais.

    Attributs :
        addresses : adresses publiques connues des relais
        match     : "source", "destination" ou "both"
    """

    def __init__(self, addresses, match: str = "both"):
        self.addresses = frozenset(ipaddress.ip_address(a) for a in addresses)
        self.match = match

    def drops(self, src_name, dst_name, src_ip, dst_ip) -> bool:
        source = ipaddress.ip_address(src_ip) in self.addresses
        destination = ipaddress.ip_address(dst_ip) in self.addresses
        if self.match == "source":
            return source
        if self.match == "destination":
            return destination
        return source or destination

    def __repr__(self):
        return f"DropByRelayIP({sorted(str(a) for a in self.addresses)}, match={self.match})"


def build_adversary(spec, relay_ips: dict) -> AdversaryPolicy:
    """
    Construit la politique decrite dans un scenario.

    Args:
        spec: Dictionnaire "adversary" du scenario (ou None).
        relay_ips: nom de relais -> adresse IP.
    """
    if not spec or spec.get("type") in (None, "none"):
        return AdversaryPolicy()
    kind = spec["type"]
    if kind == "drop_crossing":
        return DropCrossing(spec.get("side_s", []), spec.get("side_n", []))
    if kind == "drop_by_relay_ip":
        names = spec.get("relays") or sorted(relay_ips)
        return DropByRelayIP([relay_ips[name] for name in names], spec.get("match", "both"))
    raise ScenarioConfigError(f"adversaire inconnu : {kind}")
