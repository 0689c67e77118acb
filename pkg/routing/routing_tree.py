"""
routing/routing_tree.py
-----------------------
Calcul des arbres de routage sous les regles de selection et d'export
Gao-Rexford, en trois phases :
1. routes client : parcours vers le haut (liens fournisseur) depuis les origines
2. routes pair : un seul saut de peering depuis une route client ou une origine
3. routes fournisseur : parcours vers le bas (liens client), par longueur croissante

Chaque AS adopte la premiere (meilleure) route offerte selon
(classe, longueur, departage). Plusieurs origines etiquetees sont traitees
en une seule passe.
"""

import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import pandas as pd

from models.as_graph import ASGraph
from routing.policy import FAVOR_ATTACKER, Label, RouteClass, TieBreak

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RouteRecord:
    """Route retenue par un AS : chemin (AS detenteur -> origine), classe, etiquette."""
    path: tuple
    route_class: Optional[RouteClass]
    label: object

    @property
    def holder(self) -> int:
        return self.path[0]

    @property
    def origin(self) -> int:
        return self.path[-1]

    @property
    def next_hop(self) -> Optional[int]:
        return self.path[1] if len(self.path) > 1 else None

    @property
    def length(self) -> int:
        return len(self.path) - 1

    @property
    def is_origin(self) -> bool:
        return self.route_class is None

    def __repr__(self):
        cls = self.route_class.name.lower() if self.route_class else "origin"
        return f"Route({'>'.join(map(str, self.path))}, {cls}, {self.label})"


def preference_key(record: RouteRecord, tie_break: TieBreak) -> tuple:
    """Cle de tri : la plus petite est la route preferee par son detenteur."""
    if record.is_origin:
        return (-(RouteClass.CUSTOMER + 1), 0, 0, -1, "")
    return (
        -int(record.route_class),
        record.length,
        tie_break.rank(record.holder, record.label),
        record.next_hop,
        str(record.label),
    )


@dataclass
class RoutingOutcome:
    """
    Resultat d'un calcul d'arbre de routage.

    Attributs :
        origins : AS d'origine -> etiquette
        records : AS -> route retenue (absent = injoignable)
    """
    origins: dict
    records: dict = field(default_factory=dict)

    def route(self, asn: int) -> Optional[RouteRecord]:
        return self.records.get(asn)

    def is_reachable(self, asn: int) -> bool:
        return asn in self.records

    def label_of(self, asn: int):
        record = self.records.get(asn)
        return record.label if record else None

    def unreachable(self, graph: ASGraph) -> frozenset:
        return frozenset(a for a in graph.ases if a not in self.records)

    def path(self, asn: int) -> Optional[tuple]:
        record = self.records.get(asn)
        return record.path if record else None

    def to_frame(self) -> pd.DataFrame:
        """Une ligne par AS joignable : asn, class, path, label."""
        rows = []
        for asn in sorted(self.records):
            record = self.records[asn]
            rows.append({
                "asn": asn,
                "class": record.route_class.name.lower() if record.route_class else "origin",
                "path": " ".join(str(a) for a in record.path),
                "label": str(getattr(record.label, "value", record.label)),
            })
        return pd.DataFrame(rows, columns=["asn", "class", "path", "label"])

    def __repr__(self):
        return f"RoutingOutcome(origins={sorted(self.origins)}, reachable={len(self.records)})"


# =====================================================================
# CALCUL DE L'ARBRE
# =====================================================================

def routing_tree(graph: ASGraph, origins: Iterable, tie_break: TieBreak = FAVOR_ATTACKER) -> RoutingOutcome:
    """
    Calcule les routes retenues vers un ensemble d'origines etiquetees.

    Args:
        graph: Topologie AS.
        origins: Couples (asn, etiquette) ; un entier seul vaut (asn, LEGIT).
        tie_break: Regle de departage.

    Returns:
        RoutingOutcome (les AS non atteints sont injoignables).
    """
    labelled = {}
    for item in origins:
        asn, label = (item, Label.LEGIT) if isinstance(item, int) else item
        if asn in labelled and labelled[asn] != label:
            raise ValueError(f"l'AS {asn} figure deux fois parmi les origines")
        labelled[asn] = label
    if not labelled:
        raise ValueError("au moins une origine est requise")

    records = {asn: RouteRecord((asn,), None, label) for asn, label in labelled.items()}

    def offer(heap, length, target, via):
        label = records[via].label
        heapq.heappush(heap, (length, tie_break.rank(target, label), via, str(label), target))

    # Phase 1 : routes client (vers le haut)
    heap = []
    for asn in sorted(labelled):
        for provider in graph.providers(asn):
            if provider not in records:
                offer(heap, 1, provider, asn)
    while heap:
        length, _, via, _, target = heapq.heappop(heap)
        if target in records:
            continue
        records[target] = RouteRecord((target,) + records[via].path, RouteClass.CUSTOMER, records[via].label)
        for provider in graph.providers(target):
            if provider not in records:
                offer(heap, length + 1, provider, target)

    # Phase 2 : un saut de peering depuis une route client ou une origine
    peer_routes = {}
    for via in sorted(records):
        via_record = records[via]
        for target in graph.peers(via):
            if target in records:
                continue
            candidate = RouteRecord((target,) + via_record.path, RouteClass.PEER, via_record.label)
            best = peer_routes.get(target)
            if best is None or preference_key(candidate, tie_break) < preference_key(best, tie_break):
                peer_routes[target] = candidate
    records.update(peer_routes)

    # Phase 3 : routes fournisseur (vers le bas), longueur croissante
    heap = []
    for via in sorted(records):
        for customer in graph.customers(via):
            if customer not in records:
                offer(heap, records[via].length + 1, customer, via)
    while heap:
        length, _, via, _, target = heapq.heappop(heap)
        if target in records:
            continue
        records[target] = RouteRecord((target,) + records[via].path, RouteClass.PROVIDER, records[via].label)
        for customer in graph.customers(target):
            if customer not in records:
                offer(heap, length + 1, customer, target)

    return RoutingOutcome(origins=labelled, records=records)


# =====================================================================
# OUTILS DE VERIFICATION
# =====================================================================

def link_class(graph: ASGraph, holder: int, neighbor: int) -> RouteClass:
    """Classe d'une route apprise par holder aupres de neighbor."""
    if neighbor in graph.customers(holder):
        return RouteClass.CUSTOMER
    if neighbor in graph.peers(holder):
        return RouteClass.PEER
    if neighbor in graph.providers(holder):
        return RouteClass.PROVIDER
    raise ValueError(f"les AS {holder} et {neighbor} ne sont pas voisins")


def hop_classes(graph: ASGraph, path) -> list:
    """Classe de chaque saut d'un chemin (detenteur -> origine)."""
    return [link_class(graph, a, b) for a, b in zip(path, path[1:])]


def is_valley_free(graph: ASGraph, path) -> bool:
    """Montee (fournisseurs), au plus un pair, puis descente (clients)."""
    phase = RouteClass.PROVIDER
    for hop in hop_classes(graph, path):
        if hop < phase:
            return False
        if hop == RouteClass.PEER and phase == RouteClass.PEER:
            return False
        phase = max(phase, hop)
    return True


def offered_routes(graph: ASGraph, outcome: RoutingOutcome, asn: int) -> list:
    """Routes exportees a asn par ses voisins, compte tenu de leur choix."""
    offers = []
    for neighbor in sorted(graph.neighbors(asn)):
        record = outcome.route(neighbor)
        if record is None or asn in record.path:
            continue
        learned_as = link_class(graph, asn, neighbor)
        exported_to_all = record.is_origin or record.route_class == RouteClass.CUSTOMER
        # un fournisseur exporte tout a ses clients, sinon seulement les routes client
        if learned_as != RouteClass.PROVIDER and not exported_to_all:
            continue
        offers.append(RouteRecord((asn,) + record.path, learned_as, record.label))
    return offers


def is_stable(graph: ASGraph, outcome: RoutingOutcome, tie_break: TieBreak = FAVOR_ATTACKER) -> bool:
    """Chaque AS retient la meilleure route que ses voisins lui exportent."""
    for asn in graph.ases:
        if asn in outcome.origins:
            continue
        offers = offered_routes(graph, outcome, asn)
        current = outcome.route(asn)
        if not offers:
            if current is not None:
                return False
            continue
        best = min(offers, key=lambda r: preference_key(r, tie_break))
        if current is None or current.path != best.path:
            return False
    return True


class TreeCache:
    """Memoisation des arbres a origine unique pour un graphe et un departage."""

    def __init__(self, graph: ASGraph, tie_break: TieBreak = FAVOR_ATTACKER):
        self.graph = graph
        self.tie_break = tie_break
        self._trees = {}

    def tree(self, origin: int) -> RoutingOutcome:
        if origin not in self._trees:
            self._trees[origin] = routing_tree(self.graph, [(origin, Label.LEGIT)], self.tie_break)
        return self._trees[origin]

    def __len__(self):
        return len(self._trees)
