"""
models/as_graph.py
------------------
Topologie au niveau AS : relations economiques (fournisseur-client, pair-pair)
et poids Bitcoin par AS (nombre de clients heberges).

Formats lus :
- fichier de relations CAIDA serial-2 : "<asn>|<asn>|<rel>[|<source>]"
  rel = -1 -> le premier AS est fournisseur du second, rel = 0 -> pairs
- fichier de poids CSV : "asn,count" (en-tete optionnel)
"""

import io
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Optional

import networkx as nx
import pandas as pd

from models.errors import (
    TopologyParseError,
    TopologyValidationError,
    UnknownASError,
)

logger = logging.getLogger(__name__)

MAX_ASN = 2 ** 32 - 1


class Relationship(Enum):
    """Type d'arete economique."""
    PROVIDER_CUSTOMER = -1
    PEER = 0


class Edge(NamedTuple):
    """Arete (a, b, rel). Pour PROVIDER_CUSTOMER, a est le fournisseur de b ;
    pour PEER, a < b."""
    a: int
    b: int
    rel: Relationship

    @classmethod
    def provider(cls, provider: int, customer: int) -> "Edge":
        return cls(provider, customer, Relationship.PROVIDER_CUSTOMER)

    @classmethod
    def peer(cls, x: int, y: int) -> "Edge":
        return cls(min(x, y), max(x, y), Relationship.PEER)

    def to_line(self) -> str:
        return f"{self.a}|{self.b}|{self.rel.value}"


# =====================================================================
# GRAPHE AS
# =====================================================================

@dataclass(frozen=True)
class ASGraph:
    """
    Graphe AS immuable.

    Attributs :
        ases    : ensemble des numeros d'AS
        edges   : aretes typees (une seule relation par paire d'AS)
        weights : nombre de clients Bitcoin par AS (0 si absent)
    """
    ases: frozenset
    edges: frozenset
    weights: Mapping = field(default_factory=dict)
    _providers: dict = field(init=False, repr=False, compare=False)
    _customers: dict = field(init=False, repr=False, compare=False)
    _peers: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ases = frozenset(self.ases)
        edges = frozenset(self.edges)
        providers = {asn: set() for asn in ases}
        customers = {asn: set() for asn in ases}
        peers = {asn: set() for asn in ases}
        pairs = {}

        for edge in edges:
            if edge.a == edge.b:
                raise TopologyValidationError(f"boucle sur l'AS {edge.a}")
            if edge.a not in ases or edge.b not in ases:
                raise TopologyValidationError(f"arete {edge.to_line()} hors de l'ensemble des AS")
            key = frozenset((edge.a, edge.b))
            if key in pairs:
                raise TopologyValidationError(
                    f"relations contradictoires : {pairs[key].to_line()} et {edge.to_line()}"
                )
            pairs[key] = edge
            if edge.rel is Relationship.PEER:
                peers[edge.a].add(edge.b)
                peers[edge.b].add(edge.a)
            else:
                customers[edge.a].add(edge.b)
                providers[edge.b].add(edge.a)

        weights = {int(a): int(w) for a, w in dict(self.weights).items()}
        unknown = [a for a in weights if a not in ases]
        if unknown:
            raise UnknownASError(unknown)
        if any(w < 0 for w in weights.values()):
            raise TopologyValidationError("poids negatif")

        object.__setattr__(self, "ases", ases)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_providers", {a: frozenset(s) for a, s in providers.items()})
        object.__setattr__(self, "_customers", {a: frozenset(s) for a, s in customers.items()})
        object.__setattr__(self, "_peers", {a: frozenset(s) for a, s in peers.items()})

    # --- voisinage ---

    def providers(self, asn: int) -> frozenset:
        return self._providers.get(asn, frozenset())

    def customers(self, asn: int) -> frozenset:
        return self._customers.get(asn, frozenset())

    def peers(self, asn: int) -> frozenset:
        return self._peers.get(asn, frozenset())

    def neighbors(self, asn: int) -> frozenset:
        return self.providers(asn) | self.customers(asn) | self.peers(asn)

    # --- poids ---

    def weight(self, asn: int) -> int:
        return self.weights.get(asn, 0)

    @property
    def total_weight(self) -> int:
        return sum(self.weights.values())

    @property
    def bitcoin_ases(self) -> frozenset:
        """AS hebergeant au moins un client (w_v > 0)."""
        return frozenset(a for a, w in self.weights.items() if w > 0)

    @property
    def nb_ases(self) -> int:
        return len(self.ases)

    def with_weights(self, weights: Mapping, extra_ases: Iterable = ()) -> "ASGraph":
        """Retourne une copie du graphe avec de nouveaux poids."""
        return ASGraph(self.ases | frozenset(extra_ases), self.edges, weights)

    def to_relationship_text(self) -> str:
        """Serialise les aretes au format serial-2 (ordre deterministe)."""
        lines = sorted(self.edges, key=lambda e: (e.a, e.b))
        return "".join(edge.to_line() + "\n" for edge in lines)

    def __repr__(self):
        return (f"ASGraph(ases={self.nb_ases}, edges={len(self.edges)}, "
                f"clients={self.total_weight})")


@dataclass(frozen=True)
class PeerGraph:
    """Sous-graphe des AS candidats (sans clients) relies par des liens de peering."""
    nodes: frozenset
    edges: frozenset = frozenset()

    def neighbors(self, asn: int) -> set:
        return {b if a == asn else a for a, b in self.edges if asn in (a, b)}

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(sorted(self.nodes))
        graph.add_edges_from(sorted(self.edges))
        return graph

    def induced(self, nodes: Iterable) -> "PeerGraph":
        keep = frozenset(nodes) & self.nodes
        return PeerGraph(keep, frozenset(e for e in self.edges if e[0] in keep and e[1] in keep))

    def __repr__(self):
        return f"PeerGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"


# =====================================================================
# LECTURE DES FICHIERS
# =====================================================================

def _parse_asn(token: str, line_number: int) -> int:
    try:
        asn = int(token)
    except ValueError:
        raise TopologyParseError(f"numero d'AS invalide '{token}'", line_number) from None
    if not 0 <= asn <= MAX_ASN:
        raise TopologyParseError(f"numero d'AS hors limites {asn}", line_number)
    return asn


def parse_relationships(text: str) -> ASGraph:
    """
    Lit un fichier de relations CAIDA serial-2.

    Args:
        text: Contenu du fichier (lignes "#" ignorees).

    Returns:
        ASGraph avec des poids tous nuls.
    """
    ases = set()
    edges = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("|")
        if len(fields) not in (3, 4):
            raise TopologyParseError(f"format attendu <asn>|<asn>|<rel> : '{line}'", line_number)
        a = _parse_asn(fields[0], line_number)
        b = _parse_asn(fields[1], line_number)
        if fields[2].strip() == "-1":
            edge = Edge.provider(a, b)
        elif fields[2].strip() == "0":
            edge = Edge.peer(a, b)
        else:
            raise TopologyParseError(f"relation inconnue '{fields[2]}'", line_number)
        if a == b:
            raise TopologyValidationError(f"ligne {line_number} : boucle sur l'AS {a}")

        key = frozenset((a, b))
        if key in edges and edges[key] != edge:
            raise TopologyValidationError(
                f"ligne {line_number} : relation contradictoire pour la paire {a}|{b}"
            )
        edges[key] = edge
        ases.update((a, b))

    graph = ASGraph(frozenset(ases), frozenset(edges.values()))
    logger.info(f"Topologie chargee : {graph.nb_ases} AS, {len(graph.edges)} aretes.")
    return graph


def load_client_weights(text: str, graph: ASGraph, auto_add: bool = False) -> ASGraph:
    """
    Fusionne un CSV "asn,count" dans le graphe.

    Args:
        text: Contenu CSV (en-tete "asn,count" optionnel).
        graph: Graphe cible.
        auto_add: Si True, les AS inconnus sont ajoutes comme AS isoles.

    Returns:
        Nouveau ASGraph portant les poids.
    """
    frame = pd.read_csv(
        io.StringIO(text), header=None, names=["asn", "clients"],
        dtype=str, comment="#", skip_blank_lines=True,
    )
    first_line = 1
    if not frame.empty and str(frame.iloc[0]["asn"]).strip().lower() == "asn":
        frame = frame.iloc[1:]
        first_line = 2

    weights = {}
    for row_number, row in enumerate(frame.itertuples(index=False), start=first_line):
        if pd.isna(row.asn) or pd.isna(row.clients):
            raise TopologyParseError("champ manquant", row_number)
        asn = _parse_asn(str(row.asn).strip(), row_number)
        try:
            count = int(str(row.clients).strip())
        except ValueError:
            raise TopologyParseError(f"compte invalide '{row.clients}'", row_number) from None
        if count < 0:
            raise TopologyParseError(f"compte negatif {count}", row_number)
        weights[asn] = weights.get(asn, 0) + count

    unknown = [asn for asn in weights if asn not in graph.ases]
    if unknown and not auto_add:
        raise UnknownASError(unknown)

    weighted = graph.with_weights(weights, extra_ases=unknown)
    logger.info(f"Poids charges : {len(weights)} AS, {weighted.total_weight} clients.")
    return weighted


def load_graph(relationship_path: str, weights_path: Optional[str] = None,
               auto_add: bool = False) -> ASGraph:
    """Charge un graphe (et ses poids) depuis des fichiers."""
    with open(relationship_path, encoding="utf-8") as f:
        graph = parse_relationships(f.read())
    if weights_path:
        with open(weights_path, encoding="utf-8") as f:
            graph = load_client_weights(f.read(), graph, auto_add=auto_add)
    return graph


# =====================================================================
# CANDIDATS RELAIS
# =====================================================================

def candidate_relays(graph: ASGraph) -> PeerGraph:
    """AS sans clients et liens de peering entre eux."""
    nodes = frozenset(a for a in graph.ases if not graph.customers(a))
    edges = frozenset(
        (e.a, e.b) for e in graph.edges
        if e.rel is Relationship.PEER and e.a in nodes and e.b in nodes
    )
    return PeerGraph(nodes, edges)
