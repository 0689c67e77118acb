"""
routing/hijack.py
-----------------
Oracles de detournement BGP :
- meme prefixe : l'annonce malveillante entre en concurrence avec la legitime
- prefixe plus specifique : attire tout AS ayant une route vers l'attaquant,
  sauf si les prefixes plus longs que /24 sont filtres
- interception : le detournement reussit et l'attaquant garde un voisin
  qui route encore vers l'origine legitime
"""

from dataclasses import dataclass

from models.as_graph import ASGraph
from routing.policy import FAVOR_ATTACKER, Label, TieBreak
from routing.routing_tree import RoutingOutcome, routing_tree

FILTERED_PREFIX_LEN = 24


@dataclass
class HijackOutcome:
    """
    Resultat d'un detournement de meme prefixe.

    Attributs :
        legit_origin : AS qui possede le prefixe
        attacker     : AS qui l'annonce frauduleusement
        winners      : AS joignable -> etiquette retenue
        unreachable  : AS sans aucune route (ni detournes ni proteges)
        outcome      : arbre de routage commun aux deux origines
    """
    legit_origin: int
    attacker: int
    winners: dict
    unreachable: frozenset
    outcome: RoutingOutcome

    @property
    def diverted(self) -> frozenset:
        """AS detournes, hors attaquant."""
        return frozenset(a for a, label in self.winners.items()
                         if label == Label.ATTACKER and a != self.attacker)

    @property
    def protected(self) -> frozenset:
        return frozenset(a for a, label in self.winners.items() if label == Label.LEGIT)

    def __repr__(self):
        return (f"HijackOutcome({self.attacker} -> {self.legit_origin}, "
                f"detournes={len(self.diverted)}, injoignables={len(self.unreachable)})")


def simulate_same_prefix_hijack(graph: ASGraph, legit_origin: int, attacker: int,
                                tie_break: TieBreak = FAVOR_ATTACKER) -> HijackOutcome:
    """
    Propage conjointement l'annonce legitime et l'annonce de l'attaquant.

    Args:
        graph: Topologie AS.
        legit_origin: AS legitime (se choisit toujours lui-meme).
        attacker: AS malveillant.
        tie_break: Regle de departage.

    Returns:
        HijackOutcome avec l'etiquette gagnante de chaque AS.
    """
    if attacker == legit_origin:
        raise ValueError("l'attaquant doit differer de l'origine legitime")
    outcome = routing_tree(graph, [(legit_origin, Label.LEGIT), (attacker, Label.ATTACKER)], tie_break)
    winners = {asn: record.label for asn, record in outcome.records.items()}
    return HijackOutcome(legit_origin, attacker, winners, outcome.unreachable(graph), outcome)


def simulate_more_specific_hijack(graph: ASGraph, legit_origin: int, attacker: int,
                                  prefix_len: int, filter_over_24: bool = False) -> frozenset:
    """
    AS detournes par l'annonce d'un prefixe plus specifique.

    Returns:
        Ensemble vide si le prefixe est filtre, sinon tous les AS (hors
        origine legitime et attaquant) ayant une route vers l'attaquant.
    """
    if not 8 <= prefix_len <= 32:
        raise ValueError(f"longueur de prefixe invalide : /{prefix_len}")
    if filter_over_24 and prefix_len > FILTERED_PREFIX_LEN:
        return frozenset()
    outcome = routing_tree(graph, [(attacker, Label.ATTACKER)])
    return frozenset(a for a in outcome.records if a not in (legit_origin, attacker))


def interception_feasible(graph: ASGraph, legit_origin: int, attacker: int,
                          tie_break: TieBreak = FAVOR_ATTACKER) -> bool:
    """L'attaquant peut-il relayer le trafic detourne vers l'origine legitime ?"""
    hijack = simulate_same_prefix_hijack(graph, legit_origin, attacker, tie_break)
    return any(hijack.winners.get(n) == Label.LEGIT for n in graph.neighbors(attacker))
