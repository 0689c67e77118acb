"""
analysis/placement.py
---------------------
Choix glouton des AS hebergeant les relais.

A chaque tour, seuls les candidats relies a au moins min(k, |R'|) relais deja
choisis sont eligibles ; on retient celui qui maximise le gain marginal de
couverture ponderee (egalite -> plus petit numero d'AS). La k-connexite du
plan final est ensuite verifiee par flot maximal (networkx), sans se fier a
la construction.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import networkx as nx
import pandas as pd

from analysis.attack_analysis import EXACT, covered_by_relays, total_scenario_weight
from models.as_graph import ASGraph, PeerGraph, candidate_relays
from models.errors import ConnectivityVerificationError, PlacementInfeasibleError
from routing.policy import FAVOR_ATTACKER, TieBreak

logger = logging.getLogger(__name__)


@dataclass
class RelayPlan:
    """
    Plan de placement.

    Attributs :
        relays                   : AS choisis, dans l'ordre de selection
        n                        : nombre de relais vise
        k                        : connexite visee
        achieved_coverage        : poids couvert par l'union des scenarios
        connectivity_certificate : connexite par sommets du sous-graphe induit
        total_weight             : poids de tous les scenarios possibles
        rounds                   : (tour, asn, gain marginal, couverture cumulee)
    """
    relays: list
    n: int
    k: int
    achieved_coverage: int = 0
    connectivity_certificate: int = 0
    total_weight: int = 0
    rounds: list = field(default_factory=list)

    @property
    def coverage_fraction(self) -> float:
        return self.achieved_coverage / self.total_weight if self.total_weight else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rounds, columns=["round", "asn", "marginal_coverage", "cumulative_coverage"])

    def __repr__(self):
        return (f"RelayPlan(relays={self.relays}, k={self.k}, "
                f"couverture={self.coverage_fraction:.3f}, connexite={self.connectivity_certificate})")


# =====================================================================
# FILTRE DES CANDIDATS
# =====================================================================

def k_core_candidates(peer_graph: PeerGraph, k: int, n: int) -> set:
    """
    Candidats appartenant a une composante du k-coeur d'au moins n noeuds.

    Args:
        peer_graph: Graphe de peering des candidats.
        k: Connexite visee (k <= 1 : pas d'elagage par degre).
        n: Taille minimale de composante.

    Returns:
        Ensemble d'AS (eventuellement vide).
    """
    if k < 0 or n < 1:
        raise ValueError(f"parametres invalides : k={k}, n={n}")
    graph = peer_graph.to_networkx()
    core = nx.k_core(graph, k) if k > 1 else graph
    kept = set()
    for component in nx.connected_components(core):
        if len(component) >= n:
            kept |= component
    logger.info(f"Filtre k-coeur (k={k}, n={n}) : {len(kept)}/{graph.number_of_nodes()} candidats.")
    return kept


def verify_connectivity(peer_graph: PeerGraph, relays: Iterable, k: int) -> int:
    """
    Connexite par sommets du sous-graphe induit par les relais.

    Un graphe a n sommets ne peut depasser n - 1 : l'exigence est min(k, n - 1).

    Raises:
        ConnectivityVerificationError si l'exigence n'est pas atteinte.
    """
    relays = list(relays)
    subgraph = peer_graph.to_networkx().subgraph(relays)
    achieved = nx.node_connectivity(subgraph) if len(relays) > 1 else 0
    required = min(k, len(relays) - 1)
    if achieved < required:
        raise ConnectivityVerificationError(required, achieved)
    return achieved


# =====================================================================
# ALGORITHME GLOUTON
# =====================================================================

def locate_relays(peer_graph: PeerGraph, candidates: Iterable, scenario_fn: Callable,
                  weights, n: int, k: int) -> RelayPlan:
    """
    Selection gloutonne de n relais k-connectes.

    Args:
        peer_graph: Graphe de peering (adjacence entre candidats).
        candidates: AS candidats (sortie de k_core_candidates).
        scenario_fn: relais -> ScenarioSet.
        weights: ASGraph ou mapping AS -> nombre de clients.
        n: Nombre de relais.
        k: Connexite visee.

    Returns:
        RelayPlan verifie.
    """
    candidates = set(candidates)
    if isinstance(weights, ASGraph):
        weights = weights.weights
    weight_series = pd.Series(dict(weights), dtype="int64")
    adjacency = {c: peer_graph.neighbors(c) & candidates for c in candidates}

    scenario_sets = {}
    selected, chosen = [], set()
    covered = set()
    cumulative = 0
    rounds = []

    for round_index in range(1, n + 1):
        need = min(k, len(selected))
        eligible = sorted(c for c in candidates - chosen if len(adjacency[c] & chosen) >= need)
        if not eligible:
            raise PlacementInfeasibleError(round_index, len(selected), k)

        best, best_gain, best_new = None, -1, set()
        for candidate in eligible:
            if candidate not in scenario_sets:
                scenario_sets[candidate] = scenario_fn(candidate)
            new = scenario_sets[candidate].covered - covered
            victims = [s.victim for s in new]
            gain = int(weight_series.reindex(victims).fillna(0).sum()) if victims else 0
            if gain > best_gain:
                best, best_gain, best_new = candidate, gain, new

        selected.append(best)
        chosen.add(best)
        covered |= best_new
        cumulative += best_gain
        rounds.append((round_index, best, best_gain, cumulative))
        logger.info(f"Tour {round_index} : AS {best} retenu (gain {best_gain}, total {cumulative}).")

    certificate = verify_connectivity(peer_graph, selected, k)
    return RelayPlan(selected, n, k, cumulative, certificate, rounds=rounds)


def plan_relays(graph: ASGraph, n: int, k: int, tie_break: TieBreak = FAVOR_ATTACKER,
                jobs: int = 1, method: str = EXACT) -> RelayPlan:
    """Chaine complete : candidats -> filtre k-coeur -> couverture -> glouton."""
    peer_graph = candidate_relays(graph)
    candidates = k_core_candidates(peer_graph, k, n)
    sets = {s.relay: s for s in covered_by_relays(graph, candidates, tie_break, jobs, method)}
    plan = locate_relays(peer_graph, candidates, sets.__getitem__, graph, n, k)
    plan.total_weight = total_scenario_weight(graph)
    return plan
