"""
analysis/attack_analysis.py
---------------------------
Analyse des scenarios d'attaque (attaquant, victime) face a un ensemble de relais.

Contenu :
- comparaison rapide de deux chemins depuis la victime (dernier AS commun)
- scenarios couverts par un relais et poids de couverture
- courbes de repartition (partition, vulnerabilite des clients)
- reference "/24" par parcours en ordre de preference decroissante
- probabilite de deconnexion par departage aleatoire (Monte-Carlo)
"""

import logging
import multiprocessing as mp
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Iterable, NamedTuple, Optional

import numpy as np
import pandas as pd

from models.as_graph import ASGraph
from models.errors import PathContractError
from routing.hijack import simulate_same_prefix_hijack
from routing.policy import FAVOR_ATTACKER, Label, TieBreak, TieSide
from routing.routing_tree import (
    TreeCache,
    hop_classes,
    offered_routes,
    preference_key,
    routing_tree,
)

logger = logging.getLogger(__name__)

EXACT = "exact"
LAST_COMMON_AS = "last-common-as"
METHODS = (EXACT, LAST_COMMON_AS)


class Preferred(Enum):
    """Chemin retenu par more_preferred : A (relais) ou B (attaquant)."""
    A = "A"
    B = "B"


class AttackScenario(NamedTuple):
    """Couple (attaquant, victime) ; la victime heberge des clients."""
    attacker: int
    victim: int


@dataclass(frozen=True)
class ScenarioSet:
    """Scenarios neutralises par un relais."""
    relay: int
    covered: frozenset = field(default_factory=frozenset)

    def __len__(self):
        return len(self.covered)

    def __repr__(self):
        return f"ScenarioSet(relay={self.relay}, couverts={len(self.covered)})"


# =====================================================================
# COMPARAISON DE CHEMINS
# =====================================================================

def more_preferred(path_a, path_b, classes_a, classes_b,
                   tie_break: TieBreak = FAVOR_ATTACKER) -> Preferred:
    """
    Compare deux chemins partant de la meme victime.

    Le prefixe commun est retire ; au dernier AS commun on compare la classe
    du premier saut divergent, puis la longueur restante, puis le departage
    (B est le chemin de l'attaquant).

    Args:
        path_a: Chemin victime -> relais.
        path_b: Chemin victime -> attaquant.
        classes_a: Classe de chaque saut de path_a.
        classes_b: Classe de chaque saut de path_b.
        tie_break: Regle de departage.

    Returns:
        Preferred.A ou Preferred.B.
    """
    if not path_a or not path_b or path_a[0] != path_b[0]:
        raise PathContractError(f"chemins sans victime commune : {path_a} / {path_b}")
    if len(classes_a) != len(path_a) - 1 or len(classes_b) != len(path_b) - 1:
        raise PathContractError("classes non alignees sur les sauts")

    i = 0
    while i + 1 < len(path_a) and i + 1 < len(path_b) and path_a[i + 1] == path_b[i + 1]:
        i += 1

    # une origine se prefere toujours elle-meme
    if i == len(path_a) - 1:
        return Preferred.A
    if i == len(path_b) - 1:
        return Preferred.B

    if classes_a[i] != classes_b[i]:
        return Preferred.A if classes_a[i] > classes_b[i] else Preferred.B
    remaining_a = len(path_a) - 1 - i
    remaining_b = len(path_b) - 1 - i
    if remaining_a != remaining_b:
        return Preferred.A if remaining_a < remaining_b else Preferred.B
    return Preferred.B if tie_break.favored_label(path_a[i]) == Label.ATTACKER else Preferred.A


# =====================================================================
# SCENARIOS COUVERTS
# =====================================================================

def _victims(graph: ASGraph) -> list:
    return sorted(graph.bitcoin_ases)


def _covered_exact(graph: ASGraph, relay: int, tie_break: TieBreak) -> set:
    covered = set()
    victims = _victims(graph)
    for attacker in sorted(graph.ases - {relay}):
        outcome = routing_tree(graph, [(relay, Label.LEGIT), (attacker, Label.ATTACKER)], tie_break)
        for victim in victims:
            if victim == attacker:
                continue
            if victim == relay:
                covered.add(AttackScenario(attacker, victim))
                continue
            offers = offered_routes(graph, outcome, victim)
            legit = [r for r in offers if r.label == Label.LEGIT]
            rogue = [r for r in offers if r.label == Label.ATTACKER]
            if not legit:
                continue
            if not rogue:
                covered.add(AttackScenario(attacker, victim))
                continue
            best_legit = min(legit, key=lambda r: preference_key(r, tie_break))
            best_rogue = min(rogue, key=lambda r: preference_key(r, tie_break))
            choice = more_preferred(
                best_legit.path, best_rogue.path,
                hop_classes(graph, best_legit.path), hop_classes(graph, best_rogue.path),
                tie_break,
            )
            if choice is Preferred.A:
                covered.add(AttackScenario(attacker, victim))
    return covered


def _covered_last_common_as(graph: ASGraph, relay: int, tie_break: TieBreak, cache: TreeCache) -> set:
    covered = set()
    relay_tree = cache.tree(relay)
    for victim in _victims(graph):
        relay_route = relay_tree.route(victim)
        if relay_route is None:
            continue
        relay_classes = hop_classes(graph, relay_route.path)
        for attacker in sorted(graph.ases - {victim, relay}):
            rogue_route = cache.tree(attacker).route(victim)
            if rogue_route is None:
                covered.add(AttackScenario(attacker, victim))
                continue
            choice = more_preferred(
                relay_route.path, rogue_route.path,
                relay_classes, hop_classes(graph, rogue_route.path), tie_break,
            )
            if choice is Preferred.A:
                covered.add(AttackScenario(attacker, victim))
    return covered


def covered_scenarios(graph: ASGraph, relay: int, tie_break: TieBreak = FAVOR_ATTACKER,
                      cache: Optional[TreeCache] = None, method: str = EXACT) -> ScenarioSet:
    """
    Scenarios (m, v) ou la victime v garde sa route vers le relais face a m.

    Args:
        graph: Topologie ponderee.
        relay: AS hebergeant le relais.
        tie_break: Regle de departage.
        cache: Arbres a origine unique deja calcules (methode last-common-as).
        method: "exact" (propagation conjointe, puis comparaison des deux
            meilleures routes offertes a la victime) ou "last-common-as"
            (comparaison au dernier AS commun des arbres a origine unique).

    Returns:
        ScenarioSet du relais.
    """
    if method not in METHODS:
        raise ValueError(f"methode inconnue : {method}")
    if relay not in graph.ases:
        raise ValueError(f"relais {relay} absent du graphe")
    if method == EXACT:
        covered = _covered_exact(graph, relay, tie_break)
    else:
        covered = _covered_last_common_as(graph, relay, tie_break, cache or TreeCache(graph, tie_break))
    logger.debug(f"Relais {relay} : {len(covered)} scenarios couverts ({method}).")
    return ScenarioSet(relay, frozenset(covered))


def coverage_weight(sets: Iterable, weights) -> int:
    """Poids de l'union des scenarios couverts (somme des w_v)."""
    if isinstance(weights, ASGraph):
        weights = weights.weights
    union = set()
    for scenario_set in sets:
        union |= scenario_set.covered
    return sum(weights.get(scenario.victim, 0) for scenario in union)


def total_scenario_weight(graph: ASGraph) -> int:
    """Poids de tous les scenarios possibles : chaque victime face a chaque autre AS."""
    return graph.total_weight * max(graph.nb_ases - 1, 0)


def covered_by_relays(graph: ASGraph, relays: Iterable, tie_break: TieBreak = FAVOR_ATTACKER,
                      jobs: int = 1, method: str = EXACT) -> list:
    """ScenarioSet de chaque relais, dans l'ordre croissant des AS."""
    ordered = sorted(set(relays))
    if jobs > 1 and len(ordered) > 1:
        worker = partial(covered_scenarios, graph, tie_break=tie_break, method=method)
        with mp.Pool(processes=jobs) as pool:
            return pool.map(worker, ordered)
    cache = TreeCache(graph, tie_break)
    return [covered_scenarios(graph, r, tie_break, cache=cache, method=method) for r in ordered]


def _uncovered_matrix(graph: ASGraph, relays, tie_break, jobs, method) -> pd.DataFrame:
    """Une ligne par scenario possible : attacker, victim, weight, covered."""
    relays = set(relays)
    if not relays:
        raise ValueError("l'ensemble des relais est vide")
    union = set()
    for scenario_set in covered_by_relays(graph, relays, tie_break, jobs, method):
        union |= scenario_set.covered
    rows = [
        (m, v, graph.weight(v), AttackScenario(m, v) in union)
        for m in sorted(graph.ases) for v in _victims(graph) if v != m
    ]
    return pd.DataFrame(rows, columns=["attacker", "victim", "weight", "covered"])


# =====================================================================
# COURBES DE REPARTITION
# =====================================================================

def _survival_curve(values: pd.Series, value_name: str, share_name: str) -> pd.DataFrame:
    """Part des elements dont la valeur est >= chaque valeur distincte."""
    thresholds = sorted(set(values.tolist()) | {0.0})
    rows = [(f, float((values >= f).mean())) for f in thresholds]
    return pd.DataFrame(rows, columns=[value_name, share_name])


def partition_cdf(graph: ASGraph, relays, tie_break: TieBreak = FAVOR_ATTACKER,
                  jobs: int = 1, method: str = EXACT) -> pd.DataFrame:
    """
    Pour chaque fraction f de clients, part des AS capables d'en deconnecter au moins f.

    Returns:
        DataFrame (fraction_of_clients, fraction_of_ases), une ligne par valeur distincte.
    """
    total = graph.total_weight
    matrix = _uncovered_matrix(graph, relays, tie_break, jobs, method)
    exposed = matrix[~matrix["covered"]].groupby("attacker")["weight"].sum()
    per_attacker = pd.Series(0.0, index=sorted(graph.ases))
    if total:
        per_attacker.loc[exposed.index] = (exposed / total).to_numpy(dtype=float)
    return _survival_curve(per_attacker, "fraction_of_clients", "fraction_of_ases")


def client_vulnerability_cdf(graph: ASGraph, relays, tie_break: TieBreak = FAVOR_ATTACKER,
                             jobs: int = 1, method: str = EXACT) -> pd.DataFrame:
    """
    Pour chaque fraction a d'AS, part des clients deconnectables par au plus a des AS.

    Returns:
        DataFrame (fraction_of_ases, fraction_of_clients).
    """
    matrix = _uncovered_matrix(graph, relays, tie_break, jobs, method)
    attackers = max(graph.nb_ases - 1, 1)
    victims = _victims(graph)
    counts = matrix[~matrix["covered"]].groupby("victim").size()
    vulnerability = pd.Series(
        [counts.get(v, 0) / attackers for v in victims], index=victims, dtype=float)
    weights = pd.Series([graph.weight(v) for v in victims], index=victims, dtype=float)
    total = weights.sum()

    thresholds = sorted(set(vulnerability.tolist()) | {0.0})
    rows = [(a, float(weights[vulnerability <= a].sum() / total) if total else 0.0) for a in thresholds]
    return pd.DataFrame(rows, columns=["fraction_of_ases", "fraction_of_clients"])


# =====================================================================
# REFERENCE /24
# =====================================================================

@dataclass(frozen=True)
class P24Frontier:
    """
    AS plus preferes par la victime que tout autre AS Bitcoin.

    Attributs :
        exclusive : strictement preferes
        inclusive : preferes ou a egalite avec le premier AS Bitcoin
    """
    victim: int
    exclusive: frozenset
    inclusive: frozenset


def preference_order(graph: ASGraph, victim: int, cache: Optional[TreeCache] = None) -> dict:
    """AS joignables par la victime -> (classe inversee, longueur)."""
    cache = cache or TreeCache(graph)
    order = {}
    for asn in graph.ases - {victim}:
        record = cache.tree(asn).route(victim)
        if record is not None:
            order[asn] = (-int(record.route_class), record.length)
    return order


def p24_baseline_frontier(graph: ASGraph, victim: int, bitcoin_ases: Iterable,
                          cache: Optional[TreeCache] = None) -> P24Frontier:
    """Parcours en ordre de preference decroissante jusqu'au premier autre AS Bitcoin."""
    bitcoin_ases = frozenset(bitcoin_ases)
    if victim not in bitcoin_ases:
        raise ValueError(f"la victime {victim} n'heberge pas de clients")
    order = preference_order(graph, victim, cache)
    others = [order[b] for b in bitcoin_ases - {victim} if b in order]
    candidates = {a: key for a, key in order.items() if a not in bitcoin_ases}
    if not others:
        everyone = frozenset(candidates)
        return P24Frontier(victim, everyone, everyone)
    bound = min(others)
    return P24Frontier(
        victim,
        frozenset(a for a, key in candidates.items() if key < bound),
        frozenset(a for a, key in candidates.items() if key <= bound),
    )


def p24_baseline_attackers(graph: ASGraph, victim: int, bitcoin_ases: Iterable,
                           tie_break: TieBreak = FAVOR_ATTACKER,
                           cache: Optional[TreeCache] = None) -> frozenset:
    """AS capables d'isoler la victime par des annonces /24 (egalites selon le departage)."""
    frontier = p24_baseline_frontier(graph, victim, bitcoin_ases, cache)
    if tie_break.favored_label(victim) == Label.ATTACKER:
        return frontier.inclusive
    return frontier.exclusive


def p24_partition_cdf(graph: ASGraph, tie_break: TieBreak = FAVOR_ATTACKER) -> pd.DataFrame:
    """Courbe de partition de la reference /24 (meme forme que partition_cdf)."""
    cache = TreeCache(graph, tie_break)
    total = graph.total_weight
    bitcoin = graph.bitcoin_ases
    isolated = pd.Series(0.0, index=sorted(graph.ases))
    for victim in sorted(bitcoin):
        for attacker in p24_baseline_attackers(graph, victim, bitcoin, tie_break, cache):
            isolated.loc[attacker] += graph.weight(victim)
    if total:
        isolated = isolated / total
    return _survival_curve(isolated, "fraction_of_clients", "fraction_of_ases")


# =====================================================================
# DEPARTAGE ALEATOIRE
# =====================================================================

def tie_break_disconnect_probability(graph: ASGraph, relays: Iterable, target: int,
                                     attacker: int, trials: int = 10_000, seed: int = 0) -> float:
    """
    Probabilite que l'attaquant isole le relais cible de tous les autres relais
    quand chaque AS tranche ses egalites a pile ou face.

    Args:
        graph: Topologie contenant relais et attaquant.
        relays: AS des relais (la cible incluse).
        target: Relais dont le prefixe est detourne.
        attacker: AS malveillant.
        trials: Nombre de tirages.
        seed: Graine du generateur numpy.

    Returns:
        Frequence empirique de deconnexion.
    """
    others = sorted(set(relays) - {target})
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 31 - 1, size=trials)
    disconnected = 0
    for trial_seed in seeds:
        hijack = simulate_same_prefix_hijack(graph, target, attacker, TieBreak(TieSide.RANDOM, int(trial_seed)))
        if all(hijack.winners.get(r) == Label.ATTACKER for r in others):
            disconnected += 1
    probability = disconnected / trials if trials else 0.0
    logger.info(f"Deconnexion par departage : {probability:.4f} sur {trials} tirages.")
    return probability
