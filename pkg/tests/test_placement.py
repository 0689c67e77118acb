"""
tests/test_placement.py
-----------------------
Tests du placement glouton des relais et de la verification de connexite.

Lancer les tests :
    python -m pytest tests/ -v
    ou
    python -m unittest tests.test_placement -v
"""

import itertools
import math
import random
import unittest

import networkx as nx

from analysis.attack_analysis import AttackScenario, ScenarioSet, coverage_weight, covered_by_relays
from analysis.placement import k_core_candidates, locate_relays, plan_relays, verify_connectivity
from models.as_graph import PeerGraph, candidate_relays, load_client_weights, parse_relationships
from models.errors import ConnectivityVerificationError, PlacementInfeasibleError
from tests.topology_factory import read_fixture


def triangle():
    return load_client_weights(read_fixture("triangle_weights.csv"), parse_relationships(read_fixture("triangle.txt")))


class TestKCore(unittest.TestCase):
    """Filtre des candidats par k-coeur."""

    def setUp(self):
        self.peer_graph = candidate_relays(triangle())

    def test_k2(self):
        """D n'a qu'un pair candidat et H aucun : seul le triangle A, B, C reste."""
        self.assertEqual(k_core_candidates(self.peer_graph, 2, 3), {1, 2, 3})
        self.assertEqual(k_core_candidates(self.peer_graph, 2, 4), set())

    def test_k1(self):
        """k <= 1 : seules les composantes trop petites sont retirees."""
        self.assertEqual(k_core_candidates(self.peer_graph, 1, 2), {1, 2, 3, 4})
        self.assertEqual(k_core_candidates(self.peer_graph, 0, 1), {1, 2, 3, 4, 8})

    def test_parametres(self):
        with self.assertRaises(ValueError):
            k_core_candidates(self.peer_graph, -1, 3)
        with self.assertRaises(ValueError):
            k_core_candidates(self.peer_graph, 2, 0)


class TestVerifyConnectivity(unittest.TestCase):

    def setUp(self):
        self.peer_graph = candidate_relays(triangle())

    def test_triangle(self):
        self.assertEqual(verify_connectivity(self.peer_graph, [1, 2, 3], 2), 2)

    def test_insuffisant(self):
        with self.assertRaises(ConnectivityVerificationError) as ctx:
            verify_connectivity(self.peer_graph, [1, 2, 4], 2)
        self.assertEqual(ctx.exception.required, 2)
        self.assertEqual(ctx.exception.achieved, 1)

    def test_exigence_bornee(self):
        """Un relais seul satisfait toute exigence (min(k, n - 1) = 0)."""
        self.assertEqual(verify_connectivity(self.peer_graph, [8], 3), 0)


class TestLocateRelays(unittest.TestCase):
    """Algorithme glouton sur des ensembles de scenarios synthetiques."""

    @staticmethod
    def scenario_fn(table):
        return lambda relay: ScenarioSet(relay, frozenset(table[relay]))

    def test_infaisable(self):
        """Sans lien de peering, aucun second relais n'est adjacent au premier."""
        peer_graph = PeerGraph(frozenset({1, 2, 3}))
        table = {c: {AttackScenario(9, 5)} for c in (1, 2, 3)}
        with self.assertRaises(PlacementInfeasibleError) as ctx:
            locate_relays(peer_graph, {1, 2, 3}, self.scenario_fn(table), {5: 1}, n=2, k=1)
        self.assertEqual(ctx.exception.round_index, 2)

    def test_egalite_plus_petit_as(self):
        """A gain egal, le plus petit numero d'AS est retenu."""
        peer_graph = PeerGraph(frozenset({4, 7}), frozenset({(4, 7)}))
        table = {4: {AttackScenario(9, 5)}, 7: {AttackScenario(8, 5)}}
        plan = locate_relays(peer_graph, {4, 7}, self.scenario_fn(table), {5: 2}, n=2, k=1)
        self.assertEqual(plan.relays, [4, 7])
        self.assertEqual(plan.rounds, [(1, 4, 2, 2), (2, 7, 2, 4)])

    def test_adjacence_requise(self):
        """Au second tour, seul un candidat relie au premier relais est eligible."""
        peer_graph = PeerGraph(frozenset({1, 2, 3}), frozenset({(1, 2), (2, 3)}))
        table = {
            1: {AttackScenario(9, 5)},
            2: set(),
            3: {AttackScenario(8, 5), AttackScenario(7, 5)},
        }
        plan = locate_relays(peer_graph, {1, 2, 3}, self.scenario_fn(table), {5: 1}, n=2, k=1)
        self.assertEqual(plan.relays, [3, 2])
        self.assertEqual(plan.achieved_coverage, 2)

    def test_borne_gloutonne(self):
        """Sans contrainte de connexite, le glouton atteint (1 - 1/e) de l'optimum (50 instances, 12 candidats)."""
        rng = random.Random(4)
        for trial in range(50):
            candidates = list(range(1, 13))
            victims = list(range(100, 106))
            weights = {v: rng.randint(1, 10) for v in victims}
            universe = [AttackScenario(m, v) for m in range(20, 26) for v in victims]
            table = {c: set(rng.sample(universe, rng.randint(0, 8))) for c in candidates}
            n = rng.randint(1, 4)

            plan = locate_relays(PeerGraph(frozenset(candidates)), candidates,
                                 self.scenario_fn(table), weights, n=n, k=0)
            best = max(
                coverage_weight([ScenarioSet(c, frozenset(table[c])) for c in combo], weights)
                for combo in itertools.combinations(candidates, n)
            )
            self.assertGreaterEqual(plan.achieved_coverage, (1 - 1 / math.e) * best, f"essai {trial}")
            chosen = [ScenarioSet(c, frozenset(table[c])) for c in plan.relays]
            self.assertEqual(plan.achieved_coverage, coverage_weight(chosen, weights))

    def test_connexite_aleatoire(self):
        """k = 1 ou 2 sur des graphes de peering aleatoires : tout plan obtenu est min(k, n - 1)-connexe."""
        rng = random.Random(8)
        feasible = {1: 0, 2: 0}
        for trial in range(50):
            k = 1 + trial % 2
            candidates = list(range(1, rng.randint(6, 12) + 1))
            edges = frozenset((a, b) for a, b in itertools.combinations(candidates, 2) if rng.random() < 0.45)
            peer_graph = PeerGraph(frozenset(candidates), edges)
            universe = [AttackScenario(m, v) for m in range(20, 26) for v in range(100, 104)]
            table = {c: set(rng.sample(universe, rng.randint(0, 6))) for c in candidates}
            n = rng.randint(2, 5)
            try:
                plan = locate_relays(peer_graph, candidates, self.scenario_fn(table),
                                     {v: 1 for v in range(100, 104)}, n=n, k=k)
            except PlacementInfeasibleError:
                continue
            feasible[k] += 1
            induced = peer_graph.to_networkx().subgraph(plan.relays)
            self.assertEqual(len(plan.relays), n)
            self.assertGreaterEqual(nx.node_connectivity(induced), min(k, n - 1), f"essai {trial}")
            self.assertEqual(plan.connectivity_certificate, nx.node_connectivity(induced))
        self.assertGreater(feasible[1], 0)
        self.assertGreater(feasible[2], 0)


class TestPlanRelays(unittest.TestCase):
    """Chaine complete sur le triangle de reference."""

    def test_triangle(self):
        graph = triangle()
        plan = plan_relays(graph, n=3, k=2)
        self.assertEqual(sorted(plan.relays), [1, 2, 3])
        self.assertEqual(plan.connectivity_certificate, 2)
        self.assertEqual(plan.total_weight, 64)
        self.assertEqual(plan.achieved_coverage, coverage_weight(covered_by_relays(graph, plan.relays), graph))
        self.assertGreater(plan.coverage_fraction, 0.0)
        self.assertLessEqual(plan.coverage_fraction, 1.0)

        frame = plan.to_frame()
        self.assertEqual(list(frame.columns), ["round", "asn", "marginal_coverage", "cumulative_coverage"])
        self.assertEqual(frame["cumulative_coverage"].iloc[-1], plan.achieved_coverage)
        self.assertTrue((frame["marginal_coverage"] >= 0).all())

    def test_infaisable(self):
        with self.assertRaises(PlacementInfeasibleError):
            plan_relays(triangle(), n=4, k=2)


if __name__ == "__main__":
    unittest.main()
