"""
tests/test_attack_analysis.py
-----------------------------
Tests de l'analyse des scenarios d'attaque : couverture par un relais,
courbes de repartition, reference /24 et departage aleatoire.

Lancer les tests :
    python -m pytest tests/ -v
    ou
    python -m unittest tests.test_attack_analysis -v
"""

import unittest
from dataclasses import dataclass

from analysis.attack_analysis import (
    EXACT,
    LAST_COMMON_AS,
    AttackScenario,
    Preferred,
    ScenarioSet,
    client_vulnerability_cdf,
    coverage_weight,
    covered_by_relays,
    covered_scenarios,
    more_preferred,
    p24_baseline_attackers,
    p24_baseline_frontier,
    p24_partition_cdf,
    partition_cdf,
    tie_break_disconnect_probability,
    total_scenario_weight,
)
from models.as_graph import ASGraph, Edge, load_client_weights, parse_relationships
from models.errors import PathContractError
from routing.hijack import simulate_same_prefix_hijack
from routing.policy import FAVOR_ATTACKER, FAVOR_LEGITIMATE, Label, RouteClass, TieBreak
from routing.routing_tree import TreeCache
from tests.topology_factory import random_topology, read_fixture


@dataclass(frozen=True)
class PerASTieBreak(TieBreak):
    """Departage fixe par AS : les AS listes favorisent l'attaquant, les autres non."""
    attacker_ases: frozenset = frozenset()

    def favored_label(self, asn: int) -> Label:
        return Label.ATTACKER if asn in self.attacker_ases else Label.LEGIT


def build(edges, weights) -> ASGraph:
    ases = frozenset(a for e in edges for a in (e.a, e.b))
    return ASGraph(ases, frozenset(edges), weights)


class TestMorePreferred(unittest.TestCase):
    """Comparaison de deux chemins depuis la victime."""

    P, R, C = RouteClass.PEER, RouteClass.PROVIDER, RouteClass.CUSTOMER

    def test_classe_au_dernier_as_commun(self):
        """Apres le prefixe commun, la classe du saut divergent decide."""
        choice = more_preferred((1, 2, 3), (1, 2, 4, 5), [self.R, self.C], [self.R, self.P])
        self.assertEqual(choice, Preferred.A)

    def test_longueur_puis_departage(self):
        self.assertEqual(more_preferred((1, 2), (1, 3, 4), [self.R], [self.R, self.C]), Preferred.A)
        self.assertEqual(more_preferred((1, 2), (1, 3), [self.R], [self.R]), Preferred.B)
        self.assertEqual(more_preferred((1, 2), (1, 3), [self.R], [self.R], FAVOR_LEGITIMATE), Preferred.A)

    def test_origine_sur_le_chemin(self):
        """Si le relais est sur le chemin de l'attaquant, la route du relais l'emporte."""
        self.assertEqual(more_preferred((1, 2), (1, 2, 3), [self.R], [self.R, self.R]), Preferred.A)
        self.assertEqual(more_preferred((1, 2, 3), (1, 2), [self.R, self.R], [self.R]), Preferred.B)

    def test_contrat(self):
        with self.assertRaises(PathContractError):
            more_preferred((1, 2), (3, 2), [self.R], [self.R])
        with self.assertRaises(PathContractError):
            more_preferred((1, 2), (1, 3), [], [self.R])


class TestCoveredScenarios(unittest.TestCase):
    """Scenarios neutralises sur de petites topologies construites a la main."""

    def test_relais_unique_client(self):
        """Relais chez l'unique client de la victime : tout est couvert."""
        graph = build([Edge.provider(1, 2), Edge.provider(3, 1), Edge.peer(3, 4)], {1: 5})
        covered = covered_scenarios(graph, 2).covered
        self.assertEqual(covered, frozenset({AttackScenario(3, 1), AttackScenario(4, 1)}))

    def test_second_client_meme_niveau(self):
        """Un attaquant client de la victime au meme niveau gagne seulement si l'egalite le favorise."""
        graph = build([Edge.provider(1, 2), Edge.provider(1, 5), Edge.provider(3, 1)], {1: 5})
        self.assertNotIn(AttackScenario(5, 1), covered_scenarios(graph, 2, FAVOR_ATTACKER).covered)
        self.assertIn(AttackScenario(5, 1), covered_scenarios(graph, 2, FAVOR_LEGITIMATE).covered)

    def test_fournisseur_attaquant(self):
        """Le fournisseur de la victime prefere la chaine client menant au relais."""
        graph = build([Edge.provider(2, 1), Edge.provider(2, 3), Edge.provider(3, 4), Edge.provider(5, 2)], {1: 1})
        for method in (EXACT, LAST_COMMON_AS):
            self.assertIn(AttackScenario(5, 1), covered_scenarios(graph, 4, method=method).covered)

    def test_relais_victime(self):
        """Une victime hebergeant le relais est couverte face a tout attaquant."""
        graph = build([Edge.provider(1, 2), Edge.provider(3, 1)], {2: 1})
        self.assertEqual(covered_scenarios(graph, 2).covered,
                         frozenset({AttackScenario(1, 2), AttackScenario(3, 2)}))

    def test_triangle_aucun_client_deconnecte(self):
        """Relais en A, B, C : X ne deconnecte aucun client."""
        graph = load_client_weights(read_fixture("triangle_weights.csv"),
                                    parse_relationships(read_fixture("triangle.txt")))
        union = set()
        for scenario_set in covered_by_relays(graph, {1, 2, 3}):
            union |= scenario_set.covered
        for victim in graph.bitcoin_ases:
            self.assertIn(AttackScenario(9, victim), union)

    @staticmethod
    def hijack_expected(graph, relay, tie_break) -> frozenset:
        """Scenarios ou la propagation conjointe laisse la victime sur l'annonce legitime."""
        expected = set()
        for attacker in graph.ases - {relay}:
            hijack = simulate_same_prefix_hijack(graph, relay, attacker, tie_break)
            for victim in graph.bitcoin_ases - {attacker}:
                if hijack.winners.get(victim) == Label.LEGIT:
                    expected.add(AttackScenario(attacker, victim))
        return frozenset(expected)

    def test_exact_egal_oracle(self):
        """100 topologies, tous les relais, les deux cotes du departage : aucun ecart."""
        for seed in range(100):
            graph = random_topology(seed)
            for rule in (FAVOR_ATTACKER, FAVOR_LEGITIMATE):
                for relay in sorted(graph.ases):
                    self.assertEqual(covered_scenarios(graph, relay, rule, method=EXACT).covered,
                                     self.hijack_expected(graph, relay, rule),
                                     f"graine {seed}, relais {relay}, {rule.side.value}")

    def test_dernier_as_commun_egal_oracle_sans_multihoming(self):
        """Un seul fournisseur par AS et pas de peering hors du coeur : la methode rapide est exacte."""
        for seed in range(100):
            graph = random_topology(seed, peer_prob=0.0, max_providers=1)
            for rule in (FAVOR_ATTACKER, FAVOR_LEGITIMATE):
                cache = TreeCache(graph, rule)
                for relay in sorted(graph.ases):
                    covered = covered_scenarios(graph, relay, rule, cache=cache, method=LAST_COMMON_AS).covered
                    self.assertEqual(covered, self.hijack_expected(graph, relay, rule),
                                     f"graine {seed}, relais {relay}, {rule.side.value}")

    def test_dernier_as_commun_inexact(self):
        """
        Victime 1 rattachee a deux fournisseurs (2 et 3) : sa route vers le relais 5
        passe par l'AS 4, qui prefere l'attaquant 7 a egalite. La comparaison au
        dernier AS commun ne le voit pas, la propagation conjointe si.
        """
        graph = build([
            Edge.provider(2, 1), Edge.provider(3, 1), Edge.provider(3, 4), Edge.provider(4, 5),
            Edge.provider(4, 7), Edge.provider(2, 6), Edge.provider(6, 7),
        ], {1: 1})
        rule = PerASTieBreak(attacker_ases=frozenset({4}))
        scenario = AttackScenario(7, 1)
        self.assertIn(scenario, covered_scenarios(graph, 5, rule, method=LAST_COMMON_AS).covered)
        self.assertNotIn(scenario, covered_scenarios(graph, 5, rule, method=EXACT).covered)

    def test_methode_inconnue(self):
        graph = random_topology(0)
        with self.assertRaises(ValueError):
            covered_scenarios(graph, 1, method="bgpsim")
        with self.assertRaises(ValueError):
            covered_scenarios(graph, 999)


class TestCoverageWeight(unittest.TestCase):

    def test_union_ponderee(self):
        """Un scenario couvert par deux relais n'est compte qu'une fois."""
        sets = [
            ScenarioSet(1, frozenset({AttackScenario(9, 2), AttackScenario(9, 4)})),
            ScenarioSet(3, frozenset({AttackScenario(9, 4), AttackScenario(8, 4)})),
        ]
        self.assertEqual(coverage_weight(sets, {2: 1, 4: 3}), 7)
        self.assertEqual(coverage_weight([], {2: 1}), 0)

    def test_poids_total(self):
        graph = load_client_weights(read_fixture("triangle_weights.csv"),
                                    parse_relationships(read_fixture("triangle.txt")))
        self.assertEqual(total_scenario_weight(graph), 8 * 8)

    def test_parallele(self):
        """Le calcul reparti sur plusieurs processus donne les memes ensembles."""
        graph = random_topology(1)
        relays = sorted(graph.ases)[:3]
        serial = covered_by_relays(graph, relays, jobs=1)
        parallel = covered_by_relays(graph, relays, jobs=2)
        self.assertEqual([s.covered for s in serial], [s.covered for s in parallel])


class TestCdf(unittest.TestCase):
    """Forme des courbes de repartition."""

    def setUp(self):
        self.graph = random_topology(2)
        self.relays = sorted(self.graph.ases)[:2]

    def test_partition(self):
        frame = partition_cdf(self.graph, self.relays)
        self.assertEqual(list(frame.columns), ["fraction_of_clients", "fraction_of_ases"])
        self.assertEqual(frame.iloc[0]["fraction_of_clients"], 0.0)
        self.assertEqual(frame.iloc[0]["fraction_of_ases"], 1.0)
        self.assertTrue(frame["fraction_of_ases"].is_monotonic_decreasing)
        self.assertTrue(frame["fraction_of_clients"].between(0, 1).all())

    def test_vulnerabilite(self):
        frame = client_vulnerability_cdf(self.graph, self.relays)
        self.assertEqual(list(frame.columns), ["fraction_of_ases", "fraction_of_clients"])
        self.assertTrue(frame["fraction_of_clients"].is_monotonic_increasing)
        self.assertAlmostEqual(frame.iloc[-1]["fraction_of_clients"], 1.0)

    def test_plus_de_relais_moins_de_partition(self):
        """Ajouter des relais ne peut pas augmenter la part d'AS capables de partitionner."""
        def share_above(frame, threshold):
            rows = frame[frame["fraction_of_clients"] >= threshold]
            return rows["fraction_of_ases"].max() if not rows.empty else 0.0

        few = partition_cdf(self.graph, self.relays[:1])
        many = partition_cdf(self.graph, self.relays)
        for threshold in (0.05, 0.1, 0.3):
            self.assertLessEqual(share_above(many, threshold), share_above(few, threshold))

    def test_relais_vides(self):
        with self.assertRaises(ValueError):
            partition_cdf(self.graph, [])


class TestP24Baseline(unittest.TestCase):
    """
    Victime 1 cliente de 2, lui-meme client de 3 ; 3 fournit 4 (Bitcoin) et 5.
    Le chemin vers 5 a la meme classe et la meme longueur que celui vers 4.
    """

    def setUp(self):
        self.graph = build([Edge.provider(2, 1), Edge.provider(3, 2), Edge.provider(3, 4),
                            Edge.provider(3, 5)], {1: 1, 4: 1})

    def test_frontiere(self):
        frontier = p24_baseline_frontier(self.graph, 1, self.graph.bitcoin_ases)
        self.assertEqual(frontier.exclusive, frozenset({2, 3}))
        self.assertEqual(frontier.inclusive, frozenset({2, 3, 5}))

    def test_departage(self):
        bitcoin = self.graph.bitcoin_ases
        self.assertEqual(p24_baseline_attackers(self.graph, 1, bitcoin, FAVOR_ATTACKER), frozenset({2, 3, 5}))
        self.assertEqual(p24_baseline_attackers(self.graph, 1, bitcoin, FAVOR_LEGITIMATE), frozenset({2, 3}))

    def test_sans_autre_as_bitcoin(self):
        frontier = p24_baseline_frontier(self.graph, 1, {1})
        self.assertEqual(frontier.exclusive, frozenset({2, 3, 4, 5}))
        self.assertEqual(frontier.inclusive, frontier.exclusive)

    def test_victime_sans_clients(self):
        with self.assertRaises(ValueError):
            p24_baseline_frontier(self.graph, 2, self.graph.bitcoin_ases)

    def test_courbe(self):
        """2, 3 et 5 isolent chacun les deux victimes ; 1 et 4 personne."""
        frame = p24_partition_cdf(self.graph)
        self.assertEqual(frame.values.tolist(), [[0.0, 1.0], [1.0, 0.6]])


class TestRandomTieBreak(unittest.TestCase):

    def test_clique_de_six_relais(self):
        """Les cinq autres relais doivent tous choisir l'attaquant : 1/32."""
        graph = parse_relationships(read_fixture("clique6.txt"))
        probability = tie_break_disconnect_probability(graph, range(1, 7), 1, 100, trials=10_000, seed=5)
        self.assertAlmostEqual(probability, 1 / 32, delta=0.01)

    def test_reproductible(self):
        graph = parse_relationships(read_fixture("clique6.txt"))
        first = tie_break_disconnect_probability(graph, range(1, 7), 1, 100, trials=200, seed=9)
        second = tie_break_disconnect_probability(graph, range(1, 7), 1, 100, trials=200, seed=9)
        self.assertEqual(first, second)


if __name__ == "__main__":
    unittest.main()
