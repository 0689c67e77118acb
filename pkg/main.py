"""
main.py
-------
Point d'entree unique : topologies, placement des relais, evaluation et simulation.

Usage :
    python main.py topo validate <relations> [--weights poids.csv]
    python main.py route tree <relations> --origin ASN [--tie attacker|legit|random] [--out f.csv]
    python main.py plan <relations> --weights poids.csv --n 6 --k 5 [--tie attacker] [--jobs 4] [--out plan.csv]
    python main.py eval partition-cdf <relations> --weights poids.csv --plan plan.csv [--out f.csv]
    python main.py eval client-cdf <relations> --weights poids.csv --plan plan.csv [--out f.csv]
    python main.py eval p24-baseline <relations> --weights poids.csv [--out f.csv]
    python main.py sim run scenarios/partition_avec_relais.json [--seed 7] [--out arrivees.csv]
    python main.py sim ddos scenarios/ddos.json [--attackers 100000] [--rate 10] [--seed 1] [--out f.csv]

Les CSV sont ecrits avec une ligne d'en-tete, sur la sortie standard si --out est absent.
Codes de sortie : 0 succes, 1 erreur metier ou fichier, 2 erreur d'usage.
"""

import argparse
import logging
import os
import sys

import pandas as pd

from analysis.attack_analysis import METHODS, client_vulnerability_cdf, partition_cdf, p24_partition_cdf
from analysis.placement import plan_relays
from models.as_graph import candidate_relays, load_graph
from models.errors import RelayNetError
from netsim.scenario import ScenarioConfig
from netsim.simulator import ddos_scenario, run_scenario
from relay.wire import WIRE_VERSION
from routing.policy import TieBreak, TieSide
from routing.routing_tree import routing_tree

__version__ = "1.0.0"

logger = logging.getLogger("main")


# =====================================================================
# FONCTIONS D'EXPORT
# =====================================================================

def write_frame(frame: pd.DataFrame, out: str = None):
    """Ecrit un DataFrame en CSV (fichier ou sortie standard)."""
    if out:
        directory = os.path.dirname(out)
        if directory:
            os.makedirs(directory, exist_ok=True)
        frame.to_csv(out, index=False)
        print(f"[Export] CSV sauvegarde : {out}")
    else:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")


def banner(title: str, stream=None):
    print("=" * 60, file=stream)
    print(f"  {title}", file=stream)
    print("=" * 60, file=stream)


def read_plan(path: str) -> list:
    """Relais d'un plan produit par la commande plan (colonne asn)."""
    frame = pd.read_csv(path)
    if "asn" not in frame.columns:
        raise RelayNetError(f"{path} : colonne 'asn' absente")
    return [int(a) for a in frame["asn"]]


def tie_break(args) -> TieBreak:
    return TieBreak.from_cli(args.tie, getattr(args, "seed", 0))


# =====================================================================
# COMMANDES
# =====================================================================

def cmd_topo_validate(args):
    graph = load_graph(args.relations, args.weights)
    peer_graph = candidate_relays(graph)
    banner("TOPOLOGIE VALIDE")
    print(f"  AS                : {graph.nb_ases}")
    print(f"  Liens             : {len(graph.edges)}")
    print(f"  Candidats relais  : {len(peer_graph.nodes)} ({len(peer_graph.edges)} liens de peering)")
    print(f"  AS Bitcoin        : {len(graph.bitcoin_ases)}")
    print(f"  Clients           : {graph.total_weight}")
    return 0


def cmd_route_tree(args):
    graph = load_graph(args.relations)
    outcome = routing_tree(graph, [args.origin], tie_break(args))
    write_frame(outcome.to_frame(), args.out)
    return 0


def cmd_plan(args):
    graph = load_graph(args.relations, args.weights)
    plan = plan_relays(graph, args.n, args.k, tie_break(args), jobs=args.jobs, method=args.method)
    write_frame(plan.to_frame(), args.out)
    # le CSV occupe la sortie standard sans --out
    summary = sys.stdout if args.out else sys.stderr
    banner("PLAN DE PLACEMENT", summary)
    print(f"  Relais            : {plan.relays}", file=summary)
    print(f"  Couverture        : {plan.coverage_fraction:.4f}", file=summary)
    print(f"  Connexite         : {plan.connectivity_certificate}", file=summary)
    print(f"  Methode           : {args.method}", file=summary)
    return 0


def cmd_eval(args):
    graph = load_graph(args.relations, args.weights)
    if args.metric == "p24-baseline":
        frame = p24_partition_cdf(graph, tie_break(args))
    else:
        if not args.plan:
            args.parser.error(f"eval {args.metric} requiert --plan")
        relays = read_plan(args.plan)
        evaluate = partition_cdf if args.metric == "partition-cdf" else client_vulnerability_cdf
        frame = evaluate(graph, relays, tie_break(args), jobs=args.jobs, method=args.method)
        print(f"[Couverture] methode {args.method}, {len(relays)} relais",
              file=sys.stdout if args.out else sys.stderr)
    write_frame(frame, args.out)
    return 0


def _load_scenario(args) -> ScenarioConfig:
    config = ScenarioConfig.from_json(args.scenario)
    if args.seed is not None:
        config.seed = args.seed
    return config


def _report(metrics, args):
    banner("SIMULATION")
    for key, value in metrics.summary().items():
        print(f"  {key:<22}: {value}")
    if args.out:
        write_frame(metrics.arrivals_frame(), args.out)


def cmd_sim_run(args):
    metrics = run_scenario(_load_scenario(args))
    _report(metrics, args)
    return 0


def cmd_sim_ddos(args):
    metrics = ddos_scenario(_load_scenario(args), attacker_rate=args.rate, attacker_count=args.attackers)
    _report(metrics, args)
    return 0


# =====================================================================
# PARSEUR
# =====================================================================

def _positive(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"entier >= 1 attendu : {value}")
    return number


def _add_graph_args(parser, weights_required: bool):
    parser.add_argument("relations", help="fichier de relations <asn>|<asn>|<rel>")
    parser.add_argument("--weights", required=weights_required, help="CSV asn,count")
    parser.add_argument("--tie", choices=[s.value for s in TieSide], default="attacker")
    parser.add_argument("--seed", type=int, default=0, help="graine du departage aleatoire")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="main.py", description="Planification et simulation de relais.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__} (format filaire v{WIRE_VERSION})")
    parser.add_argument("--verbose", action="store_true", help="journalisation DEBUG")
    commands = parser.add_subparsers(dest="command", required=True)

    topo = commands.add_parser("topo").add_subparsers(dest="action", required=True)
    validate = topo.add_parser("validate")
    validate.add_argument("relations")
    validate.add_argument("--weights")
    validate.set_defaults(handler=cmd_topo_validate)

    route = commands.add_parser("route").add_subparsers(dest="action", required=True)
    tree = route.add_parser("tree")
    tree.add_argument("relations")
    tree.add_argument("--origin", type=int, required=True)
    tree.add_argument("--tie", choices=[s.value for s in TieSide], default="attacker")
    tree.add_argument("--seed", type=int, default=0)
    tree.add_argument("--out")
    tree.set_defaults(handler=cmd_route_tree)

    plan = commands.add_parser("plan")
    _add_graph_args(plan, weights_required=True)
    plan.add_argument("--n", type=_positive, required=True)
    plan.add_argument("--k", type=int, required=True)
    plan.add_argument("--jobs", type=_positive, default=1)
    plan.add_argument("--method", choices=METHODS, default=METHODS[0],
                        help="calcul de couverture (exact par defaut, ou last-common-as)")
    plan.add_argument("--out")
    plan.set_defaults(handler=cmd_plan)

    evaluate = commands.add_parser("eval").add_subparsers(dest="metric", required=True)
    for metric in ("partition-cdf", "client-cdf", "p24-baseline"):
        sub = evaluate.add_parser(metric)
        _add_graph_args(sub, weights_required=True)
        if metric != "p24-baseline":
            sub.add_argument("--plan", help="CSV produit par la commande plan")
            sub.add_argument("--jobs", type=_positive, default=1)
            sub.add_argument("--method", choices=METHODS, default=METHODS[0],
                                help="calcul de couverture (exact par defaut, ou last-common-as)")
        sub.add_argument("--out")
        sub.set_defaults(handler=cmd_eval, parser=sub)

    sim = commands.add_parser("sim").add_subparsers(dest="action", required=True)
    run = sim.add_parser("run")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.set_defaults(handler=cmd_sim_run)

    ddos = sim.add_parser("ddos")
    ddos.add_argument("scenario")
    ddos.add_argument("--attackers", type=_positive, default=100_000)
    ddos.add_argument("--rate", type=int, default=10, help="paquets usurpes par milliseconde")
    ddos.add_argument("--seed", type=int)
    ddos.add_argument("--out")
    ddos.set_defaults(handler=cmd_sim_ddos)
    return parser


# =====================================================================
# MAIN
# =====================================================================

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except (RelayNetError, OSError, ValueError) as e:
        print(f"erreur : {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
