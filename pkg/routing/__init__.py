from routing.policy import RouteClass, Label, TieSide, TieBreak, FAVOR_ATTACKER, FAVOR_LEGITIMATE
from routing.routing_tree import RouteRecord, RoutingOutcome, routing_tree, TreeCache
from routing.hijack import HijackOutcome, simulate_same_prefix_hijack, simulate_more_specific_hijack
