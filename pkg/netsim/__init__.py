from netsim.base_node import BaseNode
from netsim.scenario import ScenarioConfig, NodeSpec, BlockSpec, LinkParams
from netsim.adversary import AdversaryPolicy, DropCrossing, DropByRelayIP, build_adversary
from netsim.nodes import LegacyClientNode, RelayClientNode, RelayNode, AbuserNode
from netsim.simulator import Simulator, Metrics, run_scenario, ddos_scenario, build_simulator
from netsim.whitelist import whitelist_occupancy, whitelist_entry_bound, min_share_for_permanent_entry
